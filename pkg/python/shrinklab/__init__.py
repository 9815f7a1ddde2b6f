"""
shrinklab - shrinking targets, simultaneous Diophantine approximation and
reparametrized linear flows on tori.

Certified constructions use exact rationals and interval arithmetic;
simulations are seeded and reproducible.
"""

__version__ = "0.1.0"
__author__ = "shrinklab developers"
__license__ = "AGPL-3.0-or-later"

from shrinklab.config import Budgets, ExperimentConfig
from shrinklab.diophantine import (
    ApproxCertificate,
    ContinuedFraction,
    RealScalar,
    best_sim_approx,
    build_liouville_vector,
    cf_expand,
    dist_to_int,
    dist_to_lattice,
    type_estimate,
)
from shrinklab.errors import (
    BudgetError,
    CertificateError,
    ConfigError,
    EpsilonZeroError,
    FalsificationError,
    HypothesisError,
    IntegrationError,
    NonMonotoneError,
    PrecisionError,
    RationalInputError,
    ResolutionError,
    ShrinkLabError,
    VerificationError,
)
from shrinklab.experiments import run
from shrinklab.flow import (
    FlowSpec,
    flow_integrate,
    mu_phi_weight,
    nostp_experiment,
    return_map,
    return_time_quadrature,
)
from shrinklab.mstp import (
    CoveringInstance,
    covering_lemma_check,
    epsilon_alpha,
    lemma_campaign,
    mstp_lower_bound,
)
from shrinklab.output import OutputWriter
from shrinklab.targets import (
    RadiusSchedule,
    TargetSequence,
    bc_monte_carlo,
    empty_limsup_schedule,
    hit_set,
    non_bc_schedule,
    verify_empty_limsup,
    verify_non_bc,
)
from shrinklab.torus import (
    Ball,
    TorusPoint,
    disjointness_check,
    orbit,
    translate,
    union_measure_1d,
    union_measure_md,
)

__all__ = [
    "ApproxCertificate",
    "Ball",
    "BudgetError",
    "Budgets",
    "CertificateError",
    "ConfigError",
    "ContinuedFraction",
    "CoveringInstance",
    "EpsilonZeroError",
    "ExperimentConfig",
    "FalsificationError",
    "FlowSpec",
    "HypothesisError",
    "IntegrationError",
    "NonMonotoneError",
    "OutputWriter",
    "PrecisionError",
    "RadiusSchedule",
    "RationalInputError",
    "RealScalar",
    "ResolutionError",
    "ShrinkLabError",
    "TargetSequence",
    "TorusPoint",
    "VerificationError",
    "bc_monte_carlo",
    "best_sim_approx",
    "build_liouville_vector",
    "cf_expand",
    "covering_lemma_check",
    "disjointness_check",
    "dist_to_int",
    "dist_to_lattice",
    "empty_limsup_schedule",
    "epsilon_alpha",
    "flow_integrate",
    "hit_set",
    "lemma_campaign",
    "mstp_lower_bound",
    "mu_phi_weight",
    "non_bc_schedule",
    "nostp_experiment",
    "orbit",
    "return_map",
    "return_time_quadrature",
    "run",
    "translate",
    "type_estimate",
    "union_measure_1d",
    "union_measure_md",
    "verify_empty_limsup",
    "verify_non_bc",
    "__version__",
]
