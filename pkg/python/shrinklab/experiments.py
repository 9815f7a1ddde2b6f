"""
Experiment runner.

:func:`run` executes one validated :class:`~shrinklab.config.ExperimentConfig`,
writes its CSV/JSON reports and a run manifest into ``config.output_dir``.
Report names carry the config hash, which the manifest records too.
"""

from __future__ import annotations

import logging
import platform
import time
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import metadata
from pathlib import Path
from typing import Any, Callable, Sequence

import mpmath
import numpy as np
import scipy
import sympy

from shrinklab.config import DEFAULT_BUDGETS, DEFAULT_SECTION_CHECKS, Budgets, ExperimentConfig
from shrinklab.diophantine import (
    ApproxCertificate,
    RealScalar,
    as_vector,
    best_sim_approx,
    bits_for_level,
    build_liouville_vector,
    cf_expand,
    type_estimate,
)
from shrinklab.errors import FalsificationError, ShrinkLabError
from shrinklab.flow import FlowSpec, invariance_check, nostp_experiment, section_survey
from shrinklab.mstp import epsilon_alpha, lemma_campaign, mstp_lower_bound
from shrinklab.output import OutputWriter, config_hash
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
from shrinklab.torus import Ball, TorusPoint, balls_to_rows, orbit

logger = logging.getLogger(__name__)


@dataclass
class Reports:
    """Collects the report files of one run."""

    directory: Path
    digest: str
    kind: str
    files: list[Path] = field(default_factory=list)

    def _name(self, stem: str) -> str:
        return f"{self.kind}-{stem}-{self.digest}"

    def csv(self, stem: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
        self.files.append(OutputWriter.write_csv(self.directory, self._name(stem), header, rows))

    def json(self, stem: str, data: dict[str, Any]) -> None:
        doc = {"config_hash": self.digest, **data}
        self.files.append(OutputWriter.write_json(self.directory, self._name(stem), doc))


@dataclass(frozen=True)
class RunResult:
    config_hash: str
    files: tuple[Path, ...]
    manifest: Path
    summary: dict[str, Any]
    wall_time: float


Outcome = tuple[dict[str, Any], "ShrinkLabError | None"]


def _center(config: ExperimentConfig, d: int) -> TorusPoint:
    coords = config.param("center")
    return TorusPoint.origin(d) if coords is None else TorusPoint(tuple(coords))


def _run_approx(config: ExperimentConfig, out: Reports, budgets: Budgets) -> Outcome:
    vec = as_vector(config.param("alpha"), config.precision_bits)
    q_max = config.param("q_max")
    records = best_sim_approx(vec, q_max, budget_bits=budgets.search_bits)
    out.csv("records", ["Q", "distance", "distance_lower", "distance_upper", "scaled"],
            [[r.q, float(r.distance), r.distance.lower, r.distance.upper, r.scaled]
             for r in records])
    summary: dict[str, Any] = {
        "dimension": len(vec),
        "records": len(records),
        "type_estimate": type_estimate(vec, q_max, budget_bits=budgets.search_bits),
        "epsilon": epsilon_alpha(vec, q_max, budget_bits=budgets.search_bits).to_dict(),
    }
    if len(vec) == 1:
        cf = cf_expand(vec[0], config.param("cf_terms", 12))
        out.csv("convergents", ["k", "a_k", "p_k", "q_k"],
                [[k, a, p, q] for k, (a, (p, q)) in enumerate(zip(cf.quotients, cf.convergents),
                                                             1)])
        summary["integer_part"] = cf.integer_part
    out.json("summary", summary)
    return summary, None


def _run_empty_limsup(config: ExperimentConfig, out: Reports, budgets: Budgets) -> Outcome:
    alpha = config.param("alpha")
    d = len(alpha)
    p_max = config.param("p_max")
    bits = max(config.precision_bits, bits_for_level(5 ** (d * (p_max + 1))))
    vec = as_vector(alpha, bits)
    max_levels = config.param("max_levels") if config.regime == "simulable" else None
    schedule, cert = empty_limsup_schedule(vec, p_max, max_levels=max_levels)
    report = verify_empty_limsup(cert)
    out.csv("blocks", ["p", "start", "end", "active", "strip", "shift"],
            [[b["p"], b["start"], b["end"], b["active"], b["strip"], b["shift"]]
             for b in report.blocks])
    out.csv("schedule", ["p", "l", "q", "n", "radius_pow"],
            [[e.p, e.level, e.q, e.n, e.radius_pow] for e in cert.entries])
    out.json("certificate", cert.to_json())
    summary = {"p_max": p_max, "active_indices": len(cert.entries),
               "partial_sum": schedule.partial_sum(), "conclusion": report.conclusion,
               "regime": report.regime, "translation_invariant": report.translation_invariant,
               "precision_bits": bits}
    out.json("summary", summary)
    return summary, None


def _liouville(config: ExperimentConfig, default_tag: str
               ) -> tuple[tuple[RealScalar, ...], ApproxCertificate]:
    d = config.param("dimension", 1)
    tag = config.param("decay", default_tag)
    n_max = config.param("n_max")
    on_convergents = config.param("on_convergents",
                                  config.regime == "simulable" and d == 1)
    return build_liouville_vector(d, tag, n_max, bits=config.precision_bits,
                                  on_convergents=on_convergents)


def _run_non_bc(config: ExperimentConfig, out: Reports, budgets: Budgets) -> Outcome:
    alpha, cert = _liouville(config, "eq3")
    d = cert.dimension
    n_max = config.param("n_max")
    s = config.param("block_exponent")
    schedule = non_bc_schedule(cert, n_max, block_exponent=s, regime=config.regime)
    report = verify_non_bc(alpha, cert, schedule, n_max, regime=config.regime,
                           block_exponent=s, center=_center(config, d),
                           resolution=config.param("resolution", 1024), budgets=budgets)
    out.csv("blocks", ["n", "Q_n", "U_prev", "U_n", "R_n", "block_mass", "measure",
                       "measure_error", "measure_bound", "regime"],
            [[b.n, b.q, b.start, b.end + 1, b.radius, b.mass,
              None if b.measure is None else b.measure.value,
              None if b.measure is None else b.measure.error, b.measure_bound, report.regime]
             for b in report.blocks])
    out.json("certificate", cert.to_json())
    summary: dict[str, Any] = {"blocks": len(report.blocks), "block_exponent":
                               report.block_exponent, "constant": report.constant,
                               "tail_constant": report.tail_constant,
                               "measures_decreasing": report.measures_decreasing}
    samples = config.param("samples")
    if config.direct_simulation and samples and config.seed is not None:
        target = TargetSequence(_center(config, d), schedule)
        rows = []
        for block in report.blocks:
            if (block.end - block.start + 1) * samples > budgets.orbit_indices:
                continue
            mc = bc_monte_carlo(alpha, target, block.end + 1, samples, config.seed,
                                window=(block.start, block.end), budgets=budgets)
            rows.append([block.n, mc.fraction, mc.error, float(report.constant) / block.n**
                         report.block_exponent])
        out.csv("monte-carlo", ["n", "hit_fraction", "error", "fitted_bound"], rows)
        summary["monte_carlo_blocks"] = len(rows)
    out.json("summary", summary)
    return summary, None


def _run_mstp(config: ExperimentConfig, out: Reports, budgets: Budgets) -> Outcome:
    vec = as_vector(config.param("alpha"), config.precision_bits)
    d = len(vec)
    doublings = config.param("doublings")
    scale = Fraction(str(config.param("radius_scale", 0.3)))
    shift = config.param("radius_shift", 1)
    schedule = RadiusSchedule.from_function(lambda l: scale / (l + shift),
                                            2 ** (doublings + 1), d)
    report = mstp_lower_bound(vec, _center(config, d), schedule, doublings,
                              resolution=config.param("resolution", 1024), budgets=budgets)
    out.csv("doublings", ["n", "horizon", "union", "union_error", "lower_bound", "partial_sum"],
            [[r.n, r.horizon, r.union.value, r.union.error, r.lower_bound, r.partial_sum]
             for r in report.rows])
    horizon = report.rows[-1].horizon
    centers = orbit(_center(config, d), [-a for a in vec], horizon)
    radii = schedule.radii_array(horizon)
    out.csv("balls", ["index", *(f"x{i + 1}" for i in range(d)), "radius"],
            balls_to_rows(Ball(TorusPoint(tuple(c)), float(r)) for c, r in zip(centers, radii)))
    out.json("measures", {"horizons": [r.horizon for r in report.rows],
                          "unions": [r.union.to_dict() for r in report.rows]})
    summary = {"epsilon": report.epsilon.to_dict(), "eta": report.eta,
               "reached_at": report.reached_at, "divergence_hint": report.divergence_hint,
               "nondecreasing": report.nondecreasing,
               "recurrence_holds": report.recurrence_holds()}
    out.json("summary", summary)
    return summary, None


def _run_lemma(config: ExperimentConfig, out: Reports, budgets: Budgets) -> Outcome:
    assert config.seed is not None
    result = lemma_campaign(config.param("instances"), config.seed,
                            dimensions=tuple(config.param("dimensions", (1, 2))),
                            q_values=tuple(config.param("q_values", (4, 8, 16))),
                            workers=config.param("workers"), budgets=budgets)
    out.csv("verdicts", ["instance", "d", "Q", "alternative", "margin_i", "margin_ii",
                         "resolution"],
            [[r.instance_id, r.d, r.q, r.alternative, r.margin_i, r.margin_ii, r.resolution]
             for r in result.rows])
    counts: dict[str, int] = {}
    for r in result.rows:
        counts[r.alternative] = counts.get(r.alternative, 0) + 1
    if result.falsifications:
        out.json("falsifications", {"replays": list(result.falsifications)})
    summary = {"instances": len(result.rows), "alternatives": counts,
               "falsifications": len(result.falsifications), "undecided": result.undecided,
               "undecided_by_dimension": {str(d): n for d, n in
                                          result.undecided_by_dimension.items()},
               "max_resolution": result.max_resolution}
    out.json("summary", summary)
    error = None
    if result.falsifications:
        error = FalsificationError(
            f"{len(result.falsifications)} covering instances satisfy neither alternative"
        )
    return summary, error


def _run_flow_nostp(config: ExperimentConfig, out: Reports, budgets: Budgets) -> Outcome:
    alpha, cert = _liouville(config, "eq7")
    d = cert.dimension
    spec = FlowSpec.from_params(d, alpha, config.param("fourier"))
    report = nostp_experiment(spec, cert, config.param("n_max"), _center(config, d + 1),
                              regime=config.regime, samples=config.param("samples", 2000),
                              seed=config.seed, steps=config.param("steps", 16),
                              simulate=config.direct_simulation,
                              budgets=budgets)
    out.csv("blocks", ["n", "U_n", "R_n", "block_mass", "measure_bound", "phi_bound",
                       "time_one_contained", "containment", "hit_fraction", "regime"],
            [b.to_row(report.regime) for b in report.blocks])
    out.json("flow", spec.to_json())
    summary: dict[str, Any] = {
        "decay_exponent": report.decay_exponent,
        "measured_exponent": report.measured_exponent,
        "mass_to_bound": report.mass_to_bound,
        "c": spec.c, "C": spec.C,
        "hits_below_bound": report.hits_below_bound,
    }
    section_checks = config.param("section_checks", DEFAULT_SECTION_CHECKS)
    if section_checks:
        assert config.seed is not None
        survey = section_survey(spec, section_checks, config.seed,
                                workers=config.param("workers"))
        out.csv("sections", [*(f"x{i + 1}" for i in range(d)), "time", "quadrature_time",
                             "time_error", "deviation"],
                [s.to_row() for s in survey.sections])
        summary["return_time_range"] = [survey.min_time, survey.max_time]
        summary["max_section_deviation"] = survey.max_deviation
    invariance_samples = config.param("invariance_samples", 0)
    if invariance_samples:
        assert config.seed is not None
        summary["invariance"] = invariance_check(spec, invariance_samples,
                                                 config.seed).to_dict()
    out.json("summary", summary)
    return summary, None


def _run_ergodic(config: ExperimentConfig, out: Reports, budgets: Budgets) -> Outcome:
    assert config.seed is not None
    vec = as_vector(config.param("alpha"), config.precision_bits)
    d = len(vec)
    horizon = config.param("horizon")
    schedule = RadiusSchedule.constant(Fraction(str(config.param("radius"))), 0,
                                       max(0, horizon - 1), d)
    target = TargetSequence(_center(config, d), schedule)
    min_hits = config.param("min_hits", 10)
    mc = bc_monte_carlo(vec, target, horizon, config.param("samples"), config.seed,
                        min_hits=min_hits, workers=config.param("workers"), budgets=budgets)
    out.csv("hits", ["samples", "horizon", "min_hits", "fraction", "error"],
            [[mc.samples, mc.horizon, mc.min_hits, mc.fraction, mc.error]])
    summary = mc.to_dict()
    start = TorusPoint(tuple(config.param("start", [0.0] * d)))
    hits = hit_set(vec, target, start, horizon, max_hits=config.param("max_hits"),
                   budgets=budgets)
    out.csv("hit-set", ["sample_id", "n", *(f"x{i + 1}" for i in range(d))], hits.rows())
    summary["start_hits"] = len(hits.hits)
    out.json("summary", summary)
    return summary, None


RUNNERS: dict[str, Callable[[ExperimentConfig, Reports, Budgets], Outcome]] = {
    "approx": _run_approx,
    "empty-limsup": _run_empty_limsup,
    "non-bc": _run_non_bc,
    "mstp-bound": _run_mstp,
    "lemma-campaign": _run_lemma,
    "flow-nostp": _run_flow_nostp,
    "ergodic-demo": _run_ergodic,
}


def hashed_config(config: ExperimentConfig) -> dict[str, Any]:
    """The config fields that determine report bodies (output location excluded)."""
    doc = config.to_dict()
    doc.pop("output_dir")
    return doc


def versions() -> dict[str, str]:
    from shrinklab import __version__

    try:
        own = metadata.version("shrinklab")
    except metadata.PackageNotFoundError:
        own = __version__
    return {
        "shrinklab": own,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "mpmath": mpmath.__version__,
        "sympy": sympy.__version__,
        "python": platform.python_version(),
    }


def run(config: ExperimentConfig, *, budgets: Budgets = DEFAULT_BUDGETS) -> RunResult:
    """Execute ``config`` and write its reports and manifest.

    A lemma campaign with falsifications still writes everything, then raises
    :class:`FalsificationError`.
    """
    config.require_valid()
    directory = Path(config.output_dir)
    directory.mkdir(parents=True, exist_ok=True)
    digest = config_hash(hashed_config(config))
    reports = Reports(directory, digest, config.kind)
    logger.info("running %s (%s regime), config hash %s", config.kind, config.regime, digest)
    started = time.perf_counter()
    summary, pending = RUNNERS[config.kind](config, reports, budgets)
    wall = time.perf_counter() - started
    manifest = OutputWriter.write_json(directory, f"manifest-{digest}", {
        "config_hash": digest,
        "config": config.to_dict(),
        "versions": versions(),
        "seed": config.seed,
        "wall_time": wall,
        "files": [p.name for p in reports.files],
    })
    logger.info("%s finished in %.2fs, %d report files", config.kind, wall, len(reports.files))
    if pending is not None:
        raise pending
    return RunResult(digest, tuple(reports.files), manifest, summary, wall)
