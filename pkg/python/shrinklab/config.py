"""
Experiment configuration.

An experiment is described by one JSON document; :class:`ExperimentConfig`
loads it, checks it and exposes the parameters to the runner. Library-wide
resource limits live in :class:`Budgets`.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from shrinklab.errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_PRECISION_BITS = 512

#: Random section points checked by a flow-nostp run unless `section_checks` says otherwise.
DEFAULT_SECTION_CHECKS = 16

KINDS = (
    "approx",
    "empty-limsup",
    "non-bc",
    "mstp-bound",
    "lemma-campaign",
    "flow-nostp",
    "ergodic-demo",
)

REGIMES = ("faithful", "simulable")

REQUIRED_PARAMS: Mapping[str, tuple[str, ...]] = {
    "approx": ("alpha", "q_max"),
    "empty-limsup": ("alpha", "p_max"),
    "non-bc": ("n_max",),
    "mstp-bound": ("alpha", "doublings"),
    "lemma-campaign": ("instances",),
    "flow-nostp": ("dimension", "n_max", "fourier"),
    "ergodic-demo": ("alpha", "radius", "horizon", "samples"),
}

# Parameters that must be integers >= the given minimum when present.
_INTEGER_MINIMA: Mapping[str, int] = {
    "q_max": 1,
    "p_max": 0,
    "n_max": 1,
    "doublings": 0,
    "instances": 1,
    "samples": 1,
    "horizon": 0,
    "min_hits": 1,
    "dimension": 1,
    "resolution": 1,
    "block_exponent": 2,
    "section_checks": 0,
    "invariance_samples": 0,
    "max_levels": 1,
}


@dataclass(frozen=True)
class Budgets:
    """Resource limits shared by the library."""

    #: Exhaustive approximation searches need ``d * log2(Q_max)`` within this many bits.
    search_bits: int = 32
    #: Maximum number of orbit indices scanned by a float-mode hit search.
    orbit_indices: int = 10**8
    #: Maximum number of indices scanned in certificate (exact) mode.
    exact_indices: int = 10**5
    #: Maximum number of cells in a d-dimensional measure grid.
    grid_cells: int = 2**24
    #: Maximum number of arcs in an exact 1-D union.
    arcs: int = 2 * 10**6
    #: Longest flow time simulated directly with the time-1 map.
    simulation_time: int = 4000


DEFAULT_BUDGETS = Budgets()


def _is_stochastic(kind: str, regime: str, params: Mapping[str, Any]) -> bool:
    if kind in ("lemma-campaign", "ergodic-demo"):
        return True
    if kind == "flow-nostp":
        # random section points and mu_phi samples are drawn in every regime
        return (regime == "simulable"
                or bool(params.get("section_checks", DEFAULT_SECTION_CHECKS))
                or bool(params.get("invariance_samples", 0)))
    return kind == "non-bc" and regime == "simulable"


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment run, as read from its JSON config file."""

    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)
    regime: str = "faithful"
    seed: int | None = None
    precision_bits: int = DEFAULT_PRECISION_BITS
    output_dir: str = "reports"
    direct_simulation: bool = False

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        if not isinstance(data, Mapping):
            raise ConfigError("config must be a JSON object")
        known = {"kind", "params", "regime", "seed", "precision_bits", "output_dir",
                 "direct_simulation"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(unknown)}", unknown)
        if "kind" not in data:
            raise ConfigError("config is missing field 'kind'", ["kind: missing"])
        return cls(
            kind=str(data["kind"]),
            params=dict(data.get("params") or {}),
            regime=str(data.get("regime", "faithful")),
            seed=data.get("seed"),
            precision_bits=data.get("precision_bits", DEFAULT_PRECISION_BITS),
            output_dir=str(data.get("output_dir", "reports")),
            direct_simulation=bool(data.get("direct_simulation", False)),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    @property
    def stochastic(self) -> bool:
        return _is_stochastic(self.kind, self.regime, self.params)

    def param(self, name: str, default: Any = None) -> Any:
        return self.params.get(name, default)

    def with_overrides(self, *, seed: int | None = None,
                       output_dir: str | None = None) -> "ExperimentConfig":
        return ExperimentConfig(
            kind=self.kind,
            params=self.params,
            regime=self.regime,
            seed=self.seed if seed is None else seed,
            precision_bits=self.precision_bits,
            output_dir=self.output_dir if output_dir is None else output_dir,
            direct_simulation=self.direct_simulation,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "params": dict(self.params),
            "regime": self.regime,
            "seed": self.seed,
            "precision_bits": self.precision_bits,
            "output_dir": self.output_dir,
            "direct_simulation": self.direct_simulation,
        }

    def validate(self) -> list[str]:
        """Return every violation; an empty list means the run can start."""
        violations: list[str] = []
        if self.kind not in KINDS:
            violations.append(f"kind: unknown experiment kind {self.kind!r}")
            return violations
        if self.regime not in REGIMES:
            violations.append(f"regime: must be one of {', '.join(REGIMES)}")
        if self.regime == "faithful" and self.direct_simulation:
            violations.append(
                "direct_simulation: faithful regime constants cannot be simulated directly"
            )
        if not isinstance(self.precision_bits, int) or self.precision_bits < 64:
            violations.append("precision_bits: must be an integer >= 64")
        for name in REQUIRED_PARAMS[self.kind]:
            if name not in self.params:
                violations.append(f"params.{name}: required for kind {self.kind}")
        for name, minimum in _INTEGER_MINIMA.items():
            if name not in self.params:
                continue
            value = self.params[name]
            if isinstance(value, bool) or not isinstance(value, int):
                violations.append(f"params.{name}: must be an integer")
            elif value < minimum:
                violations.append(f"params.{name}: must be >= {minimum}, got {value}")
        if "radius" in self.params:
            radius = self.params["radius"]
            if not isinstance(radius, (int, float)) or radius < 0:
                violations.append("params.radius: must be a non-negative number")
        if "alpha" in self.params:
            alpha = self.params["alpha"]
            if not isinstance(alpha, list) or not alpha:
                violations.append("params.alpha: must be a non-empty list of numbers or names")
        if self.stochastic and self.seed is None:
            violations.append(f"seed: required for stochastic kind {self.kind}")
        if self.seed is not None and (isinstance(self.seed, bool)
                                      or not isinstance(self.seed, int)):
            violations.append("seed: must be an integer")
        return violations

    def require_valid(self) -> None:
        violations = self.validate()
        if violations:
            raise ConfigError("invalid config: " + "; ".join(violations), violations)

    def __repr__(self) -> str:
        return (
            f"ExperimentConfig(kind={self.kind!r}, regime={self.regime!r}, "
            f"seed={self.seed!r}, precision_bits={self.precision_bits!r})"
        )
