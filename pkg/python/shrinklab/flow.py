"""
Reparametrized linear flows on ``T^(d+1)``.

The flow solves ``dx/dt = phi(x) (alpha, 1)`` for a positive trigonometric
polynomial ``phi``. Orbits stay on the lines of the linear flow, so the first
return to the section ``x_(d+1) = 0`` is the translation by ``alpha`` and the
return time is ``int_0^1 ds / phi(x + s alpha, s)``. The invariant measure has
density ``1/phi`` (normalised).

Integration uses the Dormand-Prince 5(4) pair: adaptive with an error-per-unit-time
control for single trajectories, fixed-step and vectorised for simulation.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import cached_property
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from sympy import integer_nthroot

from shrinklab.config import DEFAULT_BUDGETS, Budgets
from shrinklab.diophantine import ApproxCertificate, Number, as_vector
from shrinklab.errors import (
    BudgetError,
    CertificateError,
    ConfigError,
    IntegrationError,
    VerificationError,
)
from shrinklab.seeding import CHUNK_SIZE, child_rng
from shrinklab.targets import RadiusSchedule, ScheduleBlock, root_to_float
from shrinklab.torus import TorusPoint, torus_distance

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-9
CROSSING_XTOL = 1e-12

# Dormand-Prince 5(4): stage rows, the last row is the 5th-order solution.
_DOPRI_A = (
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
# Difference between the 5th and embedded 4th order weights.
_DOPRI_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

_INITIAL_STEP = 0.1
_MIN_STEP = 1e-14
_MAX_STEPS = 10**6


@dataclass(frozen=True)
class FourierTerm:
    """``cos * cos(2 pi k.x) + sin * sin(2 pi k.x)``."""

    k: tuple[int, ...]
    cos: float
    sin: float = 0.0

    @property
    def is_constant(self) -> bool:
        return not any(self.k)

    @property
    def amplitude(self) -> float:
        return math.hypot(self.cos, self.sin)

    def to_dict(self) -> dict[str, Any]:
        return {"k": list(self.k), "cos": self.cos, "sin": self.sin}


def _grid_size(dim: int) -> int:
    return max(8, min(48, int(round(2 ** (21 / dim)))))


@dataclass(frozen=True)
class FlowSpec:
    """Rotation vector ``alpha`` in ``R^d`` and a speed function ``phi`` on ``T^(d+1)``.

    ``phi_min``/``phi_max`` are certified from the coefficients: the constant
    term minus (plus) the sum of the other terms' amplitudes.
    """

    dimension: int
    alpha: tuple[float, ...]
    terms: tuple[FourierTerm, ...]

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise ConfigError(f"flow dimension must be >= 1, got {self.dimension}")
        if len(self.alpha) != self.dimension:
            raise ConfigError(
                f"alpha has {len(self.alpha)} coordinates, flow dimension is {self.dimension}"
            )
        for term in self.terms:
            if len(term.k) != self.dimension + 1:
                raise ConfigError(f"Fourier mode {term.k} must have {self.dimension + 1} entries")
        if self.phi_min <= 0:
            raise ConfigError(
                f"phi is not certified positive: constant term minus amplitudes is "
                f"{self.phi_min}"
            )

    @classmethod
    def from_params(cls, dimension: int, alpha: Number | Sequence[Number],
                    fourier: Sequence[Mapping[str, Any]]) -> "FlowSpec":
        try:
            terms = tuple(
                FourierTerm(tuple(int(v) for v in t["k"]), float(t.get("cos", 0.0)),
                            float(t.get("sin", 0.0)))
                for t in fourier
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed Fourier term: {exc}") from exc
        return cls(dimension, tuple(float(a) for a in as_vector(alpha)), terms)

    @classmethod
    def constant(cls, alpha: Sequence[float], value: float = 1.0) -> "FlowSpec":
        d = len(alpha)
        return cls(d, tuple(float(a) for a in alpha), (FourierTerm((0,) * (d + 1), value),))

    def with_alpha(self, alpha: Number | Sequence[Number]) -> "FlowSpec":
        return FlowSpec(self.dimension, tuple(float(a) for a in as_vector(alpha)), self.terms)

    # bounds ---------------------------------------------------------------

    @property
    def mean(self) -> float:
        return sum(t.cos for t in self.terms if t.is_constant)

    @property
    def phi_min(self) -> float:
        return self.mean - sum(t.amplitude for t in self.terms if not t.is_constant)

    @property
    def phi_max(self) -> float:
        return self.mean + sum(t.amplitude for t in self.terms if not t.is_constant)

    @property
    def c(self) -> float:
        """Lower bound for the return time."""
        return 1.0 / self.phi_max

    @property
    def C(self) -> float:  # noqa: N802
        """Upper bound for the return time."""
        return 1.0 / self.phi_min

    @property
    def density_ratio(self) -> float:
        return self.phi_max / self.phi_min

    # evaluation -----------------------------------------------------------

    @cached_property
    def _modes(self) -> np.ndarray:
        if not self.terms:
            return np.zeros((0, self.dimension + 1))
        return np.asarray([t.k for t in self.terms], dtype=np.float64)

    @cached_property
    def _coefficients(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.asarray([t.cos for t in self.terms], dtype=np.float64),
                np.asarray([t.sin for t in self.terms], dtype=np.float64))

    @cached_property
    def direction(self) -> np.ndarray:
        return np.asarray([*self.alpha, 1.0], dtype=np.float64)

    def phi(self, points: Any) -> Any:
        """``phi`` at points of shape ``(..., d+1)``; periodic, so no reduction needed."""
        pts = np.asarray(points, dtype=np.float64)
        phase = (2.0 * math.pi) * (pts @ self._modes.T)
        cos_c, sin_c = self._coefficients
        return np.cos(phase) @ cos_c + np.sin(phase) @ sin_c

    def velocity(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(self.phi(points))[..., None] * self.direction

    @cached_property
    def normalizer(self) -> float:
        """``int 1/phi`` over ``T^(d+1)`` by the periodic midpoint rule."""
        pts, _ = _cell_grid(self.dimension + 1, _grid_size(self.dimension + 1))
        return float(np.mean(1.0 / self.phi(pts)))

    # serialisation --------------------------------------------------------

    def to_json(self) -> dict[str, Any]:
        return {
            "d": self.dimension,
            "alpha_digits": [repr(a) for a in self.alpha],
            "fourier": [t.to_dict() for t in self.terms],
            "phi_min": self.phi_min,
            "phi_max": self.phi_max,
        }

    @classmethod
    def from_json(cls, doc: Mapping[str, Any]) -> "FlowSpec":
        try:
            return cls.from_params(int(doc["d"]), [float(a) for a in doc["alpha_digits"]],
                                   doc["fourier"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed flow document: {exc}") from exc


def _cell_grid(dim: int, m: int) -> tuple[np.ndarray, float]:
    axis = (np.arange(m) + 0.5) / m
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, dim), 1.0 / m**dim


# ---------------------------------------------------------------------------
# integration


def _dopri_step(spec: FlowSpec, y: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    ks = [spec.velocity(y)]
    y_next = y
    for row in _DOPRI_A:
        incr = sum(a * k for a, k in zip(row, ks) if a)
        y_next = y + h * incr
        ks.append(spec.velocity(y_next))
    err = h * sum(e * k for e, k in zip(_DOPRI_E, ks) if e)
    return y_next, err


def _step_factor(err: float, tol: float, h: float) -> float:
    if err == 0.0:
        return 5.0
    return min(5.0, max(0.2, 0.9 * (tol * abs(h) / err) ** 0.2))


def _integrate(spec: FlowSpec, y: np.ndarray, t: float, tol: float) -> np.ndarray:
    if t == 0:
        return y
    done = 0.0
    h = math.copysign(min(abs(t), _INITIAL_STEP), t)
    for _ in range(_MAX_STEPS):
        remaining = t - done
        last = abs(h) >= abs(remaining)
        if last:
            h = remaining
        y_new, err = _dopri_step(spec, y, h)
        e = float(np.max(np.abs(err)))
        if e <= tol * abs(h):
            y = y_new
            if last:
                return y
            done += h
        h *= _step_factor(e, tol, h)
        if abs(h) < _MIN_STEP:
            raise IntegrationError(f"step size underflow at t={done} (tol={tol})")
    raise IntegrationError(f"no convergence within {_MAX_STEPS} steps")


def flow_integrate(spec: FlowSpec, x: TorusPoint, t: float,
                   tol: float = DEFAULT_TOLERANCE) -> TorusPoint:
    """Flow ``x`` for time ``t`` (negative times run backwards)."""
    if tol <= 0:
        raise ConfigError(f"tolerance must be positive, got {tol}")
    if x.dimension != spec.dimension + 1:
        raise ConfigError(f"flow acts on T^{spec.dimension + 1}, got a point of T^{x.dimension}")
    return TorusPoint(tuple(_integrate(spec, x.as_array(), float(t), tol)))


def _fixed_steps(spec: FlowSpec, points: np.ndarray, t: float, steps: int) -> np.ndarray:
    h = t / steps
    y = points
    for _ in range(steps):
        y, _err = _dopri_step(spec, y, h)
    return np.mod(y, 1.0)


def time_one_map(spec: FlowSpec, points: np.ndarray, *, steps: int = 16) -> np.ndarray:
    """Image of many points under the time-1 map, fixed-step 5th order."""
    if steps < 1:
        raise ConfigError(f"steps must be >= 1, got {steps}")
    return _fixed_steps(spec, np.asarray(points, dtype=np.float64), 1.0, steps)


# ---------------------------------------------------------------------------
# section and return map


@dataclass(frozen=True)
class SectionData:
    point: TorusPoint
    time: float
    image: TorusPoint
    quadrature_time: float
    deviation: float

    @property
    def time_error(self) -> float:
        return abs(self.time - self.quadrature_time)

    def to_row(self) -> list[Any]:
        return [*self.point.coords, self.time, self.quadrature_time, self.time_error,
                self.deviation]


def _line_point(spec: FlowSpec, x: np.ndarray, s: float) -> np.ndarray:
    return np.append(x + s * np.asarray(spec.alpha), s)


def return_time_quadrature(spec: FlowSpec, x_section: TorusPoint) -> float:
    """``int_0^1 ds / phi(x + s alpha, s)``."""
    if x_section.dimension != spec.dimension:
        raise ConfigError("section point must lie in T^d")
    x = x_section.as_array()
    value, _abserr = quad(lambda s: 1.0 / float(spec.phi(_line_point(spec, x, s))),
                          0.0, 1.0, epsabs=1e-13, epsrel=1e-12, limit=200)
    slack = 1e-12
    if not spec.c - slack <= value <= spec.C + slack:
        raise IntegrationError(f"return time {value} outside [{spec.c}, {spec.C}]")
    return float(value)


def return_map(spec: FlowSpec, x_section: TorusPoint,
               tol: float = DEFAULT_TOLERANCE) -> SectionData:
    """Integrate from ``(x, 0)`` until the last coordinate first reaches 1.

    The crossing inside the final step is located with ``brentq`` on the
    monotone last coordinate. The image must equal ``x + alpha`` and the time
    must match the quadrature within ``100 * tol``.
    """
    if tol <= 0:
        raise ConfigError(f"tolerance must be positive, got {tol}")
    if x_section.dimension != spec.dimension:
        raise ConfigError("section point must lie in T^d")
    y = np.append(x_section.as_array(), 0.0)
    t = 0.0
    h = min(_INITIAL_STEP, spec.c / 4)
    for _ in range(_MAX_STEPS):
        y_new, err = _dopri_step(spec, y, h)
        e = float(np.max(np.abs(err)))
        if e <= tol * h:
            if y_new[-1] >= 1.0:
                break
            y, t = y_new, t + h
        h = min(h * _step_factor(e, tol, h), spec.c / 4)
        if h < _MIN_STEP:
            raise IntegrationError(f"step size underflow at t={t} (tol={tol})")
    else:
        raise IntegrationError("no section crossing found")
    y0 = y
    try:
        s = brentq(lambda u: _dopri_step(spec, y0, u)[0][-1] - 1.0, 0.0, h, xtol=CROSSING_XTOL)
    except ValueError as exc:
        raise IntegrationError(f"crossing detection failed: {exc}") from exc
    end, _err = _dopri_step(spec, y0, float(s))
    time = t + float(s)
    image = TorusPoint(tuple(end[:-1]))
    target = x_section.as_array() + np.asarray(spec.alpha)
    deviation = float(torus_distance(image.as_array()[None, :], target)[0])
    quadrature_time = return_time_quadrature(spec, x_section)
    check = 100 * tol
    if deviation > check:
        raise IntegrationError(f"return image deviates from x + alpha by {deviation}")
    if abs(time - quadrature_time) > check:
        raise IntegrationError(f"return time {time} differs from quadrature {quadrature_time}")
    return SectionData(x_section, time, image, quadrature_time, deviation)


def iterate_return_map(spec: FlowSpec, x_section: TorusPoint, k: int,
                       tol: float = DEFAULT_TOLERANCE) -> list[SectionData]:
    out = []
    point = x_section
    for _ in range(k):
        data = return_map(spec, point, tol)
        out.append(data)
        point = data.image
    return out


@dataclass(frozen=True)
class SectionSurvey:
    sections: tuple[SectionData, ...]

    @property
    def min_time(self) -> float:
        return min(s.time for s in self.sections)

    @property
    def max_time(self) -> float:
        return max(s.time for s in self.sections)

    @property
    def max_deviation(self) -> float:
        return max(s.deviation for s in self.sections)

    @property
    def max_time_error(self) -> float:
        return max(s.time_error for s in self.sections)

    def within_bounds(self, spec: FlowSpec) -> bool:
        return spec.c - 1e-9 <= self.min_time and self.max_time <= spec.C + 1e-9


def section_survey(spec: FlowSpec, count: int, seed: int, *, tol: float = DEFAULT_TOLERANCE,
                   workers: int | None = None) -> SectionSurvey:
    """Return maps from ``count`` seeded random section points."""
    pts = child_rng(seed, "sections").random((count, spec.dimension))
    starts = [TorusPoint(tuple(p)) for p in pts]
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            data = list(pool.map(lambda x: return_map(spec, x, tol), starts))
    else:
        data = [return_map(spec, x, tol) for x in starts]
    return SectionSurvey(tuple(data))


# ---------------------------------------------------------------------------
# invariant measure


def mu_phi_weight(spec: FlowSpec, x: TorusPoint | np.ndarray) -> Any:
    """Density of the invariant probability measure: ``(1/phi) / int 1/phi``."""
    pts = x.as_array() if isinstance(x, TorusPoint) else np.asarray(x, dtype=np.float64)
    return 1.0 / (np.asarray(spec.phi(pts)) * spec.normalizer)


def sample_mu_phi(spec: FlowSpec, count: int, seed: int) -> np.ndarray:
    """``count`` points drawn from the invariant measure by rejection.

    Proposals are uniform and accepted with probability ``phi_min / phi``;
    chunk ``k`` uses the stream ``("mu-phi", k)``.
    """
    if count < 0:
        raise ConfigError(f"sample count must be >= 0, got {count}")
    dim = spec.dimension + 1
    accepted: list[np.ndarray] = []
    total = 0
    k = 0
    while total < count:
        rng = child_rng(seed, "mu-phi", k)
        proposals = rng.random((CHUNK_SIZE, dim))
        keep = rng.random(CHUNK_SIZE) * spec.phi(proposals) <= spec.phi_min
        accepted.append(proposals[keep])
        total += int(keep.sum())
        k += 1
    if not accepted:
        return np.zeros((0, dim))
    return np.concatenate(accepted)[:count]


def _marginal_probabilities(spec: FlowSpec, bins: int) -> np.ndarray:
    dim = spec.dimension + 1
    m = bins * max(1, math.ceil(_grid_size(dim) / bins))
    pts, cell = _cell_grid(dim, m)
    weights = cell * mu_phi_weight(spec, pts)
    weights = weights / weights.sum()
    idx = np.minimum((pts * bins).astype(np.int64), bins - 1)
    return np.stack([np.bincount(idx[:, j], weights=weights, minlength=bins)
                     for j in range(dim)])


def _chi_square(points: np.ndarray, probs: np.ndarray, bins: int) -> list[float]:
    n = points.shape[0]
    idx = np.minimum((np.mod(points, 1.0) * bins).astype(np.int64), bins - 1)
    stats = []
    for j in range(points.shape[1]):
        observed = np.bincount(idx[:, j], minlength=bins)
        expected = n * probs[j]
        stats.append(float(np.sum((observed - expected) ** 2 / expected)))
    return stats


@dataclass(frozen=True)
class InvarianceReport:
    samples: int
    seed: int
    bins: int
    threshold: float
    before: tuple[float, ...]
    after: tuple[float, ...]

    @property
    def preserved(self) -> bool:
        return all(s <= self.threshold for s in self.after)

    def to_dict(self) -> dict[str, Any]:
        return {"samples": self.samples, "seed": self.seed, "bins": self.bins,
                "threshold": self.threshold, "before": list(self.before),
                "after": list(self.after), "preserved": self.preserved}


def invariance_check(spec: FlowSpec, samples: int, seed: int, *, bins: int = 16,
                     steps: int = 16) -> InvarianceReport:
    """Compare per-axis histograms of ``mu_phi`` samples and their time-1 images.

    Each axis gets a chi-square statistic against the grid-integrated bin
    probabilities; the threshold is three standard deviations above the mean
    of the chi-square law with ``bins - 1`` degrees of freedom.
    """
    if bins < 2:
        raise ConfigError(f"need at least 2 bins, got {bins}")
    probs = _marginal_probabilities(spec, bins)
    pts = sample_mu_phi(spec, samples, seed)
    pushed = time_one_map(spec, pts, steps=steps)
    dof = bins - 1
    threshold = dof + 3.0 * math.sqrt(2.0 * dof)
    report = InvarianceReport(samples, seed, bins, threshold,
                              tuple(_chi_square(pts, probs, bins)),
                              tuple(_chi_square(pushed, probs, bins)))
    logger.info("invariance check: max chi2 before %.2f, after %.2f (threshold %.2f)",
                max(report.before), max(report.after), threshold)
    return report


# ---------------------------------------------------------------------------
# monotone targets without the shrinking target property


def nostp_schedule(cert: ApproxCertificate, n_max: int) -> RadiusSchedule:
    """Blocks ``[U_(n-1), U_n - 1]`` on ``T^(d+1)`` with ``R_n**d = 1/(n**(2d) Q_n)``.

    ``U_n = n**(2d+2) * floor(Q_n**((d+1)/d))`` and ``U_0 = 1``; each block mass
    ``count * R_n**(d+1)`` is checked exactly to be at least 1/2.
    """
    d = cert.dimension
    blocks = []
    u_prev = 1
    for n in range(1, n_max + 1):
        q = cert.denominator(n)
        u = n ** (2 * d + 2) * _floor_power(q, d)
        if u <= u_prev:
            raise CertificateError(f"block {n} is empty: U_n={u} <= U_(n-1)={u_prev}")
        blocks.append(ScheduleBlock(u_prev, u - 1, Fraction(1, n ** (2 * d) * q)))
        u_prev = u
    schedule = RadiusSchedule(tuple(blocks), d + 1, d)
    for i in range(len(blocks)):
        if not schedule.mass_at_least(i, Fraction(1, 2)):
            raise VerificationError("block-mass", f"block {i + 1} has mass below 1/2")
    return schedule


def _floor_power(q: int, d: int) -> int:
    """``floor(q**((d+1)/d))`` exactly."""
    root, _exact = integer_nthroot(q ** (d + 1), d)
    return int(root)


@dataclass(frozen=True)
class NoSTPBlock:
    n: int
    q: int
    start: int
    end: int
    radius: float
    block_mass: float
    flow_time: int
    returns: int
    k_max: int
    time_one_contained: bool
    containment: bool
    haar_bound: Fraction
    phi_bound: float
    hit_fraction: float | None = None
    hit_error: float | None = None

    def to_row(self, regime: str) -> list[Any]:
        return [self.n, self.end + 1, self.radius, self.block_mass, float(self.haar_bound),
                self.phi_bound, self.time_one_contained, self.containment, self.hit_fraction,
                regime]


@dataclass(frozen=True)
class NoSTPReport:
    regime: str
    dimension: int
    phi_min: float
    phi_max: float
    blocks: tuple[NoSTPBlock, ...]
    decay_exponent: float | None
    samples: int | None = None
    seed: int | None = None
    measured_exponent: float | None = None

    @property
    def verified(self) -> list[NoSTPBlock]:
        return [b for b in self.blocks if b.containment]

    @property
    def mass_to_bound(self) -> list[float]:
        """``block mass / Haar bound`` over verified blocks; grows like ``n**(2d)``."""
        return [b.block_mass / float(b.haar_bound) for b in self.verified]

    @property
    def hits_below_bound(self) -> bool:
        simulated = [b for b in self.blocks if b.hit_fraction is not None]
        return all(b.hit_fraction - 3 * (b.hit_error or 0.0) <= b.phi_bound for b in simulated)


def _fit_exponent(ns: Sequence[int], values: Sequence[float]) -> float | None:
    """Decay exponent ``s`` of ``values ~ n**-s`` by least squares in log-log."""
    if len(ns) < 2:
        return None
    slope = np.polyfit(np.log(ns), np.log(values), 1)[0]
    return float(-slope)


def time_one_covered(block: ScheduleBlock, flow_time: int, q: int, k_max: int,
                     phi_max: float) -> bool:
    """Whether the time-1 indices of ``block`` fall under the flow-union bound.

    Index ``i`` of the time-1 map is flow time ``i``, so the block must end by
    ``flow_time``. Flow time ``t`` meets the section at return indices
    ``l <= floor(t / c)`` with ``c = 1/phi_max``; the largest one has to stay in
    the range ``l = k q + m`` with ``k <= k_max``.
    """
    if block.start < 0 or block.end > flow_time:
        return False
    last = math.floor(flow_time * Fraction(phi_max))
    return last // q <= k_max


def _simulate_hits(spec: FlowSpec, center: np.ndarray, blocks: Sequence[NoSTPBlock],
                   samples: int, seed: int, steps: int) -> dict[int, tuple[float, float]]:
    pts = sample_mu_phi(spec, samples, seed)
    horizon = max(b.end for b in blocks)
    hit = {b.n: np.zeros(samples, dtype=bool) for b in blocks}
    for index in range(1, horizon + 1):
        pts = time_one_map(spec, pts, steps=steps)
        dist = torus_distance(pts, center)
        for b in blocks:
            if b.start <= index <= b.end:
                hit[b.n] |= dist < b.radius
    out = {}
    for n, mask in hit.items():
        p = float(mask.mean())
        out[n] = (p, math.sqrt(p * (1.0 - p) / samples))
    return out


def nostp_experiment(spec: FlowSpec, cert: ApproxCertificate, n_max: int | None = None,
                     center: TorusPoint | None = None, *, regime: str = "faithful",
                     samples: int = 2000, seed: int | None = None, steps: int = 16,
                     simulate: bool | None = None, schedule: RadiusSchedule | None = None,
                     budgets: Budgets = DEFAULT_BUDGETS) -> NoSTPReport:
    """Finite-horizon check that the time-1 map fails the monotone STP.

    For every block the chain is: target indices lie within flow time ``U_n``;
    flow time ``U_n`` meets the section at most ``L_n = ceil(U_n phi_max)``
    times; writing ``l = k Q_n + m`` with ``k <= k_max = L_n // Q_n`` the
    translates stay within ``k_max b_n <= R_n`` of the first ``Q_n`` ones. The
    section union then has measure at most ``(Q_n + 1)(4 R_n)**d``, scaled to
    ``mu_phi`` by ``(phi_max/phi_min)(C + 1)``.

    Time-1 indices must stay inside the flow horizon ``U_n`` the chain is run
    on; a caller-supplied ``schedule`` is checked against it block by block.

    With ``simulate`` (default: simulable regime) blocks whose flow time fits
    the simulation budget are also checked by iterating the time-1 map on
    ``mu_phi`` samples, and the hit fractions get their own fitted exponent.
    """
    d = spec.dimension
    if cert.dimension != d:
        raise CertificateError(f"certificate dimension {cert.dimension} differs from flow "
                               f"dimension {d}")
    if regime == "faithful" and cert.tag != "eq7":
        raise CertificateError(f"faithful no-STP experiment needs an eq7 certificate, got "
                               f"{cert.tag!r}")
    n_max = len(cert) if n_max is None else n_max
    if not 1 <= n_max <= len(cert):
        raise CertificateError(f"n_max={n_max} outside certificate length {len(cert)}")
    if cert.alpha:
        gap = max(abs(float(a) - b) for a, b in zip(cert.alpha, spec.alpha))
        if gap > 2.0**-40:
            raise CertificateError(f"flow alpha differs from the certificate by {gap}")
    cert.verify()
    x0 = TorusPoint.origin(d + 1) if center is None else center
    if x0.dimension != d + 1:
        raise ConfigError(f"target center must lie in T^{d + 1}")
    schedule = nostp_schedule(cert, n_max) if schedule is None else schedule
    if len(schedule) < n_max or schedule.dimension != d + 1 or schedule.root != d:
        raise ConfigError(f"schedule must have {n_max} blocks on T^{d + 1} with root {d}")
    phi_max = Fraction(spec.phi_max)
    factor = spec.density_ratio * (spec.C + 1.0)
    rows = []
    for n in range(1, n_max + 1):
        q, b = cert.denominator(n), cert.bound(n)
        block = schedule.blocks[n - 1]
        tau = n ** (2 * d + 2) * _floor_power(q, d)
        returns = math.ceil(tau * phi_max)
        k_max = returns // q
        contained = (k_max * b) ** d * n ** (2 * d) * q <= 1
        covered = time_one_covered(block, tau, q, k_max, spec.phi_max)
        if not contained:
            logger.warning("block %d: k_max b_n exceeds R_n (k_max=%d); bound not certified",
                           n, k_max)
        if not covered:
            logger.warning("block %d: time-1 indices [%d, %d] leave flow time %d",
                           n, block.start, block.end, tau)
        haar = Fraction(4**d * (q + 1), n ** (2 * d) * q)
        rows.append(NoSTPBlock(
            n=n, q=q, start=block.start, end=block.end,
            radius=root_to_float(block.radius_pow, d),
            block_mass=schedule.block_mass_float(n - 1),
            flow_time=tau, returns=returns, k_max=k_max,
            time_one_contained=covered,
            containment=contained and covered, haar_bound=haar,
            phi_bound=float(haar) * factor,
        ))
    if not any(r.containment for r in rows):
        raise VerificationError("containment", "no block passes the containment chain")
    verified = [r for r in rows if r.containment]
    exponent = _fit_exponent([r.n for r in verified], [float(r.haar_bound) for r in verified])
    if simulate is None:
        simulate = regime == "simulable"
    fitted: float | None = None
    if simulate:
        if regime != "simulable":
            raise ConfigError("direct time-1 simulation is only available in the simulable regime")
        if seed is None:
            raise ConfigError("direct time-1 simulation needs an explicit seed")
        simulable = [r for r in rows if r.flow_time <= budgets.simulation_time]
        if not simulable:
            raise BudgetError(f"no block fits the simulation horizon {budgets.simulation_time}")
        horizon = max(r.end for r in simulable)
        if samples * horizon > budgets.orbit_indices:
            raise BudgetError(f"{samples} samples x {horizon} steps exceeds the orbit budget")
        hits = _simulate_hits(spec, x0.as_array(), simulable, samples, seed, steps)
        rows = [_with_hits(r, hits.get(r.n)) for r in rows]
        for r in rows:
            if r.hit_fraction is not None and r.containment and \
                    r.hit_fraction - 3 * (r.hit_error or 0.0) > r.phi_bound:
                raise VerificationError("simulation", f"hit fraction {r.hit_fraction} exceeds "
                                        f"the certified bound at n={r.n}")
        measured = [(r.n, r.hit_fraction) for r in rows if r.hit_fraction]
        fitted = _fit_exponent([n for n, _ in measured], [p for _, p in measured])
    logger.info("no-STP experiment (%s): %d blocks, decay exponent %s", regime, len(rows),
                "n/a" if exponent is None else f"{exponent:.3f}")
    return NoSTPReport(regime, d, spec.phi_min, spec.phi_max, tuple(rows), exponent,
                       samples if simulate else None, seed if simulate else None,
                       fitted)


def _with_hits(row: NoSTPBlock, hit: tuple[float, float] | None) -> NoSTPBlock:
    if hit is None:
        return row
    return replace(row, hit_fraction=hit[0], hit_error=hit[1])
