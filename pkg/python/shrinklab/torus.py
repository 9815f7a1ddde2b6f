"""
Points, sup-metric balls, translation orbits and union measures on ``T^d``.

Balls are open. One-dimensional unions are measured exactly by merging arcs;
in higher dimension the module offers a cell-centre grid with a rigorous
boundary error and a chunk-seeded Monte-Carlo estimate.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Sequence

import numpy as np

from shrinklab.config import DEFAULT_BUDGETS
from shrinklab.diophantine import Number, RealScalar, as_vector
from shrinklab.errors import BudgetError, ConfigError, PrecisionError
from shrinklab.seeding import CHUNK_SIZE, child_rng, chunk_sizes

logger = logging.getLogger(__name__)

_TWO64 = 2.0**64
# Largest enclosure radius accepted for a float-mode orbit offset.
_OFFSET_RADIUS = Fraction(1, 2**50)


@dataclass(frozen=True)
class TorusPoint:
    """A point of ``T^d`` with float coordinates reduced into ``[0, 1)``."""

    coords: tuple[float, ...]

    def __post_init__(self) -> None:
        reduced = tuple(float(c) % 1.0 for c in self.coords)
        object.__setattr__(self, "coords", tuple(0.0 if c == 1.0 else c for c in reduced))

    @classmethod
    def of(cls, *coords: float) -> "TorusPoint":
        return cls(tuple(coords))

    @classmethod
    def origin(cls, d: int) -> "TorusPoint":
        return cls((0.0,) * d)

    @property
    def dimension(self) -> int:
        return len(self.coords)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=np.float64)


@dataclass(frozen=True)
class ExactTorusPoint:
    """A point of ``T^d`` held as interval coordinates (certificate mode)."""

    coords: tuple[RealScalar, ...]

    @property
    def dimension(self) -> int:
        return len(self.coords)

    def to_float(self) -> TorusPoint:
        return TorusPoint(tuple(float(c) for c in self.coords))


@dataclass(frozen=True)
class Ball:
    """Open sup-metric ball; radii of 1/2 or more cover the whole torus."""

    center: TorusPoint
    radius: float

    def __post_init__(self) -> None:
        if self.radius < 0:
            raise ConfigError(f"ball radius must be non-negative, got {self.radius}")

    @property
    def dimension(self) -> int:
        return self.center.dimension

    @property
    def measure(self) -> float:
        return min(1.0, 2.0 * self.radius) ** self.dimension

    def to_row(self, index: int) -> list[Any]:
        return [index, *self.center.coords, self.radius]


@dataclass(frozen=True)
class MeasureEstimate:
    """A measure value with its method and error.

    For ``exact`` and ``grid`` the error is a rigorous bound; for
    ``monte-carlo`` it is the binomial standard error of ``samples`` draws.
    """

    value: float
    method: str
    error: float
    samples: int | None = None
    seed: int | None = None
    resolution: int | None = None

    @property
    def lower(self) -> float:
        return max(0.0, self.value - self.error)

    @property
    def upper(self) -> float:
        return min(1.0, self.value + self.error)

    def to_dict(self) -> dict[str, Any]:
        return {
            "value": self.value,
            "method": self.method,
            "error": self.error,
            "samples": self.samples,
            "seed": self.seed,
            "resolution": self.resolution,
        }


# ---------------------------------------------------------------------------
# translation


def _frac(x: RealScalar) -> RealScalar:
    return x - math.floor(x.mid)


def translate(x: TorusPoint | ExactTorusPoint, alpha: Sequence[Number], n: int, *,
              exact: bool = False) -> Any:
    """``x + n*alpha mod 1``.

    Float mode treats each ``alpha_i`` as an exact binary or interval value,
    reduces ``n*alpha_i`` exactly and adds it to ``x`` in float arithmetic. With
    ``exact=True`` the result is an :class:`ExactTorusPoint` whose coordinates
    are interval enclosures, so arbitrarily large ``n`` stays meaningful.
    """
    vec = as_vector(alpha)
    if len(vec) != x.dimension:
        raise ConfigError(f"alpha has {len(vec)} coordinates, point has {x.dimension}")
    if exact:
        base = x.coords if isinstance(x, ExactTorusPoint) else tuple(
            RealScalar.exact(c) for c in x.coords)
        return ExactTorusPoint(tuple(_frac(RealScalar.coerce(b) + a * n)
                                     for b, a in zip(base, vec)))
    if isinstance(x, ExactTorusPoint):
        x = x.to_float()
    shifts = []
    for a in vec:
        shift = _frac(a * n)
        if shift.radius > _OFFSET_RADIUS:
            raise PrecisionError(f"n*alpha is not resolved at precision {a.bits} bits (n={n})")
        shifts.append(float(shift.mid))
    return TorusPoint(tuple(c + s for c, s in zip(x.coords, shifts)))


def _fixed_point_step(a: RealScalar) -> int:
    m = a.mid
    return math.floor((m - math.floor(m)) * 2**64) & 0xFFFFFFFFFFFFFFFF


def orbit(x: TorusPoint, alpha: Sequence[Number], count: int, start: int = 0) -> np.ndarray:
    """Orbit points ``x + n*alpha`` for ``n = start, ..., start + count - 1``.

    Returns a ``(count, d)`` float array. The offset ``start*alpha`` is reduced in
    interval arithmetic; the increments use 64-bit fixed point, so the error is
    at most ``count * 2**-64`` beyond float rounding.
    """
    vec = as_vector(alpha)
    d = len(vec)
    if d != x.dimension:
        raise ConfigError(f"alpha has {d} coordinates, point has {x.dimension}")
    if count <= 0:
        return np.empty((0, d), dtype=np.float64)
    base = np.empty(d, dtype=np.float64)
    for i, a in enumerate(vec):
        shift = _frac(a * start)
        if shift.radius > _OFFSET_RADIUS:
            raise PrecisionError(f"start*alpha unresolved at precision {a.bits} bits")
        base[i] = float(shift.mid)
    steps = np.array([_fixed_point_step(a) for a in vec], dtype=np.uint64)
    j = np.arange(count, dtype=np.uint64)
    offsets = (j[:, None] * steps[None, :]).astype(np.float64) / _TWO64
    return np.mod(x.as_array()[None, :] + base[None, :] + offsets, 1.0)


def torus_distance(points: np.ndarray, center: np.ndarray) -> np.ndarray:
    """Sup-metric distance on the torus from each row of ``points`` to ``center``."""
    diff = np.abs(np.mod(points - center, 1.0))
    return np.minimum(diff, 1.0 - diff).max(axis=-1)


def ball_contains(ball: Ball, p: TorusPoint) -> bool:
    if ball.radius > 0.5:
        return True
    dist = torus_distance(p.as_array(), ball.center.as_array())
    return bool(dist < ball.radius)


def balls_to_rows(balls: Iterable[Ball]) -> list[list[Any]]:
    return [b.to_row(i) for i, b in enumerate(balls)]


# ---------------------------------------------------------------------------
# measure


def union_arcs_exact(centers: Sequence[float | Fraction],
                     radii: Sequence[float | Fraction]) -> Fraction:
    pieces: list[tuple[Fraction, Fraction]] = []
    for c, r in zip(centers, radii):
        if r <= 0:
            continue
        if r >= 0.5:
            return Fraction(1)
        fc = Fraction(c) % 1
        fr = Fraction(r)
        lo, hi = fc - fr, fc + fr
        if lo < 0:
            pieces += [(lo + 1, Fraction(1)), (Fraction(0), hi)]
        elif hi > 1:
            pieces += [(lo, Fraction(1)), (Fraction(0), hi - 1)]
        else:
            pieces.append((lo, hi))
    pieces.sort()
    total = Fraction(0)
    reach = Fraction(0)
    for lo, hi in pieces:
        if hi > reach:
            total += hi - max(lo, reach)
            reach = hi
    return min(total, Fraction(1))


def union_measure_1d(intervals: Sequence[tuple[float, float]] | np.ndarray, *,
                     exact: bool = False) -> MeasureEstimate:
    """Measure of a union of circle arcs given as ``(center, radius)`` pairs."""
    arr = np.asarray(intervals, dtype=np.float64).reshape(-1, 2)
    if exact:
        value = union_arcs_exact(arr[:, 0].tolist(), arr[:, 1].tolist())
        return MeasureEstimate(float(value), "exact", 0.0)
    centers = np.mod(arr[:, 0], 1.0)
    radii = arr[:, 1]
    if np.any(radii < 0):
        raise ConfigError("arc radii must be non-negative")
    if np.any(radii >= 0.5):
        return MeasureEstimate(1.0, "exact", 0.0)
    keep = radii > 0
    centers, radii = centers[keep], radii[keep]
    if centers.size == 0:
        return MeasureEstimate(0.0, "exact", 0.0)
    lo, hi = centers - radii, centers + radii
    wrap_low, wrap_high = lo < 0, hi > 1
    plain = ~(wrap_low | wrap_high)
    starts = np.concatenate([lo[plain], lo[wrap_low] + 1.0, np.zeros(wrap_low.sum()),
                             lo[wrap_high], np.zeros(wrap_high.sum())])
    ends = np.concatenate([hi[plain], np.ones(wrap_low.sum()), hi[wrap_low],
                           np.ones(wrap_high.sum()), hi[wrap_high] - 1.0])
    order = np.argsort(starts, kind="stable")
    starts, ends = starts[order], ends[order]
    reach = np.maximum.accumulate(ends)
    previous = np.concatenate(([0.0], reach[:-1]))
    added = np.maximum(0.0, ends - np.maximum(starts, previous))
    value = float(min(1.0, added.sum()))
    error = 4.0 * starts.size * np.finfo(np.float64).eps
    return MeasureEstimate(value, "exact", error)


def _axis_indices(c: float, r: float, m: int) -> np.ndarray:
    """Grid cells along one axis whose centres lie in the open arc ``(c-r, c+r)``."""
    if r <= 0:
        return np.empty(0, dtype=np.int64)
    if r > 0.5:
        return np.arange(m)
    first = math.floor(m * (c - r) - 0.5) + 1
    last = math.ceil(m * (c + r) - 0.5) - 1
    if last < first:
        return np.empty(0, dtype=np.int64)
    if last - first + 1 >= m:
        return np.arange(m)
    return np.mod(np.arange(first, last + 1), m)


def _grid_union(balls: Sequence[Ball], resolution: int, budget: int) -> MeasureEstimate:
    d = balls[0].dimension
    cells = resolution**d
    if cells > budget:
        raise BudgetError(f"grid of {resolution}^{d} cells exceeds budget {budget}")
    mask = np.zeros((resolution,) * d, dtype=bool)
    error = 0.0
    for ball in balls:
        if ball.radius <= 0:
            continue
        idx = [_axis_indices(c, ball.radius, resolution) for c in ball.center.coords]
        if all(i.size for i in idx):
            mask[np.ix_(*idx)] = True
        side = min(1.0, 2.0 * ball.radius)
        if side < 1.0:
            error += 2 * d * (side + 2.0 / resolution) ** (d - 1) / resolution
    return MeasureEstimate(float(mask.mean()), "grid", min(1.0, error),
                           resolution=resolution)


def _mc_chunk(balls: Sequence[Ball], seed: int, k: int, n: int) -> int:
    d = balls[0].dimension
    pts = child_rng(seed, "union-mc", k).random((n, d))
    inside = np.zeros(n, dtype=bool)
    for ball in balls:
        if ball.radius <= 0:
            continue
        if ball.radius > 0.5:
            return n
        inside |= torus_distance(pts, ball.center.as_array()) < ball.radius
    return int(inside.sum())


def _monte_carlo_union(balls: Sequence[Ball], samples: int, seed: int,
                       workers: int | None) -> MeasureEstimate:
    sizes = chunk_sizes(samples, CHUNK_SIZE)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            hits = list(pool.map(lambda kn: _mc_chunk(balls, seed, *kn), enumerate(sizes)))
    else:
        hits = [_mc_chunk(balls, seed, k, n) for k, n in enumerate(sizes)]
    p = sum(hits) / samples
    return MeasureEstimate(p, "monte-carlo", math.sqrt(p * (1.0 - p) / samples),
                           samples=samples, seed=seed)


def union_measure_md(balls: Sequence[Ball], method: str = "grid", *,
                     resolution: int = 512, samples: int = 100_000, seed: int | None = None,
                     budget: int | None = None, workers: int | None = None) -> MeasureEstimate:
    """Measure of a union of sup-metric balls in ``T^d``.

    ``method="grid"`` counts cell centres inside the union and reports a
    rigorous boundary error; ``method="monte-carlo"`` needs an explicit seed.
    """
    if not balls:
        return MeasureEstimate(0.0, "exact", 0.0)
    d = balls[0].dimension
    if any(b.dimension != d for b in balls):
        raise ConfigError("balls of mixed dimension")
    if method == "grid":
        if resolution < 1:
            raise ConfigError(f"grid resolution must be >= 1, got {resolution}")
        return _grid_union(balls, resolution, DEFAULT_BUDGETS.grid_cells if budget is None
                           else budget)
    if method == "monte-carlo":
        if samples < 1:
            raise ConfigError(f"sample count must be >= 1, got {samples}")
        if seed is None:
            raise ConfigError("monte-carlo measure needs an explicit seed")
        return _monte_carlo_union(balls, samples, seed, workers)
    raise ConfigError(f"unknown measure method {method!r}")


def disjointness_check(centers: Sequence[TorusPoint] | np.ndarray, radius: float) -> bool:
    """True iff all pairwise sup-metric distances exceed ``2 * radius``."""
    pts = np.asarray([c.coords for c in centers] if not isinstance(centers, np.ndarray)
                     else centers, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    n = pts.shape[0]
    if n < 2:
        return True
    if pts.shape[1] == 1:
        s = np.sort(np.mod(pts[:, 0], 1.0))
        gaps = np.diff(np.concatenate([s, [s[0] + 1.0]]))
        return bool(gaps.min() > 2.0 * radius)
    for i in range(n - 1):
        if torus_distance(pts[i + 1:], pts[i]).min() <= 2.0 * radius:
            return False
    return True


def min_pairwise_distance(points: np.ndarray) -> float:
    """Smallest sup-metric distance between two rows of ``points``."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    n = pts.shape[0]
    if n < 2:
        return math.inf
    if pts.shape[1] == 1:
        s = np.sort(np.mod(pts[:, 0], 1.0))
        return float(np.diff(np.concatenate([s, [s[0] + 1.0]])).min())
    return float(min(torus_distance(pts[i + 1:], pts[i]).min() for i in range(n - 1)))
