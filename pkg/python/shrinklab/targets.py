"""
Radius schedules, hit sets and Borel-Cantelli experiments for translations.

A :class:`RadiusSchedule` is piecewise constant over inclusive index blocks and
never materialised per index, so block boundaries may be astronomically large
integers. Radii are stored exactly as ``r**root``; for the constructions built
here ``root`` equals the dimension and block masses ``count * r**d`` are exact
rationals.

Two constructions live here: a schedule whose lim sup set is empty (translated
blocks pushed into pairwise disjoint strips) and a monotone schedule that fails
the Borel-Cantelli property for vectors with a fast approximation certificate.
"""

from __future__ import annotations

import bisect
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterator, Sequence

import numpy as np

from shrinklab.config import DEFAULT_BUDGETS, Budgets
from shrinklab.diophantine import (
    ApproxCertificate,
    Number,
    RealScalar,
    approximating_denominators,
    as_vector,
    dist_to_int,
    dist_to_lattice,
)
from shrinklab.errors import (
    BudgetError,
    CertificateError,
    ConfigError,
    VerificationError,
)
from shrinklab.seeding import CHUNK_SIZE, child_rng, chunk_sizes
from shrinklab.torus import (
    Ball,
    MeasureEstimate,
    TorusPoint,
    orbit,
    torus_distance,
    translate,
    union_arcs_exact,
    union_measure_1d,
    union_measure_md,
)

logger = logging.getLogger(__name__)

# Orbit indices per vectorised slab in hit scans.
_INDEX_SLAB = 256


def root_to_float(value: Fraction, root: int) -> float:
    """``value ** (1/root)`` as a float, without underflowing on tiny rationals."""
    if value <= 0:
        return 0.0
    log = (math.log(value.numerator) - math.log(value.denominator)) / root
    return math.exp(log)


@dataclass(frozen=True)
class ScheduleBlock:
    """Indices ``start..end`` (inclusive) share the radius ``radius_pow ** (1/root)``."""

    start: int
    end: int
    radius_pow: Fraction

    @property
    def count(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class RadiusSchedule:
    """Piecewise-constant radii over increasing, non-overlapping index blocks.

    Indices outside every block have radius 0.
    """

    blocks: tuple[ScheduleBlock, ...]
    dimension: int
    root: int = 1
    _starts: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.dimension < 1 or self.root < 1:
            raise ConfigError("schedule dimension and root must be >= 1")
        previous_end = -1
        for b in self.blocks:
            if b.start < 0 or b.end < b.start:
                raise ConfigError(f"invalid block [{b.start}, {b.end}]")
            if b.start <= previous_end:
                raise ConfigError(f"block starting at {b.start} overlaps its predecessor")
            if b.radius_pow < 0:
                raise ConfigError("block radius must be non-negative")
            previous_end = b.end
        object.__setattr__(self, "_starts", tuple(b.start for b in self.blocks))

    # builders -------------------------------------------------------------

    @classmethod
    def empty(cls, dimension: int) -> "RadiusSchedule":
        return cls((), dimension, dimension)

    @classmethod
    def constant(cls, radius: Number, start: int, end: int,
                 dimension: int) -> "RadiusSchedule":
        return cls((ScheduleBlock(start, end, Fraction(radius)),), dimension, 1)

    @classmethod
    def from_function(cls, radius: Callable[[int], Number], count: int, dimension: int, *,
                      start: int = 0, root: int = 1) -> "RadiusSchedule":
        """Singleton blocks ``start .. start+count-1`` with ``radius(l)`` each."""
        blocks = tuple(
            ScheduleBlock(l, l, Fraction(radius(l)) ** root) for l in range(start, start + count)
        )
        return cls(blocks, dimension, root)

    # lookups --------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.blocks)

    def radius(self, block: ScheduleBlock) -> float:
        return root_to_float(block.radius_pow, self.root)

    def block_index(self, n: int) -> int | None:
        i = bisect.bisect_right(self._starts, n) - 1
        if i >= 0 and self.blocks[i].end >= n:
            return i
        return None

    def radius_pow_at(self, n: int) -> Fraction:
        i = self.block_index(n)
        return Fraction(0) if i is None else self.blocks[i].radius_pow

    def radius_at(self, n: int) -> float:
        return root_to_float(self.radius_pow_at(n), self.root)

    def radii_array(self, horizon: int) -> np.ndarray:
        """Float radii for indices ``0 .. horizon-1``."""
        radii = np.zeros(horizon, dtype=np.float64)
        for block, lo, hi in self.active(0, horizon - 1):
            radii[lo:hi + 1] = self.radius(block)
        return radii

    def active(self, lo: int, hi: int) -> Iterator[tuple[ScheduleBlock, int, int]]:
        """Blocks intersecting ``[lo, hi]`` with the clipped index range."""
        first = max(0, bisect.bisect_right(self._starts, lo) - 1)
        for block in self.blocks[first:]:
            if block.start > hi:
                break
            s, e = max(block.start, lo), min(block.end, hi)
            if s <= e:
                yield block, s, e

    @property
    def monotone(self) -> bool:
        """Contiguous blocks with non-increasing radii (leading zero indices allowed)."""
        for a, b in zip(self.blocks, self.blocks[1:]):
            if b.start != a.end + 1 or b.radius_pow > a.radius_pow:
                return False
        return True

    # masses ---------------------------------------------------------------

    def block_mass(self, i: int) -> Fraction | None:
        """Exact ``count * r**d`` for block ``i`` when ``root`` divides ``d``."""
        block = self.blocks[i]
        if self.dimension % self.root:
            return None
        return block.count * block.radius_pow ** (self.dimension // self.root)

    def block_mass_float(self, i: int) -> float:
        block = self.blocks[i]
        return block.count * self.radius(block) ** self.dimension

    def mass_at_least(self, i: int, threshold: Fraction) -> bool:
        """Exact test of ``count * r**d >= threshold``."""
        block = self.blocks[i]
        lhs = Fraction(block.count) ** self.root * block.radius_pow ** self.dimension
        return lhs >= Fraction(threshold) ** self.root

    def partial_sum(self, up_to: int | None = None) -> Fraction | float:
        """Sum of ``r_n**d`` over indices ``n <= up_to`` (all blocks by default)."""
        exact = self.dimension % self.root == 0
        total: Any = Fraction(0) if exact else 0.0
        hi = self.blocks[-1].end if up_to is None and self.blocks else (up_to or 0)
        for block, s, e in self.active(0, hi):
            count = e - s + 1
            if exact:
                total += count * block.radius_pow ** (self.dimension // self.root)
            else:
                total += count * self.radius(block) ** self.dimension
        return total

    def divergence_report(self) -> list[dict[str, Any]]:
        """Per-block mass and running total."""
        rows = []
        running: Any = Fraction(0) if self.dimension % self.root == 0 else 0.0
        for i, block in enumerate(self.blocks):
            mass = self.block_mass(i)
            running += mass if mass is not None else self.block_mass_float(i)
            rows.append({"block": i, "start": block.start, "end": block.end,
                         "mass": mass if mass is not None else self.block_mass_float(i),
                         "cumulative": running})
        return rows

    # serialisation --------------------------------------------------------

    def to_json(self) -> dict[str, Any]:
        return {
            "d": self.dimension,
            "root": self.root,
            "monotone": self.monotone,
            "blocks": [
                {"start": str(b.start), "end": str(b.end), "radius": repr(self.radius(b)),
                 "radius_pow": str(b.radius_pow)}
                for b in self.blocks
            ],
        }

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "RadiusSchedule":
        try:
            d = int(doc["d"])
            root = int(doc.get("root", 1))
            blocks = []
            for b in doc["blocks"]:
                if "radius_pow" in b:
                    rp = Fraction(b["radius_pow"])
                else:
                    rp = Fraction(b["radius"]) ** root
                blocks.append(ScheduleBlock(int(b["start"]), int(b["end"]), rp))
            return cls(tuple(blocks), d, root)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed schedule document: {exc}") from exc


@dataclass(frozen=True)
class TargetSequence:
    """Balls ``B(center, r_n)`` with radii from a schedule."""

    center: TorusPoint
    schedule: RadiusSchedule

    def __post_init__(self) -> None:
        if self.center.dimension != self.schedule.dimension:
            raise ConfigError("target center and schedule differ in dimension")

    def ball(self, n: int) -> Ball:
        return Ball(self.center, self.schedule.radius_at(n))


@dataclass(frozen=True)
class HitReport:
    """Indices ``n < horizon`` with ``x + n*alpha`` inside the ``n``-th target."""

    sample: TorusPoint
    hits: tuple[int, ...]
    horizon: int
    block_counts: tuple[tuple[int, int], ...]
    truncated: bool = False

    def rows(self, sample_id: int = 0) -> list[list[Any]]:
        return [[sample_id, n, *self.sample.coords] for n in self.hits]


def _hits_exact(vec: Sequence[RealScalar], target: TargetSequence, x: TorusPoint,
                block: Any, lo: int, hi: int) -> list[int]:
    found = []
    center = [RealScalar.exact(c) for c in target.center.coords]
    for n in range(lo, hi + 1):
        p = translate(x, vec, n, exact=True)
        dist = dist_to_lattice([a - c for a, c in zip(p.coords, center)])
        if (dist ** target.schedule.root).lt(block.radius_pow):
            found.append(n)
    return found


def hit_set(alpha: Sequence[Number], target: TargetSequence, x: TorusPoint, horizon: int, *,
            exact: bool = False, max_hits: int | None = None,
            budgets: Budgets = DEFAULT_BUDGETS) -> HitReport:
    """All ``n < horizon`` with ``x + n*alpha`` in ``B(x_0, r_n)``, streamed block by block.

    ``exact`` decides every membership by interval arithmetic on ``n*alpha``.
    """
    vec = as_vector(alpha)
    schedule = target.schedule
    live = [(b, s, e) for b, s, e in schedule.active(0, horizon - 1) if b.radius_pow > 0]
    scanned = sum(e - s + 1 for _, s, e in live)
    limit = budgets.exact_indices if exact else budgets.orbit_indices
    if scanned > limit:
        raise BudgetError(f"hit scan over {scanned} indices exceeds budget {limit}")
    center = target.center.as_array()
    hits: list[int] = []
    counts: list[tuple[int, int]] = []
    truncated = False
    for block, s, e in live:
        if exact:
            found = _hits_exact(vec, target, x, block, s, e)
        else:
            r = schedule.radius(block)
            found = []
            for start in range(s, e + 1, CHUNK_SIZE):
                count = min(CHUNK_SIZE, e + 1 - start)
                if r > 0.5:
                    found.extend(range(start, start + count))
                    continue
                pts = orbit(x, vec, count, start)
                inside = np.nonzero(torus_distance(pts, center) < r)[0]
                found.extend(start + int(i) for i in inside)
        counts.append((block.start, len(found)))
        hits.extend(found)
        if max_hits is not None and len(hits) >= max_hits:
            hits, truncated = hits[:max_hits], True
            break
    logger.debug("hit_set: horizon=%d scanned=%d hits=%d", horizon, scanned, len(hits))
    return HitReport(x, tuple(hits), horizon, tuple(counts), truncated)


@dataclass(frozen=True)
class MonteCarloResult:
    """Fraction of sampled points with at least ``min_hits`` hits."""

    fraction: float
    error: float
    samples: int
    seed: int
    min_hits: int
    horizon: int
    window: tuple[int, int] | None = None

    def to_dict(self) -> dict[str, Any]:
        return {"fraction": self.fraction, "error": self.error, "samples": self.samples,
                "seed": self.seed, "min_hits": self.min_hits, "horizon": self.horizon,
                "window": list(self.window) if self.window else None}


def _count_hits(points: np.ndarray, slabs: Sequence[tuple[np.ndarray, float]],
                center: np.ndarray) -> np.ndarray:
    counts = np.zeros(points.shape[0], dtype=np.int64)
    for offsets, r in slabs:
        if r > 0.5:
            counts += offsets.shape[0]
            continue
        moved = points[:, None, :] + offsets[None, :, :]
        counts += (torus_distance(moved, center) < r).sum(axis=1)
    return counts


def bc_monte_carlo(alpha: Sequence[Number], target: TargetSequence, horizon: int,
                   samples: int, seed: int, *, min_hits: int = 1,
                   window: tuple[int, int] | None = None, workers: int | None = None,
                   budgets: Budgets = DEFAULT_BUDGETS) -> MonteCarloResult:
    """Estimate the measure of points with at least ``min_hits`` hits before ``horizon``.

    With ``window=(start, end)`` only indices in that inclusive range count.
    Samples are drawn in fixed chunks from ``child_rng(seed, "bc-samples", k)``.
    """
    if samples < 1:
        raise ConfigError(f"sample count must be >= 1, got {samples}")
    vec = as_vector(alpha)
    d = len(vec)
    lo, hi = 0, horizon - 1
    if window is not None:
        lo, hi = max(lo, window[0]), min(hi, window[1])
    schedule = target.schedule
    live = [(b, s, e) for b, s, e in schedule.active(lo, hi) if b.radius_pow > 0]
    indices = sum(e - s + 1 for _, s, e in live)
    if indices > budgets.orbit_indices:
        raise BudgetError(f"Monte-Carlo scan over {indices} indices exceeds budget")
    origin = TorusPoint.origin(d)
    slabs = []
    for block, s, e in live:
        r = schedule.radius(block)
        for start in range(s, e + 1, _INDEX_SLAB):
            slabs.append((orbit(origin, vec, min(_INDEX_SLAB, e + 1 - start), start), r))
    center = target.center.as_array()

    def run_chunk(k: int, n: int) -> int:
        pts = child_rng(seed, "bc-samples", k).random((n, d))
        return int((_count_hits(pts, slabs, center) >= min_hits).sum())

    sizes = chunk_sizes(samples)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            good = list(pool.map(run_chunk, range(len(sizes)), sizes))
    else:
        good = [run_chunk(k, n) for k, n in enumerate(sizes)]
    p = sum(good) / samples
    return MonteCarloResult(p, math.sqrt(p * (1.0 - p) / samples), samples, seed, min_hits,
                            horizon, window)


# ---------------------------------------------------------------------------
# schedule with empty lim sup


@dataclass(frozen=True)
class ActiveIndex:
    """Index ``n = q_l + k_p`` of block ``p`` carrying radius ``l**(-1/d)``."""

    p: int
    level: int
    q: int
    n: int
    radius_pow: Fraction


@dataclass(frozen=True)
class EmptyLimsupCertificate:
    """Shifts, denominators and strips behind an empty-lim-sup schedule."""

    dimension: int
    alpha1: RealScalar
    shifts: tuple[int, ...]
    entries: tuple[ActiveIndex, ...]
    block_starts: tuple[int, ...]
    strip_radii: tuple[Fraction, ...]

    @property
    def p_max(self) -> int:
        return max(0, len(self.block_starts) - 1)

    @property
    def regime(self) -> str:
        """``faithful`` when every block carries all levels ``5**(dp) .. 5**(d(p+1))``."""
        d = self.dimension
        for p in range(1, self.p_max + 1):
            levels = sum(1 for e in self.entries if e.p == p)
            if levels != 5 ** (d * (p + 1)) - 5 ** (d * p) + 1:
                return "simulable"
        return "faithful"

    def schedule(self) -> RadiusSchedule:
        ordered = sorted(self.entries, key=lambda e: e.n)
        for a, b in zip(ordered, ordered[1:]):
            if a.n == b.n:
                raise ConfigError(f"index {a.n} is assigned twice")
        blocks = tuple(ScheduleBlock(e.n, e.n, e.radius_pow) for e in ordered)
        return RadiusSchedule(blocks, self.dimension, self.dimension)

    def to_json(self) -> dict[str, Any]:
        return {
            "d": self.dimension,
            "alpha1": {"lower": str(self.alpha1.lower), "upper": str(self.alpha1.upper),
                       "digits": self.alpha1.to_digits(40)},
            "shifts": [str(k) for k in self.shifts],
            "block_starts": [str(v) for v in self.block_starts],
            "strip_radii": [str(s) for s in self.strip_radii],
            "entries": [{"p": e.p, "l": e.level, "q": str(e.q), "n": str(e.n),
                         "radius_pow": str(e.radius_pow)} for e in self.entries],
        }


def _greedy_shifts(alpha1: RealScalar, count: int, max_tries: int = 10**6) -> list[int]:
    shifts = [0]
    strips = [Fraction(1, 4)]
    for p in range(2, count + 1):
        strip = Fraction(1, 4**p)
        k = shifts[-1] + 1
        tries = 0
        while True:
            dists = [dist_to_int(alpha1 * (k - kj)) for kj in shifts]
            if all(dist.lower > strip + sj for dist, sj in zip(dists, strips)):
                break
            k += 1
            tries += 1
            if tries > max_tries:
                raise BudgetError(f"no disjoint strip found for p={p} within {max_tries} shifts")
        shifts.append(k)
        strips.append(strip)
    return shifts


def empty_limsup_schedule(alpha: Sequence[Number], p_max: int, *, max_levels: int | None = None
                          ) -> tuple[RadiusSchedule, EmptyLimsupCertificate]:
    """Schedule ``r_n = l**(-1/d)`` at ``n = q_l + k_p``, ``l`` in ``[5**(dp), 5**(d(p+1))]``.

    Shifts ``k_p`` are chosen greedily so the strips ``-k_p alpha_1 +/- 4**-p`` are
    pairwise disjoint; ``q_l`` are continued-fraction denominators of ``alpha_1``
    with ``‖q_l alpha_1‖ <= e**-l``. Every other index has radius 0.

    ``max_levels`` keeps only the first levels of every block; the certificate
    then reports the simulable regime.
    """
    vec = as_vector(alpha)
    d = len(vec)
    alpha1 = vec[0]
    if p_max < 0:
        raise ConfigError(f"p_max must be >= 0, got {p_max}")
    if max_levels is not None and max_levels < 1:
        raise ConfigError(f"max_levels must be >= 1, got {max_levels}")
    if p_max == 0:
        cert = EmptyLimsupCertificate(d, alpha1, (), (), (), ())
        return RadiusSchedule.empty(d), cert
    denominators = approximating_denominators(alpha1, 5**d, 5 ** (d * (p_max + 1)))
    shifts = _greedy_shifts(alpha1, p_max + 1)
    entries = []
    for p in range(1, p_max + 1):
        levels = range(5 ** (d * p), 5 ** (d * (p + 1)) + 1)
        for level in levels if max_levels is None else levels[:max_levels]:
            q = denominators[level]
            entries.append(ActiveIndex(p, level, q, q + shifts[p - 1], Fraction(1, level)))
    starts = tuple(denominators[5 ** (d * p)] + shifts[p - 1] for p in range(1, p_max + 2))
    cert = EmptyLimsupCertificate(
        dimension=d,
        alpha1=alpha1,
        shifts=tuple(shifts),
        entries=tuple(entries),
        block_starts=starts,
        strip_radii=tuple(Fraction(1, 4**p) for p in range(1, p_max + 2)),
    )
    logger.info("empty-limsup schedule: d=%d p_max=%d, %d active indices", d, p_max,
                len(entries))
    return cert.schedule(), cert


# Target centres at which the strip geometry is re-measured.
TRANSLATION_CENTERS = (Fraction(0), Fraction(1, 3), Fraction(1, 2), Fraction(5, 7))


def strips_disjoint_at(cert: EmptyLimsupCertificate, center: Fraction | float,
                       p_max: int | None = None) -> bool:
    """Whether the strips ``center - k_p alpha_1 +/- s_p`` of blocks ``p <= p_max`` are
    pairwise disjoint, measured as exact arcs around the midpoint of ``alpha_1``."""
    top = cert.p_max if p_max is None else p_max
    a1 = cert.alpha1.mid
    x0 = Fraction(center)
    centers = [x0 - k * a1 for k in cert.shifts[:top]]
    radii = cert.strip_radii[:top]
    return union_arcs_exact(centers, radii) == 2 * sum(radii, Fraction(0))


@dataclass(frozen=True)
class EmptyLimsupReport:
    regime: str
    blocks: tuple[dict[str, Any], ...]
    translation_invariant: bool
    conclusion: str


def verify_empty_limsup(cert: EmptyLimsupCertificate, p_max: int | None = None, *,
                        centers: Sequence[Fraction | float] = TRANSLATION_CENTERS
                        ) -> EmptyLimsupReport:
    """Re-check the inequalities behind the empty lim sup for blocks ``p <= p_max``.

    Raises :class:`VerificationError` naming the failed check: ``a`` (orbit
    closeness), ``b`` (radius size), ``c`` (strip containment), ``d`` (strip
    disjointness) or ``index`` (an entry outside its block). The strips are
    then re-measured around every target centre in ``centers``.
    """
    top = cert.p_max if p_max is None else p_max
    if top > cert.p_max:
        raise ConfigError(f"certificate covers p <= {cert.p_max}, asked for {top}")
    d = cert.dimension
    a1 = cert.alpha1
    rows = []
    for p in range(1, top + 1):
        gate = RealScalar.exp_neg(5 ** (d * p), a1.bits)
        k_p = cert.shifts[p - 1]
        strip = cert.strip_radii[p - 1]
        if not (gate + Fraction(1, 5**p)).le(strip):
            raise VerificationError("c", f"e^-5^(dp) + 5^-p exceeds strip radius {strip} (p={p})")
        entries = [e for e in cert.entries if e.p == p]
        v_lo, v_hi = cert.block_starts[p - 1], cert.block_starts[p] - 1
        for e in entries:
            if not v_lo <= e.n <= v_hi:
                raise VerificationError("index", f"n={e.n} outside block {p} [{v_lo}, {v_hi}]")
            if not dist_to_int(a1 * (e.n - k_p)).le(gate):
                raise VerificationError("a", f"‖(n - k_p) alpha_1‖ > e^-5^(dp) at n={e.n}")
            if e.radius_pow != Fraction(1, e.level) or e.radius_pow > Fraction(1, 5 ** (d * p)):
                raise VerificationError("b", f"radius at n={e.n} exceeds 5^-p")
        rows.append({"p": p, "start": v_lo, "end": v_hi, "active": len(entries),
                     "strip": strip, "shift": k_p})
    for p in range(1, top + 1):
        for j in range(p + 1, top + 1):
            dist = dist_to_int(a1 * (cert.shifts[p - 1] - cert.shifts[j - 1]))
            if not dist.gt(cert.strip_radii[p - 1] + cert.strip_radii[j - 1]):
                raise VerificationError("d", f"strips of blocks {p} and {j} intersect")
    conclusion = (f"strips of blocks 1..{top} are pairwise disjoint: no point hits targets "
                  f"in two verified blocks")
    invariant = all(strips_disjoint_at(cert, c, top) for c in centers)
    if not invariant:
        logger.warning("strip disjointness depends on the target centre")
    logger.info("empty-limsup certificate verified for p <= %d (%s)", top, cert.regime)
    return EmptyLimsupReport(cert.regime, tuple(rows), invariant, conclusion)


# ---------------------------------------------------------------------------
# monotone schedule that is not Borel-Cantelli


def non_bc_schedule(cert: ApproxCertificate, n_max: int | None = None, *,
                    block_exponent: int | None = None,
                    regime: str = "faithful") -> RadiusSchedule:
    """Blocks ``[U_(n-1), U_n - 1]`` with ``U_n = n**s Q_n`` and ``R_n**d = 1/(n**s Q_n)``.

    ``s`` defaults to ``2d``; ``U_0 = 1``. Each block mass is checked to lie in
    ``[1/2, 1]``.
    """
    d = cert.dimension
    n_max = len(cert) if n_max is None else n_max
    s = 2 * d if block_exponent is None else block_exponent
    if regime == "faithful" and cert.tag != "eq3":
        raise CertificateError(f"faithful non-BC schedule needs an eq3 certificate, got "
                               f"{cert.tag!r}")
    if not 1 <= n_max <= len(cert):
        raise CertificateError(f"n_max={n_max} outside certificate length {len(cert)}")
    if s < 1:
        raise ConfigError(f"block exponent must be >= 1, got {s}")
    blocks = []
    u_prev = 1
    for n in range(1, n_max + 1):
        u = n**s * cert.denominator(n)
        radius_pow = Fraction(1, u)
        mass = (u - u_prev) * radius_pow
        if not Fraction(1, 2) <= mass <= 1:
            raise CertificateError(f"block {n} has mass {mass} outside [1/2, 1]")
        blocks.append(ScheduleBlock(u_prev, u - 1, radius_pow))
        u_prev = u
    return RadiusSchedule(tuple(blocks), d, d)


@dataclass(frozen=True)
class NonBCBlock:
    n: int
    q: int
    start: int
    end: int
    radius: float
    mass: Fraction
    containment: bool
    measure: MeasureEstimate | None
    measure_bound: Fraction
    constant: float | None = None


@dataclass(frozen=True)
class NonBCReport:
    regime: str
    block_exponent: int
    blocks: tuple[NonBCBlock, ...]
    constant: float
    tail_constant: float

    @property
    def measures_decreasing(self) -> bool:
        values = [b.measure.value for b in self.blocks if b.measure is not None and b.n >= 2]
        return all(b < a for a, b in zip(values, values[1:]))


def verify_non_bc(alpha: Sequence[Number], cert: ApproxCertificate, schedule: RadiusSchedule,
                  n_max: int | None = None, *, regime: str = "faithful",
                  block_exponent: int | None = None, center: TorusPoint | None = None,
                  resolution: int = 1024, budgets: Budgets = DEFAULT_BUDGETS) -> NonBCReport:
    """Check the measure bounds that make a non-BC schedule fail Borel-Cantelli.

    For each block ``n`` this verifies the containment of the block's preimages
    in ``Q_n`` balls of radius ``2 R_n``, measures (or bounds) that union against
    ``4**d / n**s`` and checks the tail ``sum_(k>=n) C/k**s <= C s/(s-1) / n**(s-1)``.
    """
    vec = as_vector(alpha)
    d = cert.dimension
    s = 2 * d if block_exponent is None else block_exponent
    n_max = len(schedule) if n_max is None else n_max
    if n_max > len(schedule):
        raise ConfigError(f"schedule has {len(schedule)} blocks, asked for {n_max}")
    if s < 2:
        raise ConfigError("tail check needs block exponent >= 2")
    cert.verify(vec)
    x0 = TorusPoint.origin(d) if center is None else center
    metric = Fraction(4**d)
    rows = []
    for n in range(1, n_max + 1):
        q, b = cert.denominator(n), cert.bound(n)
        block = schedule.blocks[n - 1]
        if block.radius_pow != Fraction(1, n**s * q):
            raise VerificationError("schedule", f"block {n} radius does not match n^s Q_n")
        if (n**s * b) ** d * n**s * q > 1:
            raise VerificationError("containment", f"n^s b_n exceeds R_n at n={n}")
        if regime == "faithful" and (n ** (2 * d) * b) ** d * n ** (3 * d) * q > 1:
            raise VerificationError("containment", f"‖k Q_n alpha‖ > 1/(n^3 Q_n^(1/d)) at n={n}")
        spot = dist_to_lattice([a * (n**s * q) for a in vec])
        if not (spot**d).le(block.radius_pow):
            raise VerificationError("containment", f"‖n^s Q_n alpha‖ exceeds R_n at n={n}")
        bound = metric / n**s
        measure = None
        if regime == "simulable" and q <= budgets.arcs:
            r2 = 2.0 * schedule.radius(block)
            centers = orbit(x0, [-a for a in vec], q)
            if d == 1:
                measure = union_measure_1d(np.column_stack([centers[:, 0], np.full(q, r2)]))
            else:
                balls = [Ball(TorusPoint(tuple(c)), r2) for c in centers]
                measure = union_measure_md(balls, "grid", resolution=resolution,
                                           budget=budgets.grid_cells)
            if measure.value - measure.error > float(bound) * (1 + 1e-12):
                raise VerificationError("measure", f"union measure {measure.value} exceeds "
                                        f"{float(bound)} at n={n}")
        mass = schedule.block_mass(n - 1)
        rows.append(NonBCBlock(
            n, q, block.start, block.end, schedule.radius(block),
            mass if mass is not None else Fraction(0), True, measure, bound,
            None if measure is None else measure.value * n**s,
        ))
    measured = [r.constant for r in rows if r.constant is not None]
    constant = max(measured) if measured else float(metric)
    tail_constant = constant * s / (s - 1)
    for n in range(1, n_max + 1):
        tail = sum((metric / k**s for k in range(n, n_max + 1)), Fraction(0))
        if tail > metric * s / (s - 1) / n ** (s - 1):
            raise VerificationError("tail", f"tail sum from n={n} exceeds C'/n^(s-1)")
    logger.info("non-BC verification (%s): %d blocks, C=%.4g", regime, len(rows), constant)
    return NonBCReport(regime, s, tuple(rows), constant, tail_constant)
