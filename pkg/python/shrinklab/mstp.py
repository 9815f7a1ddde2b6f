"""
Monotone shrinking targets for constant-type translations.

The positive direction rests on three executable pieces: the disjointness
constant ``epsilon(alpha)`` of the backward orbit, a covering lemma that is
checked instance by instance, and the doubling-horizon lower bound on the
measure of the union of preimages.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Mapping, Sequence

import numpy as np

from shrinklab.config import DEFAULT_BUDGETS, Budgets
from shrinklab.diophantine import LatticeScan, Number, as_vector, check_search_budget
from shrinklab.errors import (
    EpsilonZeroError,
    FalsificationError,
    HypothesisError,
    NonMonotoneError,
    ResolutionError,
)
from shrinklab.seeding import child_rng
from shrinklab.targets import RadiusSchedule
from shrinklab.torus import (
    Ball,
    MeasureEstimate,
    TorusPoint,
    min_pairwise_distance,
    orbit,
    union_arcs_exact,
    union_measure_1d,
    union_measure_md,
)

logger = logging.getLogger(__name__)

# Relative shrink applied to epsilon so float disjointness checks stay strict.
EPSILON_SHRINK = 1e-9

# Campaign share of undecided instances above which a warning is logged.
UNDECIDED_WARNING_SHARE = 0.25

DEFAULT_RESOLUTION = 256


def unit_ball_volume(d: int) -> int:
    """Measure of the sup-metric ball of radius 1, ``2**d``."""
    return 2**d


def ball_measure(radius: float, d: int) -> float:
    return min(1.0, 2.0 * radius) ** d


@dataclass(frozen=True)
class EpsilonEstimate:
    """``epsilon(alpha)`` at a finite horizon and the pair ``(Q, l)`` realising it."""

    value: float
    q: int
    l: int
    horizon: int
    minimum: float

    def to_dict(self) -> dict[str, Any]:
        return {"epsilon": self.value, "Q": self.q, "l": self.l, "horizon": self.horizon,
                "min_scaled": self.minimum}


def epsilon_alpha(alpha: Number | Sequence[Number], q_max: int, *,
                  budget_bits: int | None = None) -> EpsilonEstimate:
    """``(1/2) min_(Q <= q_max) Q**(1/d) min_(1 <= l <= 2Q-1) ‖l alpha‖_Z``.

    Sup-metric balls of radius ``rho`` around ``x - l alpha`` for ``l < 2Q`` are
    pairwise disjoint iff ``‖l alpha‖_Z > 2 rho`` for ``1 <= l <= 2Q-1``, so the
    value makes the balls of radius ``epsilon / Q**(1/d)`` disjoint for every
    ``Q <= q_max``. The result is shrunk by a relative ``EPSILON_SHRINK``.
    """
    vec = as_vector(alpha)
    d = len(vec)
    check_search_budget(d, 2 * q_max, budget_bits)
    scan = LatticeScan(vec)
    D = scan.denominator
    low = D
    low_l = 0
    l = 0
    best, best_q, best_l = math.inf, 0, 0
    for q in range(1, q_max + 1):
        while l < 2 * q - 1:
            l += 1
            lower = max(0, scan.numerator(l) - scan.error(l))
            if lower < low:
                low, low_l = lower, l
        scaled = q ** (1.0 / d) * (low / D)
        if scaled < best:
            best, best_q, best_l = scaled, q, low_l
    value = 0.5 * best * (1.0 - EPSILON_SHRINK)
    logger.debug("epsilon_alpha: Q_max=%d epsilon=%.6g at Q=%d l=%d", q_max, value,
                 best_q, best_l)
    return EpsilonEstimate(value, best_q, best_l, q_max, best)


# ---------------------------------------------------------------------------
# covering lemma


@dataclass(frozen=True)
class CoveringInstance:
    """``2Q`` points with non-increasing radii; the balls ``B(y_l, eps/Q**(1/d))`` are disjoint."""

    q: int
    epsilon: float
    points: np.ndarray
    radii: tuple[float, ...]

    @property
    def dimension(self) -> int:
        return int(self.points.shape[1])

    @property
    def separation_radius(self) -> float:
        return self.epsilon / self.q ** (1.0 / self.dimension)

    def validate(self) -> None:
        if self.q < 4:
            raise HypothesisError(f"covering lemma needs Q >= 4, got {self.q}")
        if self.epsilon <= 0:
            raise HypothesisError(f"epsilon must be positive, got {self.epsilon}")
        if self.points.ndim != 2 or self.points.shape[0] != 2 * self.q:
            raise HypothesisError(f"expected {2 * self.q} points, got {self.points.shape}")
        if len(self.radii) != 2 * self.q:
            raise HypothesisError(f"expected {2 * self.q} radii, got {len(self.radii)}")
        if any(r < 0 for r in self.radii):
            raise HypothesisError("radii must be non-negative")
        if any(b > a for a, b in zip(self.radii, self.radii[1:])):
            raise HypothesisError("radii must be non-increasing")
        if min_pairwise_distance(self.points) <= 2.0 * self.separation_radius:
            raise HypothesisError("balls B(y_l, eps/Q^(1/d)) are not pairwise disjoint")

    def to_json(self) -> dict[str, Any]:
        return {"Q": self.q, "epsilon": repr(self.epsilon), "d": self.dimension,
                "points": [[repr(float(c)) for c in row] for row in self.points],
                "radii": [repr(r) for r in self.radii]}

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "CoveringInstance":
        points = np.array([[float(c) for c in row] for row in doc["points"]], dtype=np.float64)
        return cls(int(doc["Q"]), float(doc["epsilon"]), points,
                   tuple(float(r) for r in doc["radii"]))


@dataclass(frozen=True)
class LemmaVerdict:
    """Measured quantities of one covering-lemma check and the alternatives that hold."""

    union_first: float
    union_all: float
    threshold: float
    gain: float
    error_first: float
    error_all: float
    holds_i: bool | None
    holds_ii: bool | None
    method: str
    resolution: int | None = None

    @property
    def margin_i(self) -> float:
        return self.union_first - self.threshold

    @property
    def margin_ii(self) -> float:
        return self.union_all - self.union_first - self.gain

    @property
    def alternative(self) -> str:
        if self.holds_i and self.holds_ii:
            return "both"
        if self.holds_i:
            return "i"
        if self.holds_ii:
            return "ii"
        if self.holds_i is None or self.holds_ii is None:
            return "undecided"
        return "none"

    @property
    def falsified(self) -> bool:
        return self.alternative == "none"

    def to_dict(self) -> dict[str, Any]:
        return {"alternative": self.alternative, "union_first": self.union_first,
                "union_all": self.union_all, "threshold": self.threshold, "gain": self.gain,
                "margin_i": self.margin_i, "margin_ii": self.margin_ii,
                "error_first": self.error_first, "error_all": self.error_all,
                "method": self.method, "resolution": self.resolution}


def _decide(margin: float, error: float, factor: float = 1.0) -> bool | None:
    if error == 0.0 or abs(margin) > factor * error:
        return margin >= 0
    return None


def _arcs(points: np.ndarray, radii: Sequence[float]) -> np.ndarray:
    return np.column_stack([points[:, 0], np.asarray(radii, dtype=np.float64)])


def _lemma_1d(inst: CoveringInstance, threshold: float, gain: float) -> LemmaVerdict:
    q = inst.q
    first = union_measure_1d(_arcs(inst.points[:q], inst.radii[:q]))
    full = union_measure_1d(_arcs(inst.points, inst.radii))
    holds_i = _decide(first.value - threshold, first.error)
    holds_ii = _decide(full.value - first.value - gain, first.error + full.error)
    if holds_i is None or holds_ii is None:
        # Margins within float rounding: decide with exact rational unions.
        f1 = union_arcs_exact(inst.points[:q, 0].tolist(), inst.radii[:q])
        f2 = union_arcs_exact(inst.points[:, 0].tolist(), inst.radii)
        t = 2 * Fraction(inst.epsilon) / 10
        g = Fraction(q, 2) * min(Fraction(1), 2 * Fraction(inst.radii[-1]))
        return LemmaVerdict(float(f1), float(f2), threshold, gain, 0.0, 0.0,
                            f1 >= t, f2 - f1 >= g, "exact")
    return LemmaVerdict(first.value, full.value, threshold, gain, first.error, full.error,
                        holds_i, holds_ii, "exact")


def covering_lemma_check(inst: CoveringInstance, *, resolution: int = DEFAULT_RESOLUTION,
                         budgets: Budgets = DEFAULT_BUDGETS) -> LemmaVerdict:
    """Decide which alternative of the covering lemma holds for ``inst``.

    Alternative (i): the first ``Q`` balls cover at least ``2**d (eps/10)**d``.
    Alternative (ii): all ``2Q`` balls cover at least ``(Q/2) mu(B(y_0, r_(2Q-1)))``
    more than the first ``Q``. In dimension 1 the unions are exact; otherwise the
    grid doubles until each margin exceeds three grid errors or the budget is
    spent. A proven alternative is reported even if the other stays undecided.
    """
    inst.validate()
    d = inst.dimension
    threshold = unit_ball_volume(d) * (inst.epsilon / 10.0) ** d
    gain = inst.q / 2.0 * ball_measure(inst.radii[-1], d)
    if d == 1:
        return _lemma_1d(inst, threshold, gain)
    q = inst.q
    balls = [Ball(TorusPoint(tuple(p)), r) for p, r in zip(inst.points, inst.radii)]
    m = resolution
    last: LemmaVerdict | None = None
    while m**d <= budgets.grid_cells:
        first = union_measure_md(balls[:q], "grid", resolution=m, budget=budgets.grid_cells)
        full = union_measure_md(balls, "grid", resolution=m, budget=budgets.grid_cells)
        holds_i = _decide(first.value - threshold, first.error, 3.0)
        holds_ii = _decide(full.value - first.value - gain, first.error + full.error, 3.0)
        last = LemmaVerdict(first.value, full.value, threshold, gain, first.error, full.error,
                            holds_i, holds_ii, "grid", m)
        if holds_i is not None and holds_ii is not None:
            return last
        m *= 2
    if last is not None and (last.holds_i or last.holds_ii):
        return last
    raise ResolutionError(f"grid up to {m // 2}^{d} cannot separate the lemma margins")


def proportion_check(inst: CoveringInstance) -> list[tuple[int, float]]:
    """For ``d = 1`` and small ``r_(Q-1)``: the share of ``B(y_l', eps/Q)`` covered by
    the first ``Q`` balls, for every ``l' >= Q`` whose ball meets them.

    Returns ``(l', share)`` pairs; the covering argument expects each share
    to exceed 1/5.
    """
    if inst.dimension != 1:
        raise HypothesisError("proportion diagnostic is one-dimensional")
    inst.validate()
    q = inst.q
    rho = inst.separation_radius
    if inst.radii[q - 1] >= rho / 10:
        return []
    firsts = [(float(c), r) for c, r in zip(inst.points[:q, 0], inst.radii[:q]) if r > 0]
    shares = []
    for lp in range(q, 2 * q):
        c, r = float(inst.points[lp, 0]), inst.radii[lp]
        meets = any(_circle_gap(c, fc) < r + fr for fc, fr in firsts)
        if not meets:
            continue
        covered = union_measure_1d([(fc, fr) for fc, fr in firsts] + [(c, rho)]).value
        alone = union_measure_1d([(fc, fr) for fc, fr in firsts]).value
        shares.append((lp, (alone + 2 * rho - covered) / (2 * rho)))
    return shares


def _circle_gap(a: float, b: float) -> float:
    diff = abs(a - b) % 1.0
    return min(diff, 1.0 - diff)


def random_covering_instance(rng: np.random.Generator, d: int, q: int) -> CoveringInstance:
    """A random instance that satisfies the lemma's hypothesis."""
    while True:
        points = rng.random((2 * q, d))
        delta = min_pairwise_distance(points)
        if delta > 0:
            break
    epsilon = rng.uniform(0.3, 0.95) * delta * q ** (1.0 / d) / 2.0
    rho = epsilon / q ** (1.0 / d)
    if rng.random() < 0.05:
        radii = np.zeros(2 * q)
    else:
        floor = rho / (200.0 if d == 1 else 20.0)
        scale = 10 ** rng.uniform(math.log10(floor), math.log10(0.5))
        radii = np.sort(scale * rng.random(2 * q) ** rng.uniform(0.5, 3.0))[::-1]
    return CoveringInstance(q, float(epsilon), points, tuple(float(r) for r in radii))


def finest_resolution(d: int, start: int = DEFAULT_RESOLUTION,
                      budgets: Budgets = DEFAULT_BUDGETS) -> int:
    """Last grid side the covering check reaches before the cell budget stops doubling."""
    m = start
    while (2 * m) ** d <= budgets.grid_cells:
        m *= 2
    return m


def replay_instance(record: Mapping[str, Any], *,
                    budgets: Budgets = DEFAULT_BUDGETS) -> LemmaVerdict:
    """Re-run the covering check on an instance stored as a falsification record."""
    return covering_lemma_check(CoveringInstance.from_json(record["instance"]), budgets=budgets)


@dataclass(frozen=True)
class CampaignRow:
    instance_id: int
    q: int
    d: int
    alternative: str
    margin_i: float
    margin_ii: float
    resolution: int | None = None


@dataclass(frozen=True)
class CampaignResult:
    rows: tuple[CampaignRow, ...]
    falsifications: tuple[dict[str, Any], ...]

    @property
    def undecided(self) -> int:
        return sum(1 for r in self.rows if r.alternative == "undecided")

    @property
    def undecided_by_dimension(self) -> dict[int, int]:
        counts = {r.d: 0 for r in self.rows}
        for r in self.rows:
            if r.alternative == "undecided":
                counts[r.d] += 1
        return counts

    @property
    def max_resolution(self) -> int | None:
        reached = [r.resolution for r in self.rows if r.resolution is not None]
        return max(reached) if reached else None

    def raise_on_falsification(self) -> None:
        if self.falsifications:
            raise FalsificationError(
                f"{len(self.falsifications)} covering instances satisfy neither alternative"
            )


def _campaign_one(seed: int, d: int, q: int, index: int,
                  budgets: Budgets) -> tuple[CampaignRow, dict[str, Any] | None]:
    inst = random_covering_instance(child_rng(seed, "lemma", d, q, index), d, q)
    try:
        verdict = covering_lemma_check(inst, budgets=budgets)
    except ResolutionError:
        logger.debug("lemma instance d=%d Q=%d #%d undecided", d, q, index)
        return CampaignRow(index, q, d, "undecided", math.nan, math.nan,
                           finest_resolution(d, budgets=budgets)), None
    row = CampaignRow(index, q, d, verdict.alternative, verdict.margin_i, verdict.margin_ii,
                      verdict.resolution)
    replay = None
    if verdict.falsified:
        replay = {"seed": seed, "index": index, "instance": inst.to_json(),
                  "verdict": verdict.to_dict()}
        replay["replayed"] = replay_instance(json.loads(json.dumps(replay)),
                                             budgets=budgets).alternative
        logger.warning("falsification: %s", json.dumps(replay["verdict"]))
    return row, replay


def lemma_campaign(instances: int, seed: int, *, dimensions: Sequence[int] = (1, 2),
                   q_values: Sequence[int] = (4, 8, 16), workers: int | None = None,
                   budgets: Budgets = DEFAULT_BUDGETS) -> CampaignResult:
    """Check ``instances`` random covering instances per dimension.

    Instance ``i`` for ``(d, Q)`` draws from ``child_rng(seed, "lemma", d, Q, i)``;
    ``Q`` cycles through ``q_values``. Falsification records are replayed from
    their JSON form before they are returned.
    """
    jobs = [(d, q_values[i % len(q_values)], i) for d in dimensions for i in range(instances)]
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda j: _campaign_one(seed, *j, budgets), jobs))
    else:
        results = [_campaign_one(seed, *j, budgets) for j in jobs]
    result = CampaignResult(tuple(r for r, _ in results),
                            tuple(f for _, f in results if f is not None))
    logger.info("lemma campaign: %d instances, %d falsifications, %d undecided",
                len(result.rows), len(result.falsifications), result.undecided)
    for d, count in result.undecided_by_dimension.items():
        total = sum(1 for r in result.rows if r.d == d)
        if count > UNDECIDED_WARNING_SHARE * total:
            logger.warning("lemma campaign: %d of %d instances in d=%d undecided at grid %s",
                           count, total, d, finest_resolution(d, budgets=budgets))
    return result


# ---------------------------------------------------------------------------
# doubling lower bound


@dataclass(frozen=True)
class DoublingRow:
    n: int
    horizon: int
    union: MeasureEstimate
    lower_bound: float
    partial_sum: float


@dataclass(frozen=True)
class MSTPReport:
    """Union measures at doubling horizons compared with ``eta = 2**d (eps/10)**d``."""

    epsilon: EpsilonEstimate
    eta: float
    rows: tuple[DoublingRow, ...]
    reached_at: int | None
    divergence_hint: bool
    metric: str = "sup"

    @property
    def nondecreasing(self) -> bool:
        values = [r.union.value for r in self.rows]
        return all(b >= a - 1e-12 for a, b in zip(values, values[1:]))

    def recurrence_holds(self) -> bool:
        """Lower bound below the measured union at every stage before ``eta`` is reached."""
        for r in self.rows:
            if self.reached_at is not None and r.n >= self.reached_at:
                break
            if r.lower_bound > r.union.value + r.union.error + 1e-12:
                return False
        return True


def mstp_lower_bound(alpha: Number | Sequence[Number], center: TorusPoint,
                     schedule: RadiusSchedule, doublings: int, *, resolution: int = 1024,
                     budgets: Budgets = DEFAULT_BUDGETS) -> MSTPReport:
    """Measure ``∪_(l < 2**(n+1)) B(x_0 - l alpha, r_l)`` for ``n = 0..doublings``.

    Reports where the union first reaches ``eta`` and the accumulated lower bound
    ``sum_(p=2..n) 2**(p-1) mu(B(x_0, r_(2**(p+1)-1)))``.
    """
    vec = as_vector(alpha)
    d = len(vec)
    if not schedule.monotone:
        raise NonMonotoneError("mstp lower bound needs a non-increasing schedule")
    eps = epsilon_alpha(vec, 2 ** (doublings + 1))
    if eps.value <= 0:
        raise EpsilonZeroError(f"epsilon vanishes at horizon {2 ** (doublings + 1)}")
    eta = unit_ball_volume(d) * (eps.value / 10.0) ** d
    horizon_max = 2 ** (doublings + 1)
    radii = schedule.radii_array(horizon_max)
    centers = orbit(center, [-a for a in vec], horizon_max)
    rows = []
    reached_at = None
    bound = 0.0
    for n in range(doublings + 1):
        h = 2 ** (n + 1)
        if d == 1:
            union = union_measure_1d(_arcs(centers[:h], radii[:h]))
        else:
            balls = [Ball(TorusPoint(tuple(c)), float(r)) for c, r in zip(centers[:h], radii[:h])]
            union = union_measure_md(balls, "grid", resolution=resolution,
                                     budget=budgets.grid_cells)
        if n >= 2:
            bound += 2 ** (n - 1) * ball_measure(float(radii[2 ** (n + 1) - 1]), d)
        partial = float(np.sum(radii[:h] ** d))
        rows.append(DoublingRow(n, h, union, bound, partial))
        if reached_at is None and union.value >= eta:
            reached_at = n
    increments = [rows[0].partial_sum] + [b.partial_sum - a.partial_sum
                                          for a, b in zip(rows, rows[1:])]
    mean_increment = sum(increments) / len(increments)
    hint = mean_increment > 0 and increments[-1] >= 0.5 * mean_increment
    logger.info("mstp lower bound: eps=%.5g eta=%.5g reached_at=%s", eps.value, eta, reached_at)
    return MSTPReport(eps, eta, tuple(rows), reached_at, hint)
