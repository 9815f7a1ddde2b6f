"""
Diophantine arithmetic on rigorous enclosures.

:class:`RealScalar` is an interval with rational endpoints rounded outward to a
fixed number of significant bits; every quantity that enters a certificate
flows through it. On top of it the module provides continued fractions,
distances to the integer lattice, exhaustive simultaneous-approximation scans
and constructors for vectors with certified approximation rates.
"""

from __future__ import annotations

import functools
import logging
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterator, Sequence, Union

import mpmath
from sympy import integer_nthroot

from shrinklab.config import DEFAULT_BUDGETS, DEFAULT_PRECISION_BITS
from shrinklab.errors import (
    BudgetError,
    CertificateError,
    ConfigError,
    PrecisionError,
    RationalInputError,
)

logger = logging.getLogger(__name__)

Number = Union[int, Fraction, float, str, "RealScalar"]

# Exact points are kept unrounded while their numerator and denominator stay
# within this many multiples of the working precision.
_EXACT_SIZE_FACTOR = 8


def _round_down(x: Fraction, bits: int) -> Fraction:
    if x == 0:
        return x
    shift = bits - (abs(x.numerator).bit_length() - x.denominator.bit_length())
    if shift >= 0:
        scale = 1 << shift
        return Fraction(math.floor(x * scale), scale)
    scale = 1 << -shift
    return Fraction(math.floor(x / scale) * scale)


def _round_up(x: Fraction, bits: int) -> Fraction:
    return -_round_down(-x, bits)


def _fits_exact(x: Fraction, bits: int) -> bool:
    limit = _EXACT_SIZE_FACTOR * bits
    return abs(x.numerator).bit_length() <= limit and x.denominator.bit_length() <= limit


def _fraction_digits(x: Fraction, places: int) -> str:
    sign = "-" if x < 0 else ""
    x = abs(x)
    whole = math.floor(x)
    frac = math.floor((x - whole) * 10**places)
    return f"{sign}{whole}.{frac:0{places}d}"


@dataclass(frozen=True)
class RealScalar:
    """A real number known to lie in ``[lower, upper]``.

    Endpoints are exact rationals. Results of arithmetic are rounded outward to
    ``bits`` significant bits unless they are exact points of moderate size.
    Order comparisons raise :class:`PrecisionError` when the enclosures overlap.
    """

    lower: Fraction
    upper: Fraction
    bits: int = DEFAULT_PRECISION_BITS

    def __post_init__(self) -> None:
        if self.lower > self.upper:
            raise ValueError(f"empty enclosure [{self.lower}, {self.upper}]")

    # construction ---------------------------------------------------------

    @classmethod
    def enclose(cls, lower: Fraction | int, upper: Fraction | int,
                bits: int = DEFAULT_PRECISION_BITS) -> "RealScalar":
        """Outward-rounded enclosure of ``[lower, upper]``."""
        lo, hi = Fraction(lower), Fraction(upper)
        if lo == hi and _fits_exact(lo, bits):
            return cls(lo, hi, bits)
        return cls(_round_down(lo, bits), _round_up(hi, bits), bits)

    @classmethod
    def exact(cls, value: int | Fraction | float | str,
              bits: int = DEFAULT_PRECISION_BITS) -> "RealScalar":
        v = Fraction(value)
        return cls(v, v, bits)

    @classmethod
    def sqrt(cls, value: int | Fraction, bits: int = DEFAULT_PRECISION_BITS) -> "RealScalar":
        v = Fraction(value)
        if v < 0:
            raise ConfigError(f"square root of negative value {v}")
        if v == 0:
            return cls.exact(0, bits)
        mag = v.numerator.bit_length() - v.denominator.bit_length()
        k = max(bits + 2 - mag // 2, 0)
        scaled = v * 4**k
        lo = math.isqrt(math.floor(scaled))
        hi = math.isqrt(math.ceil(scaled))
        if hi * hi < scaled:
            hi += 1
        if lo * lo == scaled:
            return cls.enclose(Fraction(lo, 2**k), Fraction(lo, 2**k), bits)
        return cls.enclose(Fraction(lo, 2**k), Fraction(hi, 2**k), bits)

    @classmethod
    def exp_neg(cls, k: int, bits: int = DEFAULT_PRECISION_BITS) -> "RealScalar":
        """Enclosure of ``e**-k`` for an integer ``k >= 0``."""
        if k < 0:
            raise ConfigError(f"exp_neg needs k >= 0, got {k}")
        if k == 0:
            return cls.exact(1, bits)
        guard = k.bit_length() + 8
        lo, hi = _inv_e_bounds(bits + guard)
        base = cls.enclose(lo, hi, bits + guard)
        result = base**k
        return cls.enclose(result.lower, result.upper, bits)

    @classmethod
    def constant(cls, name: str, bits: int = DEFAULT_PRECISION_BITS) -> "RealScalar":
        if name == "golden":
            value = (cls.sqrt(5, bits + 4) - 1) / 2
        elif name == "phi":
            value = (cls.sqrt(5, bits + 4) + 1) / 2
        elif name == "silver":
            value = cls.sqrt(2, bits + 4) - 1
        elif name.startswith("sqrt") and name[4:].isdigit():
            value = cls.sqrt(int(name[4:]), bits + 4)
        elif name == "e":
            value = 1 / cls.exp_neg(1, bits + 4)
        elif name == "pi":
            return _mpmath_constant(mpmath.pi, bits)
        else:
            raise ConfigError(f"unknown constant {name!r}")
        return value.with_bits(bits)

    @classmethod
    def parse(cls, text: str | int | float | Fraction,
              bits: int = DEFAULT_PRECISION_BITS) -> "RealScalar":
        """Parse a named constant, ``sqrt(N)``, ``p/q`` or a decimal literal."""
        if isinstance(text, (int, float, Fraction)) and not isinstance(text, bool):
            return cls.exact(text, bits)
        s = str(text).strip()
        sign = 1
        if s.startswith("-") and not _DECIMAL.fullmatch(s):
            sign, s = -1, s[1:].strip()
        m = _SQRT_CALL.fullmatch(s)
        if m:
            value = cls.sqrt(Fraction(m.group(1)), bits)
        elif re.fullmatch(r"[a-z]+\d*", s):
            value = cls.constant(s, bits)
        else:
            try:
                value = cls.exact(Fraction(s), bits)
            except (ValueError, ZeroDivisionError) as exc:
                raise ConfigError(f"cannot parse real number {text!r}") from exc
        return value if sign > 0 else -value

    @classmethod
    def coerce(cls, value: Number, bits: int = DEFAULT_PRECISION_BITS) -> "RealScalar":
        if isinstance(value, RealScalar):
            return value
        if isinstance(value, str):
            return cls.parse(value, bits)
        return cls.exact(value, bits)

    # inspection -----------------------------------------------------------

    @property
    def mid(self) -> Fraction:
        return (self.lower + self.upper) / 2

    @property
    def radius(self) -> Fraction:
        return (self.upper - self.lower) / 2

    @property
    def is_exact(self) -> bool:
        return self.lower == self.upper

    @property
    def is_zero(self) -> bool:
        return self.lower == 0 and self.upper == 0

    def contains_zero(self) -> bool:
        return self.lower <= 0 <= self.upper

    def with_bits(self, bits: int) -> "RealScalar":
        return RealScalar.enclose(self.lower, self.upper, bits)

    def to_digits(self, places: int = 40) -> str:
        return _fraction_digits(self.mid, places)

    def __float__(self) -> float:
        return float(self.mid)

    def __repr__(self) -> str:
        if self.is_exact:
            return f"RealScalar({self.lower})"
        return f"RealScalar({float(self.mid)!r} +/- {float(self.radius):.3g})"

    # arithmetic -----------------------------------------------------------

    def _other(self, other: Number) -> "RealScalar":
        return RealScalar.coerce(other, self.bits)

    def __add__(self, other: Number) -> "RealScalar":
        o = self._other(other)
        return RealScalar.enclose(self.lower + o.lower, self.upper + o.upper,
                                  max(self.bits, o.bits))

    __radd__ = __add__

    def __neg__(self) -> "RealScalar":
        return RealScalar(-self.upper, -self.lower, self.bits)

    def __sub__(self, other: Number) -> "RealScalar":
        return self + (-self._other(other))

    def __rsub__(self, other: Number) -> "RealScalar":
        return self._other(other) - self

    def __mul__(self, other: Number) -> "RealScalar":
        o = self._other(other)
        products = (self.lower * o.lower, self.lower * o.upper,
                    self.upper * o.lower, self.upper * o.upper)
        return RealScalar.enclose(min(products), max(products), max(self.bits, o.bits))

    __rmul__ = __mul__

    def reciprocal(self) -> "RealScalar":
        if self.contains_zero():
            raise PrecisionError(f"cannot invert {self!r}: enclosure contains 0")
        return RealScalar.enclose(1 / self.upper, 1 / self.lower, self.bits)

    def __truediv__(self, other: Number) -> "RealScalar":
        return self * self._other(other).reciprocal()

    def __rtruediv__(self, other: Number) -> "RealScalar":
        return self._other(other) * self.reciprocal()

    def __pow__(self, k: int) -> "RealScalar":
        if k < 0:
            return (self**-k).reciprocal()
        result = RealScalar.exact(1, self.bits)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        if result.lower < 0 and self.lower >= 0:
            result = RealScalar(Fraction(0), result.upper, result.bits)
        return result

    def __abs__(self) -> "RealScalar":
        if self.lower >= 0:
            return self
        if self.upper <= 0:
            return -self
        return RealScalar(Fraction(0), max(-self.lower, self.upper), self.bits)

    def floor(self) -> int:
        lo, hi = math.floor(self.lower), math.floor(self.upper)
        if lo != hi:
            raise PrecisionError(f"floor undecidable for {self!r}")
        return lo

    # comparison -----------------------------------------------------------

    def certainly_lt(self, other: Number) -> bool:
        return self.upper < self._other(other).lower

    def certainly_le(self, other: Number) -> bool:
        return self.upper <= self._other(other).lower

    def lt(self, other: Number) -> bool:
        o = self._other(other)
        if self.upper < o.lower:
            return True
        if self.lower >= o.upper:
            return False
        raise PrecisionError(f"cannot decide {self!r} < {o!r}")

    def le(self, other: Number) -> bool:
        o = self._other(other)
        if self.upper <= o.lower:
            return True
        if self.lower > o.upper:
            return False
        raise PrecisionError(f"cannot decide {self!r} <= {o!r}")

    def gt(self, other: Number) -> bool:
        return self._other(other).lt(self)

    def ge(self, other: Number) -> bool:
        return self._other(other).le(self)

    __lt__ = lt
    __le__ = le
    __gt__ = gt
    __ge__ = ge


_DECIMAL = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?(/\d+)?")
_SQRT_CALL = re.compile(r"sqrt\(\s*(\d+(?:/\d+)?)\s*\)")


@functools.lru_cache(maxsize=16)
def _inv_e_bounds(bits: int) -> tuple[Fraction, Fraction]:
    # Consecutive partial sums of sum((-1)**j / j!) bracket 1/e.
    target = Fraction(1, 1 << (bits + 4))
    partial = Fraction(0)
    term = Fraction(1)
    j = 0
    while True:
        nxt = partial + (term if j % 2 == 0 else -term)
        j += 1
        term = term / j
        if term < target:
            last = nxt + (term if j % 2 == 0 else -term)
            return (min(nxt, last), max(nxt, last))
        partial = nxt


def _mpmath_constant(value: Any, bits: int) -> RealScalar:
    with mpmath.workprec(bits + 16):
        v = +value
        man, exp = v.man_exp
        mid = Fraction(man) * Fraction(2) ** exp
        if v < 0:
            mid = -mid
        slack = Fraction(2) ** exp * 2
    return RealScalar.enclose(mid - slack, mid + slack, bits)


def as_vector(alpha: Number | Sequence[Number],
              bits: int = DEFAULT_PRECISION_BITS) -> tuple[RealScalar, ...]:
    """Coerce a scalar or sequence to a tuple of :class:`RealScalar`."""
    if isinstance(alpha, (RealScalar, int, float, Fraction, str)):
        return (RealScalar.coerce(alpha, bits),)
    return tuple(RealScalar.coerce(a, bits) for a in alpha)


# ---------------------------------------------------------------------------
# distances


def dist_to_int(x: Number) -> RealScalar:
    """Enclosure of the distance from ``x`` to the nearest integer."""
    x = RealScalar.coerce(x)
    mid = x.mid
    centre = abs(mid - round(mid))
    rad = x.radius
    lo = max(Fraction(0), centre - rad)
    hi = min(Fraction(1, 2), centre + rad)
    return RealScalar(min(lo, hi), hi, x.bits)


def dist_to_lattice(v: Sequence[Number], d: int | None = None) -> RealScalar:
    """Sup-norm distance from ``v`` to the integer lattice."""
    if d is not None and len(v) != d:
        raise ConfigError(f"expected {d} coordinates, got {len(v)}")
    if not v:
        return RealScalar.exact(0)
    dists = [dist_to_int(x) for x in v]
    return RealScalar(max(s.lower for s in dists), max(s.upper for s in dists),
                      max(s.bits for s in dists))


# ---------------------------------------------------------------------------
# continued fractions


@dataclass(frozen=True)
class ContinuedFraction:
    """Partial quotients ``a_1..a_k`` with integer part ``a_0`` and convergents."""

    integer_part: int
    quotients: tuple[int, ...]
    convergents: tuple[tuple[int, int], ...]

    @property
    def denominators(self) -> tuple[int, ...]:
        return tuple(q for _, q in self.convergents)

    def check_recurrence(self) -> bool:
        p2, q2, p1, q1 = 1, 0, self.integer_part, 1
        for a, (p, q) in zip(self.quotients, self.convergents):
            if p != a * p1 + p2 or q != a * q1 + q2 or math.gcd(p, q) != 1:
                return False
            p2, q2, p1, q1 = p1, q1, p, q
        return True

    def __len__(self) -> int:
        return len(self.quotients)


def _euclid(value: Fraction) -> Iterator[int]:
    num, den = value.numerator, value.denominator
    while den:
        a, r = divmod(num, den)
        yield a
        num, den = den, r


def _certified_quotients(x: RealScalar) -> Iterator[int]:
    """Quotients ``a_0, a_1, ...`` shared by every point of the enclosure.

    For an exact point the iterator ends with the rational's expansion; for a
    proper interval it raises :class:`PrecisionError` once the endpoints'
    expansions stop agreeing.
    """
    if x.is_exact:
        yield from _euclid(x.lower)
        return
    lo, hi = _euclid(x.lower), _euclid(x.upper)
    a, b = next(lo, None), next(hi, None)
    while True:
        a_next, b_next = next(lo, None), next(hi, None)
        # An endpoint whose expansion stops here sits on the cylinder boundary.
        if a is None or a != b or a_next is None or b_next is None:
            raise PrecisionError(f"continued fraction undecidable at precision {x.bits} bits")
        yield a
        a, b = a_next, b_next


def iter_convergents(x: Number) -> Iterator[tuple[int, int]]:
    """Yield convergents ``(p_k, q_k)`` for ``k = 1, 2, ...`` of ``x``."""
    x = RealScalar.coerce(x)
    quotients = _certified_quotients(x)
    a0 = next(quotients)
    p2, q2, p1, q1 = 1, 0, a0, 1
    for a in quotients:
        p, q = a * p1 + p2, a * q1 + q2
        yield p, q
        p2, q2, p1, q1 = p1, q1, p, q


def cf_expand(x: Number, k: int) -> ContinuedFraction:
    """First ``k`` partial quotients and convergents of ``x``."""
    if k < 1:
        raise ConfigError(f"cf_expand needs k >= 1, got {k}")
    x = RealScalar.coerce(x)
    quotients = _certified_quotients(x)
    a0 = next(quotients)
    found: list[int] = []
    for a in quotients:
        found.append(a)
        if len(found) == k:
            break
    if len(found) < k:
        raise RationalInputError(
            f"expansion of {x.lower} terminated after {len(found)} quotients",
            a0, found,
        )
    convergents = []
    p2, q2, p1, q1 = 1, 0, a0, 1
    for a in found:
        p, q = a * p1 + p2, a * q1 + q2
        convergents.append((p, q))
        p2, q2, p1, q1 = p1, q1, p, q
    return ContinuedFraction(a0, tuple(found), tuple(convergents))


# ---------------------------------------------------------------------------
# simultaneous approximation


class LatticeScan:
    """Fixed-point image of a vector for fast scans of ``‖qα‖_Z``.

    Each coordinate is scaled by a common integer ``D``; exact rationals use the
    least common denominator, other inputs ``2**(bits + guard)`` with an error
    term so that the true numerator lies within ``q * slack`` of the computed one.
    """

    def __init__(self, alpha: Sequence[RealScalar], guard_bits: int = 16) -> None:
        self.dimension = len(alpha)
        if all(a.is_exact for a in alpha):
            denom = 1
            for a in alpha:
                denom = denom * a.lower.denominator // math.gcd(denom, a.lower.denominator)
            self.denominator = denom
            self.numerators = [int(a.lower * denom) for a in alpha]
            self.slack = 0
        else:
            shift = max(a.bits for a in alpha) + guard_bits
            self.denominator = 1 << shift
            self.numerators = [math.floor(a.mid * self.denominator) for a in alpha]
            self.slack = max(math.ceil(a.radius * self.denominator) for a in alpha) + 1
        self.bits = max(a.bits for a in alpha)

    def numerator(self, q: int) -> int:
        D = self.denominator
        best = 0
        for n in self.numerators:
            r = (q * n) % D
            best = max(best, min(r, D - r))
        return best

    def error(self, q: int) -> int:
        return abs(q) * self.slack

    def distance(self, q: int) -> RealScalar:
        num, err = self.numerator(q), self.error(q)
        lo = max(Fraction(0), Fraction(num - err, self.denominator))
        hi = min(Fraction(1, 2), Fraction(num + err, self.denominator))
        return RealScalar(min(lo, hi), hi, self.bits)


@dataclass(frozen=True)
class ApproxRecord:
    """One record-setting denominator of a simultaneous-approximation scan."""

    q: int
    distance: RealScalar
    scaled: float


def check_search_budget(d: int, q_max: int, budget_bits: int | None = None) -> None:
    if q_max < 1:
        raise ConfigError(f"Q_max must be >= 1, got {q_max}")
    budget = DEFAULT_BUDGETS.search_bits if budget_bits is None else budget_bits
    cost = d * math.log2(q_max) if q_max > 1 else 0.0
    if cost > budget:
        raise BudgetError(
            f"search over Q <= {q_max} in dimension {d} needs {cost:.1f} bits, budget {budget}"
        )


def best_sim_approx(alpha: Number | Sequence[Number], q_max: int, *,
                    budget_bits: int | None = None) -> list[ApproxRecord]:
    """All ``Q <= q_max`` that strictly lower ``‖Qα‖_Z``, in increasing order.

    The minimiser of ``Q**(1/d) * ‖Qα‖_Z`` is always among the records; ties go
    to the smallest ``Q``.
    """
    vec = as_vector(alpha)
    d = len(vec)
    check_search_budget(d, q_max, budget_bits)
    scan = LatticeScan(vec)
    D = scan.denominator
    records: list[ApproxRecord] = []
    rec_num = rec_err = None
    best_scaled, best_q = math.inf, 0
    for q in range(1, q_max + 1):
        num, err = scan.numerator(q), scan.error(q)
        scaled = q ** (1.0 / d) * (num / D)
        if scaled < best_scaled:
            best_scaled, best_q = scaled, q
        if rec_num is not None and rec_err is not None:
            if num - err >= rec_num + rec_err:
                continue
            if not num + err < rec_num - rec_err:
                raise PrecisionError(f"record comparison undecidable at Q={q}")
        rec_num, rec_err = num, err
        records.append(ApproxRecord(q, scan.distance(q), scaled))
    if best_q and all(r.q != best_q for r in records):
        records.append(ApproxRecord(best_q, scan.distance(best_q), best_scaled))
        records.sort(key=lambda r: r.q)
    logger.debug("best_sim_approx: d=%d Q_max=%d records=%d", d, q_max, len(records))
    return records


def type_estimate(alpha: Number | Sequence[Number], q_max: int, *,
                  budget_bits: int | None = None) -> float:
    """``min over Q <= q_max`` of ``Q**(1/d) * ‖Qα‖_Z``."""
    records = best_sim_approx(alpha, q_max, budget_bits=budget_bits)
    return min(r.scaled for r in records)


# ---------------------------------------------------------------------------
# certificates


#: Decay laws as ``(n exponent in units of d, Q exponent numerator)``:
#: ``psi(n, Q) = 1 / (n**(2d + offset) * Q**(power/d))``.
DECAY_LAWS: dict[str, tuple[int, int]] = {"eq3": (3, 1), "eq7": (5, 2)}

Decay = Union[str, Callable[[int, int], Any]]


def _law_exponents(tag: str, d: int) -> tuple[int, int]:
    offset, power = DECAY_LAWS[tag]
    return 2 * d + offset, power


def law_holds(tag: str, d: int, n: int, q: int, bound: Fraction) -> bool:
    """Exact check of ``bound <= 1 / (n**e * q**(p/d))`` via ``d``-th powers."""
    e, p = _law_exponents(tag, d)
    return bound**d * Fraction(n) ** (e * d) * Fraction(q) ** p <= 1


def _ceil_root(x: int, k: int) -> int:
    root, exact = integer_nthroot(x, k)
    return int(root) if exact else int(root) + 1


def _decay_value(decay: Callable[[int, int], Any], n: int, q: int) -> Fraction:
    value = Fraction(decay(n, q))
    if value <= 0:
        raise ConfigError(f"decay law returned non-positive value {value} at n={n}")
    return value


@dataclass(frozen=True)
class ApproxCertificate:
    """Denominators ``Q_n`` with proven bounds ``‖Q_n α‖_Z <= b_n``."""

    dimension: int
    tag: str
    denominators: tuple[int, ...]
    bounds: tuple[Fraction, ...]
    alpha: tuple[RealScalar, ...] = ()
    snapshot: tuple[tuple[int, ...], int] | None = None

    def __len__(self) -> int:
        return len(self.denominators)

    def entries(self) -> list[tuple[int, int, Fraction]]:
        return [(n, q, b) for n, (q, b) in enumerate(zip(self.denominators, self.bounds), 1)]

    def denominator(self, n: int) -> int:
        return self.denominators[n - 1]

    def bound(self, n: int) -> Fraction:
        return self.bounds[n - 1]

    def verify(self, alpha: Sequence[Number] | None = None) -> "ApproxCertificate":
        """Re-check every bound against ``alpha`` (default: the stored enclosure)."""
        vec = as_vector(alpha) if alpha is not None else self.alpha
        if not vec:
            raise CertificateError("certificate carries no alpha enclosure to verify against")
        if len(vec) != self.dimension:
            raise CertificateError(
                f"alpha has {len(vec)} coordinates, certificate dimension is {self.dimension}"
            )
        if len(self.denominators) != len(self.bounds):
            raise CertificateError("denominators and bounds differ in length")
        for n, q, b in self.entries():
            if q < 1 or b <= 0:
                raise CertificateError(f"entry {n}: Q={q} and bound={b} must be positive")
            if n > 1 and q < 2 * self.denominators[n - 2]:
                raise CertificateError(f"entry {n}: Q_n < 2 Q_(n-1)")
            if self.tag in DECAY_LAWS and not law_holds(self.tag, self.dimension, n, q, b):
                raise CertificateError(f"entry {n}: bound {b} violates the {self.tag} law")
            if not dist_to_lattice([a * q for a in vec]).le(b):
                raise CertificateError(f"entry {n}: ‖Q_n alpha‖ exceeds {b}")
        logger.debug("certificate %s (d=%d, %d entries) verified", self.tag,
                     self.dimension, len(self))
        return self

    def to_json(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "d": self.dimension,
            "tag": self.tag,
            "entries": [{"n": n, "Q": str(q), "bound": str(b)} for n, q, b in self.entries()],
            "alpha_digits": [a.to_digits(40) for a in self.alpha],
            "alpha_enclosure": [{"lower": str(a.lower), "upper": str(a.upper)}
                                for a in self.alpha],
            "precision_bits": max((a.bits for a in self.alpha), default=DEFAULT_PRECISION_BITS),
        }
        if self.snapshot is not None:
            doc["snapshot"] = {"numerators": [str(p) for p in self.snapshot[0]],
                               "denominator": str(self.snapshot[1])}
        return doc

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "ApproxCertificate":
        try:
            bits = int(doc.get("precision_bits", DEFAULT_PRECISION_BITS))
            entries = sorted(doc["entries"], key=lambda e: int(e["n"]))
            alpha = tuple(
                RealScalar(Fraction(e["lower"]), Fraction(e["upper"]), bits)
                for e in doc.get("alpha_enclosure", [])
            )
            snap = doc.get("snapshot")
            snapshot = None
            if snap is not None:
                snapshot = (tuple(int(p) for p in snap["numerators"]), int(snap["denominator"]))
            return cls(
                dimension=int(doc["d"]),
                tag=str(doc["tag"]),
                denominators=tuple(int(e["Q"]) for e in entries),
                bounds=tuple(Fraction(e["bound"]) for e in entries),
                alpha=alpha,
                snapshot=snapshot,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CertificateError(f"malformed certificate document: {exc}") from exc


@dataclass(frozen=True)
class LiouvilleStage:
    """Stage ``n`` of the nested construction: ``alpha^(n) = numerators / Q``."""

    n: int
    denominator: int
    numerators: tuple[int, ...]
    multiplier: int
    bound: Fraction = field(default=Fraction(0))


def _increment(n: int, i: int, d: int) -> int:
    return 1 + (n * i) % (d + 1)


def liouville_stages(d: int, decay: Decay, count: int) -> Iterator[LiouvilleStage]:
    """Nested rational stages ``P^(n)/Q_n`` with ``Q_(n+1) = m_(n+1) Q_n``.

    Stage ``n+1`` adds ``c_(n+1,i) / Q_(n+1)`` to coordinate ``i`` with
    ``1 <= c <= C``; the multiplier is chosen so that ``b_n = 2C/m_(n+1)`` obeys
    the decay law with a factor of two to spare.
    """
    if d < 1:
        raise ConfigError(f"dimension must be >= 1, got {d}")
    increments = 1 if d == 1 else d + 1
    q = d + 1
    nums = tuple(i + 1 for i in range(d))
    for n in range(1, count + 1):
        if isinstance(decay, str):
            e, p = _law_exponents(decay, d)
            m = 4 * increments * n**e * _ceil_root(q**p, d)
        else:
            m = math.ceil(4 * increments / _decay_value(decay, n, q))
        m = max(2, m)
        yield LiouvilleStage(n, q, nums, m, Fraction(2 * increments, m))
        q, nums = m * q, tuple(m * p + _increment(n + 1, i, d) for i, p in enumerate(nums))


def _nested_vector(d: int, decay: Decay, n_max: int,
                   bits: int) -> tuple[tuple[RealScalar, ...], ApproxCertificate]:
    increments = 1 if d == 1 else d + 1
    stages: list[LiouvilleStage] = []
    for stage in liouville_stages(d, decay, 10**6):
        stages.append(stage)
        if stage.n == n_max and stage.multiplier * stage.denominator > 2 ** (bits - 8):
            raise PrecisionError(
                f"Q_{n_max + 1} needs more than {bits - 8} bits; raise precision_bits"
            )
        if stage.n >= n_max and Fraction(2 * increments, stage.multiplier * stage.denominator) \
                <= Fraction(1, 2**bits):
            break
    last = stages[-1]
    tail = Fraction(2 * increments, last.multiplier * last.denominator)
    alpha = tuple(
        RealScalar.enclose(Fraction(p, last.denominator), Fraction(p, last.denominator) + tail,
                           bits)
        for p in last.numerators
    )
    tag = decay if isinstance(decay, str) else "custom"
    cert = ApproxCertificate(
        dimension=d,
        tag=tag,
        denominators=tuple(s.denominator for s in stages[:n_max]),
        bounds=tuple(s.bound for s in stages[:n_max]),
        alpha=alpha,
        snapshot=(last.numerators, last.denominator),
    )
    return alpha, cert


def _convergent_vector(decay: Decay, n_max: int,
                       bits: int) -> tuple[tuple[RealScalar, ...], ApproxCertificate]:
    # alpha = [0; a_1, a_2, ...] with q_(n+1) >= 1/psi(n, q_n).
    qs = [1, 2]
    ps = [0, 1]
    n = 1
    while True:
        q_prev, q = qs[-2], qs[-1]
        if isinstance(decay, str):
            e, p = _law_exponents(decay, 1)
            inverse = Fraction(n**e * q**p)
        else:
            inverse = 1 / _decay_value(decay, n, q)
        a = max(2, math.ceil((inverse - q_prev) / q))
        qs.append(a * q + q_prev)
        ps.append(a * ps[-1] + ps[-2])
        n += 1
        if n >= n_max + 2 and Fraction(1, qs[-1] * qs[-2]) <= Fraction(1, 2**bits):
            break
    if qs[n_max] * qs[n_max + 1] * qs[n_max + 2] > 2 ** (bits - 8):
        raise PrecisionError(f"q_{n_max + 2} needs more than {bits} bits; raise precision_bits")
    lo, hi = sorted((Fraction(ps[-1], qs[-1]), Fraction(ps[-2], qs[-2])))
    alpha = (RealScalar.enclose(lo, hi, bits),)
    tag = decay if isinstance(decay, str) else "custom"
    cert = ApproxCertificate(
        dimension=1,
        tag=tag,
        denominators=tuple(qs[1:n_max + 1]),
        bounds=tuple(Fraction(1, qs[k + 1]) for k in range(1, n_max + 1)),
        alpha=alpha,
        snapshot=((ps[-1],), qs[-1]),
    )
    return alpha, cert


def build_liouville_vector(d: int, decay: Decay, n_max: int, *,
                           bits: int = DEFAULT_PRECISION_BITS,
                           on_convergents: bool = False,
                           ) -> tuple[tuple[RealScalar, ...], ApproxCertificate]:
    """Construct ``alpha`` in ``R^d`` together with a verified approximation certificate.

    ``decay`` is ``"eq3"``, ``"eq7"`` or a callable ``(n, Q) -> psi`` returning a
    positive rational or float. With ``on_convergents`` (``d == 1`` only) the
    denominators are continued-fraction denominators with the smallest partial
    quotients the law allows.
    """
    if n_max < 1:
        raise ConfigError(f"n_max must be >= 1, got {n_max}")
    if isinstance(decay, str) and decay not in DECAY_LAWS:
        raise ConfigError(f"unknown decay law {decay!r}")
    if on_convergents:
        if d != 1:
            raise ConfigError("convergent construction is only available for d = 1")
        alpha, cert = _convergent_vector(decay, n_max, bits)
    else:
        alpha, cert = _nested_vector(d, decay, n_max, bits)
    cert.verify(alpha)
    logger.info("built %s vector d=%d n_max=%d (Q_n_max has %d bits)", cert.tag, d, n_max,
                cert.denominators[-1].bit_length())
    return alpha, cert


def approximating_denominators(alpha1: Number, first: int, last: int) -> dict[int, int]:
    """For each level ``l`` in ``[first, last]`` a denominator ``q_l`` with
    ``‖q_l alpha1‖ <= e**-l``; ``q_l`` is strictly increasing in ``l``.

    Each ``q_l`` is the first continued-fraction denominator beyond ``q_(l-1)``
    whose bound is proved by interval arithmetic.
    """
    x = RealScalar.coerce(alpha1)
    convergents = iter_convergents(x)
    found: dict[int, int] = {}
    q_prev = 0
    current: tuple[int, int] | None = None
    for level in range(first, last + 1):
        threshold = RealScalar.exp_neg(level, x.bits)
        while True:
            if current is None or current[1] <= q_prev:
                try:
                    current = next(convergents)
                except StopIteration:
                    raise RationalInputError(
                        "alpha_1 is rational; no denominators beyond its expansion", 0, []
                    ) from None
                continue
            if dist_to_int(x * current[1]).certainly_le(threshold):
                break
            current = None
        found[level] = current[1]
        q_prev = current[1]
    return found


def bits_for_level(level: int) -> int:
    """Working precision that comfortably resolves ``‖q alpha‖ <= e**-level``."""
    return 3 * level + 128
