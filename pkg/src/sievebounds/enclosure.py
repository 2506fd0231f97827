"""Certified real intervals with binary64 endpoints.

Every operation returns an interval containing the exact image of its
operands. Rational operations are rounded tightly: the exact result is
formed with :class:`fractions.Fraction` and each endpoint is the nearest
binary64 value on the outward side, so exact results stay exact
(``[1,1] + [2,2] == [3,3]``).

``log`` relies on the platform ``math.log``. Its result is widened by a
relative ``2**-47`` (at least 16 ulp) on each side, which covers the
worst-case error of any mainstream libm, plus one extra ``nextafter`` step.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Union

from .errors import DomainError

__all__ = [
    "Enclosure",
    "enc",
    "enc_add",
    "enc_sub",
    "enc_mul",
    "enc_div",
    "enc_log",
    "enc_sqrt",
    "enc_hull",
    "enc_width",
    "enc_intersect",
    "enc_ratio",
    "round_down",
    "round_up",
    "LOG_REL_ERROR",
]

#: relative widening applied to platform logarithms
LOG_REL_ERROR = 2.0**-47

Real = Union[int, float, Fraction]


def _to_float(x: Fraction) -> float:
    try:
        return float(x)
    except OverflowError:
        return math.inf if x > 0 else -math.inf


def round_down(x: Fraction) -> float:
    """Largest binary64 value that is <= ``x``."""
    f = _to_float(x)
    if math.isinf(f):
        return sys.float_info.max if f > 0 else f
    if Fraction(f) > x:
        f = math.nextafter(f, -math.inf)
    return f


def round_up(x: Fraction) -> float:
    """Smallest binary64 value that is >= ``x``."""
    f = _to_float(x)
    if math.isinf(f):
        return -sys.float_info.max if f < 0 else f
    if Fraction(f) < x:
        f = math.nextafter(f, math.inf)
    return f


@dataclass(frozen=True)
class Enclosure:
    """Closed interval ``[lo, hi]`` certified to contain a real value."""

    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if math.isnan(lo) or math.isnan(hi):
            raise DomainError("NaN endpoint")
        if lo > hi:
            raise DomainError(f"empty enclosure [{lo!r}, {hi!r}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    # construction ---------------------------------------------------------
    @classmethod
    def point(cls, x: float) -> "Enclosure":
        return cls(x, x)

    @classmethod
    def from_fraction(cls, x: Real) -> "Enclosure":
        """Tightest enclosure of an exact rational."""
        fx = Fraction(x)
        return cls(round_down(fx), round_up(fx))

    # queries --------------------------------------------------------------
    @property
    def mid(self) -> float:
        return self.lo + (self.hi - self.lo) / 2

    @property
    def width(self) -> float:
        return enc_width(self)

    def contains(self, x: Real) -> bool:
        """Exact membership test (floats are compared by their exact value)."""
        fx = Fraction(x)
        return Fraction(self.lo) <= fx <= Fraction(self.hi)

    def subset_of(self, other: "Enclosure") -> bool:
        return other.lo <= self.lo and self.hi <= other.hi

    def overlaps(self, other: "Enclosure") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def is_finite(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    # operators ------------------------------------------------------------
    def __add__(self, other):
        return enc_add(self, enc(other))

    __radd__ = __add__

    def __sub__(self, other):
        return enc_sub(self, enc(other))

    def __rsub__(self, other):
        return enc_sub(enc(other), self)

    def __mul__(self, other):
        return enc_mul(self, enc(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return enc_div(self, enc(other))

    def __rtruediv__(self, other):
        return enc_div(enc(other), self)

    def __neg__(self):
        return Enclosure(-self.hi, -self.lo)

    def __repr__(self):
        return f"Enclosure({self.lo!r}, {self.hi!r})"


def enc(x) -> Enclosure:
    """Coerce a number to an enclosure; Fractions are enclosed exactly."""
    if isinstance(x, Enclosure):
        return x
    if isinstance(x, float):
        return Enclosure.point(x)
    if isinstance(x, (int, Rational)):
        return Enclosure.from_fraction(Fraction(x))
    raise TypeError(f"cannot enclose {type(x).__name__}")


def _finite(e: Enclosure) -> Enclosure:
    if not e.is_finite():
        raise DomainError(f"non-finite result {e!r}")
    return e


def _exact(e: Enclosure) -> tuple[Fraction, Fraction]:
    return Fraction(e.lo), Fraction(e.hi)


def enc_add(a: Enclosure, b: Enclosure) -> Enclosure:
    alo, ahi = _exact(a)
    blo, bhi = _exact(b)
    return _finite(Enclosure(round_down(alo + blo), round_up(ahi + bhi)))


def enc_sub(a: Enclosure, b: Enclosure) -> Enclosure:
    alo, ahi = _exact(a)
    blo, bhi = _exact(b)
    return _finite(Enclosure(round_down(alo - bhi), round_up(ahi - blo)))


def enc_mul(a: Enclosure, b: Enclosure) -> Enclosure:
    alo, ahi = _exact(a)
    blo, bhi = _exact(b)
    p = (alo * blo, alo * bhi, ahi * blo, ahi * bhi)
    return _finite(Enclosure(round_down(min(p)), round_up(max(p))))


def enc_div(a: Enclosure, b: Enclosure) -> Enclosure:
    if b.lo <= 0.0 <= b.hi:
        raise DomainError(f"division by an enclosure containing zero: {b!r}")
    alo, ahi = _exact(a)
    blo, bhi = _exact(b)
    q = (alo / blo, alo / bhi, ahi / blo, ahi / bhi)
    return _finite(Enclosure(round_down(min(q)), round_up(max(q))))


def enc_ratio(p: int, q: int) -> Enclosure:
    """Enclosure of ``p/q`` built by dividing two exact point enclosures."""
    return enc_div(Enclosure.point(float(p)), Enclosure.point(float(q)))


def _log_down(x: float) -> float:
    r = math.log(x)
    return math.nextafter(r - abs(r) * LOG_REL_ERROR, -math.inf)


def _log_up(x: float) -> float:
    r = math.log(x)
    return math.nextafter(r + abs(r) * LOG_REL_ERROR, math.inf)


def enc_log(a: Enclosure) -> Enclosure:
    if not a.lo > 0.0:
        raise DomainError(f"log of non-positive enclosure {a!r}")
    return _finite(Enclosure(_log_down(a.lo), _log_up(a.hi)))


def _sqrt_down(x: float) -> float:
    s = math.sqrt(x)
    while Fraction(s) ** 2 > Fraction(x):
        s = math.nextafter(s, -math.inf)
    return s


def _sqrt_up(x: float) -> float:
    s = math.sqrt(x)
    while Fraction(s) ** 2 < Fraction(x):
        s = math.nextafter(s, math.inf)
    return s


def enc_sqrt(a: Enclosure) -> Enclosure:
    if a.lo < 0.0:
        raise DomainError(f"sqrt of negative enclosure {a!r}")
    return _finite(Enclosure(_sqrt_down(a.lo), _sqrt_up(a.hi)))


def enc_hull(a: Enclosure, b: Enclosure) -> Enclosure:
    return Enclosure(min(a.lo, b.lo), max(a.hi, b.hi))


def enc_intersect(a: Enclosure, b: Enclosure) -> Enclosure:
    """Intersection of two enclosures of the same quantity."""
    lo, hi = max(a.lo, b.lo), min(a.hi, b.hi)
    if lo > hi:
        raise DomainError(f"disjoint enclosures {a!r} and {b!r}")
    return Enclosure(lo, hi)


def enc_width(a: Enclosure) -> float:
    """``hi - lo`` rounded up."""
    return round_up(Fraction(a.hi) - Fraction(a.lo))
