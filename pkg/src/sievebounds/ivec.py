"""Vectorised interval arithmetic on numpy arrays.

The bulk numerical kernels (Buchstab table, box quadrature) evaluate
millions of interval operations, so they use this array form instead of
:class:`~sievebounds.enclosure.Enclosure`. Every result endpoint is pushed
one ulp outward with ``np.nextafter`` after the round-to-nearest operation,
which is certifiably conservative without touching the FPU rounding mode.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .enclosure import LOG_REL_ERROR, Enclosure
from .errors import DomainError

_NEG = -np.inf
_POS = np.inf


def _down(x):
    return np.nextafter(x, _NEG)


def _up(x):
    return np.nextafter(x, _POS)


class IVec:
    """Array of intervals ``[lo, hi]`` (broadcasting like numpy)."""

    __slots__ = ("lo", "hi")
    # make ndarray (op) IVec dispatch to the reflected IVec operator
    __array_ufunc__ = None

    def __init__(self, lo, hi=None):
        lo = np.asarray(lo, dtype=np.float64)
        hi = lo if hi is None else np.asarray(hi, dtype=np.float64)
        self.lo = lo
        self.hi = hi

    # construction ---------------------------------------------------------
    @classmethod
    def const(cls, value) -> "IVec":
        """Scalar interval from an Enclosure, Fraction, int or float."""
        if isinstance(value, IVec):
            return value
        if isinstance(value, Enclosure):
            return cls(value.lo, value.hi)
        if isinstance(value, float):
            return cls(value, value)
        e = Enclosure.from_fraction(Fraction(value))
        return cls(e.lo, e.hi)

    @staticmethod
    def where(mask, a: "IVec", b: "IVec") -> "IVec":
        return IVec(np.where(mask, a.lo, b.lo), np.where(mask, a.hi, b.hi))

    def __getitem__(self, idx) -> "IVec":
        return IVec(self.lo[idx], self.hi[idx])

    def to_enclosure(self) -> Enclosure:
        return Enclosure(float(self.lo), float(self.hi))

    # queries --------------------------------------------------------------
    @property
    def shape(self):
        return np.broadcast(self.lo, self.hi).shape

    def width(self):
        return _up(self.hi - self.lo)

    def rad(self):
        return _up(_up(self.hi - self.lo) * 0.5)

    def mid(self):
        return self.lo + (self.hi - self.lo) * 0.5

    def mag(self):
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    # arithmetic -----------------------------------------------------------
    @staticmethod
    def _wrap(other) -> "IVec":
        if isinstance(other, IVec):
            return other
        if isinstance(other, (float, int, np.floating, np.ndarray)):
            arr = np.asarray(other, dtype=np.float64)
            if isinstance(other, int) and float(arr) != other:
                raise DomainError("integer not exactly representable")
            return IVec(arr, arr)
        return IVec.const(other)

    def __add__(self, other):
        o = IVec._wrap(other)
        return IVec(_down(self.lo + o.lo), _up(self.hi + o.hi))

    __radd__ = __add__

    def __sub__(self, other):
        o = IVec._wrap(other)
        return IVec(_down(self.lo - o.hi), _up(self.hi - o.lo))

    def __rsub__(self, other):
        return IVec._wrap(other) - self

    def __neg__(self):
        return IVec(-self.hi, -self.lo)

    def __mul__(self, other):
        o = IVec._wrap(other)
        p1 = self.lo * o.lo
        p2 = self.lo * o.hi
        p3 = self.hi * o.lo
        p4 = self.hi * o.hi
        lo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
        hi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
        return IVec(_down(lo), _up(hi))

    __rmul__ = __mul__

    def recip(self) -> "IVec":
        if np.any((self.lo <= 0.0) & (self.hi >= 0.0)):
            raise DomainError("reciprocal of an interval containing zero")
        return IVec(_down(1.0 / self.hi), _up(1.0 / self.lo))

    def __truediv__(self, other):
        o = IVec._wrap(other)
        if np.any((o.lo <= 0.0) & (o.hi >= 0.0)):
            raise DomainError("division by an interval containing zero")
        q1 = self.lo / o.lo
        q2 = self.lo / o.hi
        q3 = self.hi / o.lo
        q4 = self.hi / o.hi
        lo = np.minimum(np.minimum(q1, q2), np.minimum(q3, q4))
        hi = np.maximum(np.maximum(q1, q2), np.maximum(q3, q4))
        return IVec(_down(lo), _up(hi))

    def __rtruediv__(self, other):
        return IVec._wrap(other) / self

    def sqr(self) -> "IVec":
        lo2 = self.lo * self.lo
        hi2 = self.hi * self.hi
        straddle = (self.lo <= 0.0) & (self.hi >= 0.0)
        lo = np.where(straddle, 0.0, _down(np.minimum(lo2, hi2)))
        return IVec(lo, _up(np.maximum(lo2, hi2)))

    def log(self) -> "IVec":
        if np.any(self.lo <= 0.0):
            raise DomainError("log of a non-positive interval")
        rlo = np.log(self.lo)
        rhi = np.log(self.hi)
        return IVec(_down(rlo - np.abs(rlo) * LOG_REL_ERROR),
                    _up(rhi + np.abs(rhi) * LOG_REL_ERROR))

    # lattice --------------------------------------------------------------
    def hull(self, other: "IVec") -> "IVec":
        return IVec(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi))

    def intersect(self, other: "IVec") -> "IVec":
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        if np.any(lo > hi):
            raise DomainError("disjoint enclosures of the same quantity")
        return IVec(lo, hi)

    def hull0(self) -> "IVec":
        """Hull with the point 0."""
        return IVec(np.minimum(self.lo, 0.0), np.maximum(self.hi, 0.0))

    def __repr__(self):
        return f"IVec(lo={self.lo!r}, hi={self.hi!r})"


def imin(a: IVec, b: IVec) -> IVec:
    return IVec(np.minimum(a.lo, b.lo), np.minimum(a.hi, b.hi))


def imax(a: IVec, b: IVec) -> IVec:
    return IVec(np.maximum(a.lo, b.lo), np.maximum(a.hi, b.hi))
