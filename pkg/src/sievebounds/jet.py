"""First-order interval jets: forward-mode derivatives with interval values.

A :class:`Jet` holds an enclosure of a function over a box together with
enclosures of its partial derivatives over the same box. Evaluating an
expression on jets of the coordinates yields the range and gradient
enclosures needed by the centred-form quadrature rule.

``min``/``max`` are handled with generalised gradients: where one branch is
certainly active its gradient is used, otherwise both are hulled. The
result is a valid Lipschitz enclosure for the piecewise-smooth integrands.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .ivec import IVec, imax, imin


class Jet:
    __slots__ = ("val", "grad")
    __array_ufunc__ = None

    def __init__(self, val: IVec, grad: Sequence[IVec] = ()):
        self.val = val
        self.grad = tuple(grad)

    @classmethod
    def variable(cls, val: IVec, index: int, dim: int) -> "Jet":
        one, zero = IVec(1.0), IVec(0.0)
        return cls(val, [one if k == index else zero for k in range(dim)])

    @classmethod
    def constant(cls, val: IVec, dim: int) -> "Jet":
        return cls(val, [IVec(0.0)] * dim)

    # arithmetic -----------------------------------------------------------
    def __add__(self, o):
        if isinstance(o, Jet):
            return Jet(self.val + o.val, [a + b for a, b in zip(self.grad, o.grad)])
        return Jet(self.val + o, self.grad)

    __radd__ = __add__

    def __sub__(self, o):
        if isinstance(o, Jet):
            return Jet(self.val - o.val, [a - b for a, b in zip(self.grad, o.grad)])
        return Jet(self.val - o, self.grad)

    def __rsub__(self, o):
        return Jet(o - self.val, [-g for g in self.grad])

    def __neg__(self):
        return Jet(-self.val, [-g for g in self.grad])

    def __mul__(self, o):
        if isinstance(o, Jet):
            return Jet(self.val * o.val,
                       [ga * o.val + gb * self.val for ga, gb in zip(self.grad, o.grad)])
        return Jet(self.val * o, [g * o for g in self.grad])

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, Jet):
            q = self.val / o.val
            return Jet(q, [(ga - q * gb) / o.val for ga, gb in zip(self.grad, o.grad)])
        return Jet(self.val / o, [g / o for g in self.grad])

    def __rtruediv__(self, o):
        q = o / self.val
        r = -(q / self.val)
        return Jet(q, [r * g for g in self.grad])


def jmin(a: Jet, b: Jet) -> Jet:
    return _select(a, b, imin(a.val, b.val), a.val.hi <= b.val.lo, b.val.hi <= a.val.lo)


def jmax(a: Jet, b: Jet) -> Jet:
    return _select(a, b, imax(a.val, b.val), a.val.lo >= b.val.hi, b.val.lo >= a.val.hi)


def clamp(x: Jet, lower: Jet, upper: Jet) -> Jet:
    """``min(max(x, lower), upper)``."""
    return jmin(jmax(x, lower), upper)


def _select(a: Jet, b: Jet, val: IVec, take_a, take_b) -> Jet:
    grad = []
    for ga, gb in zip(a.grad, b.grad):
        both = ga.hull(gb)
        lo = np.where(take_a, ga.lo, np.where(take_b, gb.lo, both.lo))
        hi = np.where(take_a, ga.hi, np.where(take_b, gb.hi, both.hi))
        grad.append(IVec(lo, hi))
    return Jet(val, grad)


def omega_jet(x: Jet, table) -> tuple[Jet, int]:
    """``omega(x)`` with chain-rule gradient; also returns u<1 guard hits."""
    val, hits = table._value(x.val)
    if not x.grad:
        return Jet(val), hits
    d = table._deriv(x.val)
    return Jet(val, [_mul_unbounded(d, g) for g in x.grad]), hits


def _mul_unbounded(d: IVec, g: IVec) -> IVec:
    """Product where ``inf * [0, 0]`` is 0 and any other NaN becomes unbounded."""
    with np.errstate(invalid="ignore"):
        p = d * g
    bad = np.isnan(p.lo) | np.isnan(p.hi)
    if np.any(bad):
        zero = (g.lo == 0.0) & (g.hi == 0.0)
        lo = np.where(bad, np.where(zero, 0.0, -np.inf), p.lo)
        hi = np.where(bad, np.where(zero, 0.0, np.inf), p.hi)
        p = IVec(lo, hi)
    return p
