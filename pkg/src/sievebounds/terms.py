"""The sixteen sieve integrals and their integrands.

Unprimed terms carry the weight ``alpha``; primed terms are the same
integrals with that factor removed (one power of alpha lower). All range
endpoints and inner limits are exact rationals; inner limits are affine in
alpha.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .buchstab import BuchstabTable, omega
from .enclosure import Enclosure, enc, enc_hull, enc_log, enc_mul
from .errors import DomainError
from .ivec import IVec

F = Fraction

__all__ = [
    "TermId",
    "TermSpec",
    "Affine",
    "Part",
    "CellClass",
    "term_spec",
    "sigma",
    "xi",
    "f4",
    "f4_array",
    "f4_cell",
    "integrand",
    "closed_form_term",
    "as_fraction",
    "ALL_TERMS",
    "UNPRIMED",
    "PRIMED",
]


class TermId(str, enum.Enum):
    G0 = "G0"
    G1 = "G1"
    G2 = "G2"
    G3 = "G3"
    G4 = "G4"
    G5 = "G5"
    G6 = "G6"
    G7 = "G7"
    G0p = "G0p"
    G1p = "G1p"
    G2p = "G2p"
    G3p = "G3p"
    G4p = "G4p"
    G5p = "G5p"
    G6p = "G6p"
    G7p = "G7p"

    @classmethod
    def parse(cls, text: Union[str, "TermId"]) -> "TermId":
        if isinstance(text, TermId):
            return text
        key = text.strip().replace("'", "p").replace("′", "p")
        for t in cls:
            if t.value.lower() == key.lower():
                return t
        raise DomainError(f"unknown term {text!r}")

    @property
    def primed(self) -> bool:
        return self.value.endswith("p")

    @property
    def base(self) -> int:
        return int(self.value[1])

    def __str__(self):
        return self.value


ALL_TERMS = tuple(TermId)
UNPRIMED = tuple(t for t in TermId if not t.primed)
PRIMED = tuple(t for t in TermId if t.primed)


def as_fraction(x) -> Fraction:
    """Exact rational for ``x``; floats are read by their shortest repr."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


@dataclass(frozen=True)
class Affine:
    """``c0 + c1 * alpha`` with rational coefficients."""

    c0: Fraction
    c1: Fraction
    name: str = ""

    def exact(self, alpha) -> Fraction:
        return self.c0 + self.c1 * Fraction(alpha)

    def enclose(self, alpha: Enclosure) -> Enclosure:
        e = enc(self.c0) + enc_mul(enc(self.c1), alpha)
        return e

    def ivec(self, A):
        """Evaluate on an IVec or Jet."""
        out = A * IVec.const(self.c1) if self.c1 != 1 else A
        return out + IVec.const(self.c0) if self.c0 != 0 else out


SIGMA = Affine(F(2, 3), F(-1, 3), "sigma(a)")
XI = Affine(F(3, 2), F(-1), "xi(a)")
HALF = Affine(F(0), F(1, 2), "a/2")
A_MINUS_2SIGMA = Affine(F(-4, 3), F(5, 3), "a-2sigma(a)")
A_MINUS_1 = Affine(F(-1), F(1), "a-1")
G4_FLOOR = Affine(F(5, 3), F(-4, 3), "sigma(a)-a+1")


@dataclass(frozen=True)
class Part:
    """One iterated integral ``int_{a_lo}^{a_hi} int_{lower}^{upper} ... d beta d alpha``."""

    a_lo: Fraction
    a_hi: Fraction
    lower: Optional[Affine] = None
    upper: Optional[Affine] = None


@dataclass(frozen=True)
class TermSpec:
    id: TermId
    dimension: int
    parts: tuple[Part, ...]
    alpha_power: int
    coefficient: Fraction = F(1)
    indicator: bool = False
    sign: int = 1
    tau_dependent: bool = False

    @property
    def alpha_range(self) -> tuple[Fraction, Fraction]:
        return min(p.a_lo for p in self.parts), max(p.a_hi for p in self.parts)

    def without_indicator(self) -> "TermSpec":
        """Same integral with ``f4`` replaced by 1 (G4/G4p only)."""
        if self.dimension != 4:
            raise DomainError("only the four-dimensional terms carry an indicator")
        return TermSpec(self.id, 4, self.parts, self.alpha_power, self.coefficient,
                        False, self.sign, False)

    def with_tau(self, tau) -> "TermSpec":
        if not self.tau_dependent:
            return self
        t = as_fraction(tau)
        if t < F(5, 4):
            raise DomainError(f"tau must be >= 5/4, got {tau!r}")
        return TermSpec(self.id, 1, (Part(F(5, 4), t),), self.alpha_power,
                        self.coefficient, False, 1, True)


_S6, _S16 = F(7, 6), F(17, 16)
_BASE = {
    0: dict(dimension=1, parts=(Part(F(1), _S6),), power=0, coef=F(1)),
    1: dict(dimension=2, parts=(Part(F(1), _S16, SIGMA, A_MINUS_2SIGMA),
                                Part(F(1), _S16, XI, HALF)), power=1, coef=F(1)),
    2: dict(dimension=2, parts=(Part(_S16, F(8, 7), SIGMA, HALF),), power=1, coef=F(1)),
    3: dict(dimension=2, parts=(Part(F(8, 7), _S6, SIGMA, HALF),), power=1, coef=F(1)),
    4: dict(dimension=4, parts=(Part(F(8, 7), _S6, G4_FLOOR, A_MINUS_1),), power=1, coef=F(1)),
    5: dict(dimension=1, parts=(Part(_S6, F(5, 4)),), power=1, coef=F(4)),
    6: dict(dimension=2, parts=(Part(_S6, F(5, 4), A_MINUS_1, SIGMA),), power=1, coef=F(1)),
    7: dict(dimension=1, parts=(Part(F(5, 4), F(1317, 1000)),), power=1, coef=F(4)),
}


def term_spec(term: Union[str, TermId], tau=None) -> TermSpec:
    """Specification of ``term``; ``tau`` sets the G7/G7p upper limit."""
    tid = TermId.parse(term)
    b = _BASE[tid.base]
    spec = TermSpec(
        id=tid,
        dimension=b["dimension"],
        parts=b["parts"],
        alpha_power=b["power"] - (1 if tid.primed else 0),
        coefficient=b["coef"],
        indicator=tid.base == 4,
        sign=-1 if tid.base == 6 else 1,
        tau_dependent=tid.base == 7,
    )
    return spec.with_tau(tau) if tau is not None else spec


# inner limits ------------------------------------------------------------------

def sigma(alpha) -> Enclosure:
    """``(2 - alpha)/3``."""
    return SIGMA.enclose(enc(alpha))


def xi(alpha) -> Enclosure:
    """``3/2 - alpha``."""
    return XI.enclose(enc(alpha))


# indicator -------------------------------------------------------------------------

def f4(alpha, b1, b2, b3) -> int:
    """Characteristic function excluding partial sums in ``[alpha-1, sigma(alpha)]``.

    Evaluated in exact rational arithmetic on the given values; the band is
    closed.
    """
    a = Fraction(alpha)
    lo, hi = a - 1, (2 - a) / 3
    x, y, z = Fraction(b1), Fraction(b2), Fraction(b3)
    for s in (x + y, x + z, y + z, x + y + z):
        if lo <= s <= hi:
            return 0
    return 1


def f4_array(alpha, b1, b2, b3) -> np.ndarray:
    """Floating-point :func:`f4` on arrays (non-certified, for estimators)."""
    lo = alpha - 1.0
    hi = (2.0 - alpha) / 3.0
    out = np.ones(np.broadcast(alpha, b1, b2, b3).shape, dtype=bool)
    for s in (b1 + b2, b1 + b3, b2 + b3, b1 + b2 + b3):
        out &= ~((s >= lo) & (s <= hi))
    return out


class CellClass(str, enum.Enum):
    INSIDE = "inside"
    OUTSIDE = "outside"
    BOUNDARY = "boundary"


#: integer codes used by the vectorised kernels
INSIDE, OUTSIDE, BOUNDARY = 0, 1, 2


def f4_cell_codes(A: IVec, B1: IVec, B2: IVec, B3: IVec) -> np.ndarray:
    """Vectorised cell classification of ``f4`` over boxes.

    Returns ``INSIDE`` where every partial sum is certainly outside the band,
    ``OUTSIDE`` where some sum is certainly inside it, ``BOUNDARY`` otherwise.
    """
    band_lo = A - 1.0
    band_hi = SIGMA.ivec(A)
    clear = np.ones(np.broadcast(A.lo, B1.lo, B2.lo, B3.lo).shape, dtype=bool)
    hit = np.zeros_like(clear)
    for s in (B1 + B2, B1 + B3, B2 + B3, B1 + B2 + B3):
        clear &= (s.lo > band_hi.hi) | (s.hi < band_lo.lo)
        hit |= (s.lo >= band_lo.hi) & (s.hi <= band_hi.lo)
    return np.where(hit, OUTSIDE, np.where(clear, INSIDE, BOUNDARY)).astype(np.int8)


def f4_cell(alpha: Enclosure, b1: Enclosure, b2: Enclosure, b3: Enclosure) -> CellClass:
    """Classify ``f4`` on a box: identically 1, identically 0, or undecided."""
    code = f4_cell_codes(*(IVec(e.lo, e.hi) for e in map(enc, (alpha, b1, b2, b3))))
    return (CellClass.INSIDE, CellClass.OUTSIDE, CellClass.BOUNDARY)[int(code)]


# integrand -------------------------------------------------------------------------

def _alpha_pow(alpha: Enclosure, p: int) -> Enclosure:
    if p == 1:
        return alpha
    if p == 0:
        return Enclosure(1.0, 1.0)
    return enc(1) / alpha


def integrand(term: Union[str, TermId, TermSpec], point: Sequence, table: BuchstabTable) -> Enclosure:
    """Enclosure of the integrand of ``term`` at a point or over a box.

    ``point`` is ``(alpha,)`` for one-dimensional terms, ``(alpha, beta)`` for
    two-dimensional ones and ``(alpha, b1, b2, b3)`` for G4/G4p; coordinates
    may be floats or Enclosures. For G4 a box on the indicator boundary
    returns the hull with 0.
    """
    spec = term if isinstance(term, TermSpec) else term_spec(term)
    coords = [enc(c) for c in point]
    if len(coords) != spec.dimension:
        raise DomainError(f"{spec.id} expects {spec.dimension} coordinates, got {len(coords)}")
    a = coords[0]
    lo, hi = spec.alpha_range
    if a.hi < lo or a.lo > hi:
        raise DomainError(f"alpha={a!r} outside the range of {spec.id}")
    weight = _alpha_pow(a, spec.alpha_power)
    if spec.dimension == 1:
        return enc(spec.coefficient) * weight
    if spec.dimension == 2:
        b = coords[1]
        u = (a - b) / b
        return weight * omega(u, table) / (b * b)
    b1, b2, b3 = coords[1:]
    u = (a - b1 - b2 - b3) / b3
    val = weight * omega(u, table) / (b1 * b2 * b3 * b3)
    if not spec.indicator:
        return val
    cls = f4_cell(a, b1, b2, b3)
    if cls is CellClass.OUTSIDE:
        return Enclosure(0.0, 0.0)
    if cls is CellClass.BOUNDARY:
        return enc_hull(val, Enclosure(0.0, 0.0))
    return val


# closed forms ----------------------------------------------------------------------

def closed_form_term(term: Union[str, TermId], tau=F(1317, 1000)) -> Enclosure:
    """Tight enclosure of the one-dimensional terms G0, G5, G7 and their primes."""
    tid = TermId.parse(term)
    t = as_fraction(tau)
    if tid.base == 7 and t < F(5, 4):
        raise DomainError(f"tau must be >= 5/4, got {tau!r}")
    if tid is TermId.G0:
        return Enclosure.from_fraction(F(1, 6))
    if tid is TermId.G5:
        return Enclosure.from_fraction(F(29, 72))
    if tid is TermId.G7:
        return Enclosure.from_fraction(2 * (t * t - F(25, 16)))
    if tid is TermId.G0p:
        return enc_log(Enclosure.from_fraction(F(7, 6)))
    if tid is TermId.G5p:
        return Enclosure.from_fraction(F(1, 3))
    if tid is TermId.G7p:
        return Enclosure.from_fraction(4 * (t - F(5, 4)))
    raise DomainError(f"{tid} has no closed form")


def closed_form_float(term: Union[str, TermId], tau=F(1317, 1000)) -> float:
    """Round-to-nearest value of :func:`closed_form_term` (fast mode)."""
    import math

    tid = TermId.parse(term)
    t = as_fraction(tau)
    if tid is TermId.G0p:
        return math.log1p(1.0 / 6.0)
    exact = {
        TermId.G0: F(1, 6), TermId.G5: F(29, 72), TermId.G7: 2 * (t * t - F(25, 16)),
        TermId.G5p: F(1, 3), TermId.G7p: 4 * (t - F(5, 4)),
    }
    if tid not in exact:
        raise DomainError(f"{tid} has no closed form")
    return float(exact[tid])
