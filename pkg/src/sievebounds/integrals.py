"""Rigorous and fast evaluation of the sieve terms and their aggregates.

Two certified routes are available.

``reduced`` (default)
    The innermost integral is done exactly. Since ``(x omega(x))' =
    omega(x - 1)``, for fixed ``alpha``

        int_l^u omega(alpha/b - 1) / b^2 db = omega(alpha/l)/l - omega(alpha/u)/u,

    so the two-dimensional terms become one-dimensional integrals in
    ``alpha`` and G4 becomes a three-dimensional integral whose innermost
    ``b3`` range is the complement of up to three band intervals. This is
    what makes widths near ``1e-9`` reachable.

``direct``
    Box quadrature over the full two- or four-dimensional domain, with
    the indicator classified per box. Looser, fully independent of the
    reduction, and used as a cross-check.

Every integral is mapped to the unit cube: ``alpha = a0 + t * (a1 - a0)``
and each inner variable ``b = lower + s * (upper - lower)``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from decimal import ROUND_FLOOR, Decimal
from fractions import Fraction
from typing import Mapping, Optional, Union

import numpy as np

from .buchstab import BuchstabTable
from .enclosure import Enclosure, enc, enc_add, enc_sqrt, enc_sub
from .errors import ConfigError, DomainError, InfeasibleError
from .ivec import IVec
from .jet import Jet, clamp, jmax, omega_jet
from .quadrature import (NORMAL, ZERO, BoxEval, integrate, seed_partition,
                         snap_dyadic)
from .terms import (A_MINUS_1, G4_FLOOR, SIGMA, Affine, Part, TermId, TermSpec,
                    as_fraction, closed_form_float, closed_form_term, f4_cell_codes,
                    term_spec)

__all__ = [
    "QuadratureConfig",
    "TermResult",
    "compute_term",
    "compute_all",
    "fixed_sum",
    "primed_fixed_sum",
    "total_S",
    "solve_tau",
    "admissible_tau",
    "rho_coefficient",
    "DEFAULT_TAU",
]

DEFAULT_TAU = Fraction(1317, 1000)

#: per-route default target widths, keyed by integration dimension
DEFAULT_WIDTHS = {
    "reduced": {2: 1e-9, 4: 2e-6},
    "direct": {2: 5e-6, 4: 2e-5},
}
DEFAULT_MAX_CELLS = {"reduced": 400_000, "direct": 4_000_000}
FAST_POINTS = {1: 1 << 16, 3: 96, 2: 1024, 4: 24}


@dataclass(frozen=True)
class QuadratureConfig:
    mode: str = "rigorous"
    target_width: Optional[float] = None
    max_cells: Optional[int] = None
    seeded: bool = True
    workers: Optional[int] = None
    route: str = "reduced"

    def __post_init__(self):
        if self.mode not in ("rigorous", "fast"):
            raise ConfigError(f"mode must be 'rigorous' or 'fast', got {self.mode!r}")
        if self.route not in ("reduced", "direct"):
            raise ConfigError(f"route must be 'reduced' or 'direct', got {self.route!r}")
        if self.target_width is not None and not (self.target_width > 0 and math.isfinite(self.target_width)):
            raise ConfigError("target width must be a positive finite number")
        if self.max_cells is not None and self.max_cells < 1:
            raise ConfigError("max_cells must be >= 1")
        if self.workers is not None and self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def width_for(self, dimension: int) -> float:
        if self.target_width is not None:
            return self.target_width
        return DEFAULT_WIDTHS[self.route][dimension]

    def cells(self) -> int:
        return self.max_cells if self.max_cells is not None else DEFAULT_MAX_CELLS[self.route]

    def as_dict(self) -> dict:
        return {
            "mode": self.mode, "target_width": self.target_width, "max_cells": self.max_cells,
            "seeded": self.seeded, "workers": self.workers, "route": self.route,
        }


@dataclass
class TermResult:
    id: TermId
    enclosure: Enclosure
    cells_evaluated: int
    wall_time: float
    config: QuadratureConfig
    certified: bool
    budget_exceeded: bool = False
    parts: tuple = ()
    guard_hits: int = 0
    tau: Optional[Fraction] = None

    @property
    def width(self) -> float:
        return self.enclosure.width


# integrands on unit-cube jets ---------------------------------------------------------

def _c(x) -> IVec:
    return IVec.const(x)


def _affine(f: Affine, A):
    return A * _c(f.c1) + _c(f.c0)


def _alpha_map(part: Part):
    return _c(part.a_lo), _c(part.a_hi - part.a_lo)


def _weight(A, p: int):
    if p == 1:
        return A
    if p == 0:
        return None
    return 1.0 / A


def _apply_weight(val, A, p):
    w = _weight(A, p)
    return val if w is None else val * w


def _empty_kind(lower: Jet, upper: Jet) -> np.ndarray:
    """ZERO where the inner range is certainly empty over the whole box."""
    return np.where(upper.val.hi <= lower.val.lo, ZERO, NORMAL).astype(np.int8)


def _slice_integrand(part: Part, p: int, table: BuchstabTable):
    """``alpha^p (omega(alpha/l)/l - omega(alpha/u)/u)`` over ``t``."""
    a0, da = _alpha_map(part)

    def fn(v):
        (T,) = v
        A = T * da + a0
        lo = _affine(part.lower, A)
        raw = _affine(part.upper, A)
        up = jmax(raw, lo)
        wl, h1 = omega_jet(A / lo, table)
        wu, h2 = omega_jet(A / up, table)
        val = (wl / lo - wu / up) * da
        return _apply_weight(val, A, p), _empty_kind(lo, raw), h1 + h2

    return fn


def _area_integrand(part: Part, p: int, table: BuchstabTable):
    """``alpha^p omega(alpha/b - 1)/b^2`` over ``(t, s)``."""
    a0, da = _alpha_map(part)

    def fn(v):
        T, S = v
        A = T * da + a0
        lo = _affine(part.lower, A)
        raw = _affine(part.upper, A)
        span = jmax(raw, lo) - lo
        B = lo + span * S
        X = A / B - 1.0
        # u >= 1 holds on every two-dimensional domain (b <= alpha/2)
        X = Jet(IVec(np.maximum(X.val.lo, 1.0), np.maximum(X.val.hi, 1.0)), X.grad)
        w, hits = omega_jet(X, table)
        val = w / (B * B) * span * da
        return _apply_weight(val, A, p), _empty_kind(lo, raw), hits

    return fn


def _g4_frame(part: Part, v):
    a0, da = _alpha_map(part)
    A = v[0] * da + a0
    L = _affine(G4_FLOOR, A)
    M = _affine(A_MINUS_1, A)
    B1 = L + (M - L) * v[1]
    B2 = L + (B1 - L) * v[2]
    return A, da, L, M, B1, B2


def _g4_band_structure(part: Part) -> None:
    """Check exactly that ``f4 = 1`` iff ``b2 + b3 > sigma`` on the G4 domain.

    Needs every pair sum to reach the band's lower edge (``2 L >= alpha - 1``)
    and the triple sum to clear its upper edge (``3 L > sigma``). Both sides
    are affine in alpha, so checking the range endpoints suffices.
    """
    for a in (part.a_lo, part.a_hi):
        floor = G4_FLOOR.exact(a)
        if not (2 * floor >= A_MINUS_1.exact(a) and 3 * floor > SIGMA.exact(a)):
            raise DomainError(f"band structure of f4 fails at alpha={a}")


def _g4_reduced_integrand(part: Part, p: int, indicator: bool, table: BuchstabTable):
    """G4 with the ``b3`` integral done exactly.

    With the indicator the allowed set is ``b3 > sigma - b2``, hence
    ``b2 >= sigma/2``; ``b2`` is parametrised over ``[max(L, sigma/2), b1]``.
    """
    if indicator:
        _g4_band_structure(part)

    def fn(v):
        a0, da = _alpha_map(part)
        A = v[0] * da + a0
        L = _affine(G4_FLOOR, A)
        M = _affine(A_MINUS_1, A)
        B1 = L + (M - L) * v[1]
        if indicator:
            S = _affine(SIGMA, A)
            b2_lo = clamp(S * 0.5, L, B1)
        else:
            b2_lo = L
        B2 = b2_lo + (B1 - b2_lo) * v[2]
        b3_lo = clamp(S - B2, L, B2) if indicator else L
        rest = A - B1 - B2
        w_hi, h1 = omega_jet(rest / B2, table)
        w_lo, h2 = omega_jet(rest / b3_lo, table)
        inner = w_lo / b3_lo - w_hi / B2
        val = inner * ((M - L) * (B1 - b2_lo) * da) / (B1 * B2)
        return _apply_weight(val, A, p), None, h1 + h2

    return fn


def _g4_direct_integrand(part: Part, p: int, indicator: bool, table: BuchstabTable):
    def fn(v):
        A, da, L, M, B1, B2 = _g4_frame(part, v)
        B3 = L + (B2 - L) * v[3]
        X = (A - B1 - B2 - B3) / B3
        w, hits = omega_jet(X, table)
        jac = (M - L) * (B1 - L) * (B2 - L) * da
        val = w * jac / (B1 * B2 * B3 * B3)
        kind = f4_cell_codes(A.val, B1.val, B2.val, B3.val) if indicator else None
        return _apply_weight(val, A, p), kind, hits

    return fn


class JetKernel:
    """Adapter from a jet integrand to the quadrature kernel protocol."""

    def __init__(self, fn, dim: int):
        self.fn = fn
        self.dim = dim

    def __call__(self, lo: np.ndarray, hi: np.ndarray) -> BoxEval:
        c = (lo + hi) * 0.5
        fc, _, _ = self.fn([Jet(IVec(c[:, k])) for k in range(self.dim)])
        box = [Jet.variable(IVec(lo[:, k], hi[:, k]), k, self.dim) for k in range(self.dim)]
        fb, kind, hits = self.fn(box)
        n = lo.shape[0]
        if kind is None:
            kind = np.full(n, NORMAL, dtype=np.int8)
        grad = tuple(IVec(np.broadcast_to(g.lo, (n,)), np.broadcast_to(g.hi, (n,))) for g in fb.grad)
        val = IVec(np.broadcast_to(fb.val.lo, (n,)), np.broadcast_to(fb.val.hi, (n,)))
        return BoxEval(fc.val, val, grad, kind, hits)

    def points(self, pts: np.ndarray) -> np.ndarray:
        """Non-certified midpoint values at ``pts`` (shape ``(n, dim)``)."""
        fc, kind, _ = self.fn([Jet(IVec(pts[:, k])) for k in range(self.dim)])
        vals = fc.val.mid()
        if kind is not None:
            vals = np.where(kind == ZERO, 0.0, vals)
        return vals


# seeds -------------------------------------------------------------------------------

def _integer_crossings(part: Part, limit: Affine, ks=range(2, 10)) -> list[float]:
    """``t`` where ``alpha / limit(alpha)`` is an integer."""
    out = []
    width = part.a_hi - part.a_lo
    for k in ks:
        den = 1 - k * limit.c1
        if den == 0:
            continue
        a = k * limit.c0 / den
        if part.a_lo < a < part.a_hi:
            out.append(snap_dyadic(float((a - part.a_lo) / width)))
    return out


def _seeds_1d(part: Part) -> list[float]:
    return sorted(set(_integer_crossings(part, part.lower) + _integer_crossings(part, part.upper)))


def _seeds_2d(part: Part) -> list[list[float]]:
    t_cuts = _seeds_1d(part)
    a = (part.a_lo + part.a_hi) / 2
    lo, up = part.lower.exact(a), part.upper.exact(a)
    s_cuts = []
    if up > lo:
        for k in range(1, 9):
            b = a / (k + 1)
            if lo < b < up:
                s_cuts.append(snap_dyadic(float((b - lo) / (up - lo))))
    return [t_cuts, sorted(set(s_cuts))]


def _uniform(dim: int, n: int):
    # whole-cube boxes overestimate omega's argument beyond the table range
    cuts = [k / n for k in range(1, n)]
    return seed_partition(dim, [cuts] * dim)


G4_START = 8


# term evaluation ---------------------------------------------------------------------

def _kernels(spec: TermSpec, config: QuadratureConfig, table: BuchstabTable):
    """``(kernel, dim, initial partition)`` for each part of ``spec``."""
    out = []
    for part in spec.parts:
        if spec.dimension == 2 and config.route == "reduced":
            k = JetKernel(_slice_integrand(part, spec.alpha_power, table), 1)
            init = seed_partition(1, [_seeds_1d(part)]) if config.seeded else None
        elif spec.dimension == 2:
            k = JetKernel(_area_integrand(part, spec.alpha_power, table), 2)
            init = seed_partition(2, _seeds_2d(part)) if config.seeded else None
        elif config.route == "reduced":
            k = JetKernel(_g4_reduced_integrand(part, spec.alpha_power, spec.indicator, table), 3)
            init = _uniform(3, G4_START)
        else:
            k = JetKernel(_g4_direct_integrand(part, spec.alpha_power, spec.indicator, table), 4)
            init = _uniform(4, G4_START)
        out.append((k, k.dim, init))
    return out


def _fast_part(kernel: JetKernel, dim: int) -> float:
    n = FAST_POINTS[dim]
    if dim == 1:
        pts = ((np.arange(n) + 0.5) / n)[:, None]
        return float(math.fsum(kernel.points(pts).tolist()) / n)
    axis = (np.arange(n) + 0.5) / n
    total = []
    grid = np.stack(np.meshgrid(*([axis] * (dim - 1)), indexing="ij"), axis=-1).reshape(-1, dim - 1)
    for x0 in axis:
        pts = np.hstack([np.full((grid.shape[0], 1), x0), grid])
        total.append(math.fsum(kernel.points(pts).tolist()))
    return math.fsum(total) / n**dim


def compute_term(term: Union[str, TermId, TermSpec], config: Optional[QuadratureConfig] = None,
                 table: Optional[BuchstabTable] = None, tau=DEFAULT_TAU) -> TermResult:
    """Evaluate one term.

    Rigorous mode returns a certified enclosure; the result carries
    ``budget_exceeded`` when ``max_cells`` ran out before the target width.
    Fast mode returns a point estimate (``lo == hi``) that is not certified.
    The value is the unsigned integral; G6/G6p enter the totals negatively.
    """
    config = config or QuadratureConfig()
    spec = term if isinstance(term, TermSpec) else term_spec(term, tau)
    t0 = time.perf_counter()
    tau_f = as_fraction(tau) if spec.tau_dependent else None
    if spec.dimension == 1:
        if config.mode == "fast":
            v = closed_form_float(spec.id, tau)
            e = Enclosure(v, v)
        else:
            e = closed_form_term(spec.id, tau)
        return TermResult(spec.id, e, 0, time.perf_counter() - t0, config,
                          config.mode == "rigorous", tau=tau_f)
    if table is None:
        from .buchstab import build_table
        table = build_table()
    kernels = _kernels(spec, config, table)
    if config.mode == "fast":
        vals = [_fast_part(k, dim) for k, dim, _ in kernels]
        v = math.fsum(vals)
        return TermResult(spec.id, Enclosure(v, v), sum(FAST_POINTS[d] ** d for _, d, _ in kernels),
                          time.perf_counter() - t0, config, False,
                          parts=tuple(Enclosure(x, x) for x in vals))
    target = config.width_for(spec.dimension) / len(kernels)
    budget = max(1, config.cells() // len(kernels))
    parts, cells, hits, exceeded = [], 0, 0, False
    for kernel, dim, init in kernels:
        r = integrate(kernel, dim, target, budget, initial=init, workers=config.workers)
        parts.append(r.enclosure)
        cells += r.cells
        hits += r.guard_hits
        exceeded |= r.budget_exceeded
    total = parts[0]
    for p in parts[1:]:
        total = enc_add(total, p)
    return TermResult(spec.id, total, cells, time.perf_counter() - t0, config, True,
                      exceeded, tuple(parts), hits)


def compute_all(terms, config: Optional[QuadratureConfig] = None, table: Optional[BuchstabTable] = None,
                tau=DEFAULT_TAU) -> dict[TermId, TermResult]:
    if table is None:
        from .buchstab import build_table
        table = build_table()
    return {TermId.parse(t): compute_term(t, config, table, tau) for t in terms}


# aggregates --------------------------------------------------------------------------

Results = Mapping[Union[TermId, str], Union[TermResult, Enclosure]]


def _lookup(results: Results, tid: TermId) -> Enclosure:
    for key in (tid, tid.value):
        if key in results:
            r = results[key]
            return r.enclosure if isinstance(r, TermResult) else r
    raise ConfigError(f"missing result for {tid}")


def _signed_sum(results: Results, primed: bool) -> Enclosure:
    suffix = "p" if primed else ""
    acc = Enclosure(0.0, 0.0)
    for i in (0, 1, 2, 3, 4, 5):
        acc = enc_add(acc, _lookup(results, TermId(f"G{i}{suffix}")))
    return enc_sub(acc, _lookup(results, TermId(f"G6{suffix}")))


def fixed_sum(results: Results) -> Enclosure:
    """``G0 + G1 + G2 + G3 + G4 + G5 - G6``."""
    return _signed_sum(results, False)


def primed_fixed_sum(results: Results) -> Enclosure:
    return _signed_sum(results, True)


def total_S(tau, results: Results) -> Enclosure:
    """Fixed sum plus ``4 int_{5/4}^{tau} alpha d alpha``."""
    return enc_add(fixed_sum(results), closed_form_term(TermId.G7, tau))


def rho_coefficient(tau, results: Results) -> Enclosure:
    """Primed fixed sum plus ``4 (tau - 5/4)``."""
    return enc_add(primed_fixed_sum(results), closed_form_term(TermId.G7p, tau))


def solve_tau(results: Results) -> Enclosure:
    """Enclosure of the exponent where the total reaches 1.

    Uses the upper endpoint of the fixed sum; the lower endpoint of the
    returned enclosure is nudged down until ``total_S(lo).hi <= 1``.
    """
    fs = fixed_sum(results)
    if fs.hi >= 1.0:
        raise InfeasibleError(f"fixed sum {fs!r} is not below 1")
    rest = enc_sub(Enclosure(1.0, 1.0), Enclosure.point(fs.hi))
    tau = enc_sqrt(enc_add(enc(Fraction(25, 16)), rest / 2))
    lo = tau.lo
    while True:
        point = enc_add(Enclosure.point(fs.hi), closed_form_term(TermId.G7, lo))
        if point.hi <= 1.0:
            break
        lo = math.nextafter(lo, -math.inf)
    return Enclosure(lo, tau.hi)


def admissible_tau(tau: Enclosure, digits: int = 4) -> Decimal:
    """Lower endpoint truncated to ``digits`` decimals (towards the feasible side)."""
    q = Decimal(1).scaleb(-digits)
    return Decimal(tau.lo).quantize(q, rounding=ROUND_FLOOR)
