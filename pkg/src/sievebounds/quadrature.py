"""Certified adaptive quadrature over the unit hypercube.

Boxes are dyadic sub-boxes of ``[0, 1]^d``. A kernel evaluates, for a batch
of boxes, the integrand at the box centres and the integrand together with
its gradient over the whole box. Each box then contributes the
intersection of

* the range form ``vol * f(box)`` and
* the centred form ``vol * f(c) + vol * sum_i [-1, 1] rho_i r_i / 2``,
  where ``rho_i`` is the radius of the gradient enclosure over the box and
  ``r_i`` the half side, an enclosure of the second-order remainder.

Refinement is deterministic: the split order depends only on the box
contributions, never on the requested width, so two runs with different
targets walk the same refinement sequence and the tighter result nests
inside the looser one.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .enclosure import Enclosure
from .errors import ConfigError, DomainError
from .ivec import IVec

log = logging.getLogger(__name__)

#: box codes returned by kernels
NORMAL, ZERO, BOUNDARY = 0, 1, 2

WORKERS_ENV = "SIEVEBOUNDS_WORKERS"
_CHUNK = 2048


@dataclass
class BoxEval:
    """Kernel output for ``n`` boxes."""

    center: IVec
    value: IVec
    grad: tuple
    kind: np.ndarray
    guard_hits: int = 0


Kernel = Callable[[np.ndarray, np.ndarray], BoxEval]


@dataclass
class QuadResult:
    enclosure: Enclosure
    cells: int
    rounds: int
    budget_exceeded: bool
    guard_hits: int
    leaves: int


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1, got {n}")
    return n


def _up(x):
    return np.nextafter(x, np.inf)


def contributions(kernel: Kernel, lo: np.ndarray, hi: np.ndarray):
    """Certified per-box integrals and preferred split dimensions."""
    ev = kernel(lo, hi)
    n, d = lo.shape
    side = hi - lo
    vol = IVec(np.prod(side, axis=1))
    # products of dyadic sides are exact until they underflow
    if np.any(vol.lo == 0.0):
        raise DomainError("box volume underflow")
    half = side * 0.5
    centre_err = np.spacing(np.abs(lo + hi)) * 0.25
    err = np.zeros(n)
    score = np.zeros((n, d))
    finite = np.ones(n, dtype=bool)
    for i, g in enumerate(ev.grad):
        rho = g.rad()
        mag = g.mag()
        finite &= np.isfinite(rho) & np.isfinite(mag)
        with np.errstate(invalid="ignore", over="ignore"):
            e = _up(_up(rho * _up(_up(half[:, i] * 0.5) + centre_err[:, i]))
                    + _up(mag * centre_err[:, i]))
            score[:, i] = rho * half[:, i]
        err = _up(err + np.where(finite, e, 0.0))
    err = np.where(finite, _up(err * vol.hi), np.inf)
    centred = vol * ev.center
    centred = IVec(np.nextafter(centred.lo - err, -np.inf), _up(centred.hi + err))
    ranged = vol * ev.value
    lo_c = np.maximum(centred.lo, ranged.lo)
    hi_c = np.minimum(centred.hi, ranged.hi)
    if np.any(lo_c > hi_c):
        raise DomainError("centred and range forms disagree")
    bnd = ev.kind == BOUNDARY
    zero = ev.kind == ZERO
    lo_c = np.where(bnd, np.minimum(ranged.lo, 0.0), np.where(zero, 0.0, lo_c))
    hi_c = np.where(bnd, np.maximum(ranged.hi, 0.0), np.where(zero, 0.0, hi_c))
    score = np.where(np.isfinite(score), score, np.inf)
    widest = np.argmax(side, axis=1)
    best = np.argmax(score, axis=1)
    use_side = bnd | ~finite | (np.max(score, axis=1) <= 0.0)
    split = np.where(use_side, widest, best)
    return lo_c, hi_c, split, ev.guard_hits


def _evaluate(kernel: Kernel, lo, hi, workers: int):
    n = lo.shape[0]
    if workers <= 1 or n <= _CHUNK:
        return contributions(kernel, lo, hi)
    bounds = list(range(0, n, _CHUNK)) + [n]
    jobs = [(bounds[k], bounds[k + 1]) for k in range(len(bounds) - 1)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda ab: contributions(kernel, lo[ab[0]:ab[1]], hi[ab[0]:ab[1]]), jobs))
    return (np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]),
            np.concatenate([p[2] for p in parts]), sum(p[3] for p in parts))


def _total(lo_c, hi_c) -> tuple[float, float]:
    # fsum rounds to nearest; an all-zero sum is exact
    lo = math.nextafter(math.fsum(lo_c.tolist()), -math.inf) if lo_c.any() else 0.0
    hi = math.nextafter(math.fsum(hi_c.tolist()), math.inf) if hi_c.any() else 0.0
    return lo, hi


def integrate(kernel: Kernel, dim: int, target_width: float, max_cells: int,
              initial: Optional[tuple[np.ndarray, np.ndarray]] = None,
              workers: Optional[int] = None, split_fraction: float = 0.5) -> QuadResult:
    """Adaptive certified integral of ``kernel`` over the unit cube.

    ``initial`` is an optional starting partition ``(lo, hi)`` of shape
    ``(n, dim)``. Each round bisects the boxes carrying the top
    ``split_fraction`` of the total width. Stops when the width of the
    running enclosure is at most ``target_width`` or when splitting would
    exceed ``max_cells`` evaluated boxes.
    """
    if not target_width > 0:
        raise ConfigError("target width must be positive")
    if max_cells < 1:
        raise ConfigError("max_cells must be >= 1")
    workers = default_workers() if workers is None else workers
    if initial is None:
        lo, hi = np.zeros((1, dim)), np.ones((1, dim))
    else:
        lo, hi = (np.array(a, dtype=np.float64).reshape(-1, dim) for a in initial)
    c_lo, c_hi, split, hits = _evaluate(kernel, lo, hi, workers)
    cells = lo.shape[0]
    best = _total(c_lo, c_hi)
    rounds = 0
    exceeded = False
    while best[1] - best[0] > target_width:
        w = c_hi - c_lo
        order = np.argsort(-w, kind="stable")
        cum = np.cumsum(w[order])
        k = int(np.searchsorted(cum, split_fraction * cum[-1])) + 1
        k = min(k, (max_cells - cells) // 2)
        if k <= 0:
            exceeded = True
            break
        pick = np.sort(order[:k])
        keep = np.ones(lo.shape[0], dtype=bool)
        keep[pick] = False
        plo, phi, pdim = lo[pick], hi[pick], split[pick]
        rows = np.arange(k)
        midv = (plo[rows, pdim] + phi[rows, pdim]) * 0.5
        left_hi = phi.copy()
        left_hi[rows, pdim] = midv
        right_lo = plo.copy()
        right_lo[rows, pdim] = midv
        new_lo = np.empty((2 * k, dim))
        new_hi = np.empty((2 * k, dim))
        new_lo[0::2], new_hi[0::2] = plo, left_hi
        new_lo[1::2], new_hi[1::2] = right_lo, phi
        n_lo, n_hi, n_split, n_hits = _evaluate(kernel, new_lo, new_hi, workers)
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        c_lo = np.concatenate([c_lo[keep], n_lo])
        c_hi = np.concatenate([c_hi[keep], n_hi])
        split = np.concatenate([split[keep], n_split])
        hits += n_hits
        cells += 2 * k
        rounds += 1
        tot = _total(c_lo, c_hi)
        best = (max(best[0], tot[0]), min(best[1], tot[1]))
    if hits:
        log.warning("omega u<1 convention applied on %d boxes", hits)
    return QuadResult(Enclosure(*best), cells, rounds, exceeded, hits, lo.shape[0])


def seed_partition(dim: int, cuts: list[list[float]]):
    """Tensor partition of the unit cube with the given interior cut points per axis."""
    axes = []
    for k in range(dim):
        pts = sorted({0.0, 1.0, *(c for c in (cuts[k] if k < len(cuts) else []) if 0.0 < c < 1.0)})
        axes.append(np.array(pts))
    grids_lo = np.meshgrid(*[a[:-1] for a in axes], indexing="ij")
    grids_hi = np.meshgrid(*[a[1:] for a in axes], indexing="ij")
    lo = np.stack([g.ravel() for g in grids_lo], axis=1)
    hi = np.stack([g.ravel() for g in grids_hi], axis=1)
    return lo, hi


def snap_dyadic(x: float, bits: int = 30) -> float:
    """Nearest multiple of ``2**-bits`` (keeps box centres exact)."""
    return round(x * 2.0**bits) / 2.0**bits
