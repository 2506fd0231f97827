"""Certified evaluation of the Buchstab function.

``omega(u)`` is the solution of ``omega(u) = 1/u`` on ``[1, 2]`` and
``(u omega(u))' = omega(u - 1)`` for ``u >= 2``; by convention it vanishes
below 1. On ``[2, 3]`` the closed form ``(1 + log(u - 1)) / u`` is used.
Beyond 3 the table integrates ``W(u) = u omega(u) = 1 + int_2^u omega(t-1) dt``
segment by segment (method of steps) with the trapezoid rule. Each cell's
trapezoid error term ``-(dt^3/12) omega''`` is enclosed with a certified
second-derivative bound, so node values are second-order accurate.

Grid layout: every unit segment ``[k, k+1]`` carries the same offsets
``t_j`` (multiples of ``2**-40``), so ``k + t_j`` is exact in binary64 and
the cell one unit below cell ``i`` is exactly cell ``i - N``.

Per cell the table stores range enclosures of omega, omega' and omega''.
Derivatives come from the delay equation itself::

    omega'(u)  = (omega(u-1) - omega(u)) / u
    omega''(u) = (omega'(u-1) - 2 omega'(u)) / u
"""

from __future__ import annotations

import logging
import math
import threading

import numpy as np

from .enclosure import Enclosure, enc_intersect
from .errors import ConfigError, DomainError, TableRangeError
from .ivec import IVec

log = logging.getLogger(__name__)

__all__ = ["BuchstabTable", "build_table", "omega", "omega_closed"]

#: tolerance on the lower end of public queries
U_LOWER_SLACK = 1e-12
_DYADIC = 2.0**40
_WIDE = np.longdouble
_WIDE_EPS = float(np.finfo(np.longdouble).eps)


def _down(x):
    return np.nextafter(x, -np.inf)


def _up(x):
    return np.nextafter(x, np.inf)


# closed forms ---------------------------------------------------------------

def _piece1(X: IVec) -> IVec:
    """omega on a sub-interval of [1, 2]: 1/u is decreasing."""
    return IVec(_down(1.0 / X.hi), _up(1.0 / X.lo))


def _piece1_deriv(X: IVec) -> IVec:
    return -(X.recip().sqr())


def _piece2(X: IVec) -> tuple[IVec, IVec]:
    """Range enclosures of omega and omega' on a sub-interval of [2, 3].

    The value uses a centred form around the midpoint, so the enclosure
    width is about ``|omega'| * width(X)`` rather than the naive overestimate.
    """
    Xm1 = X - 1.0
    naive = (Xm1.log() + 1.0) / X
    inv = Xm1.recip()
    d = (inv - naive) / X
    m = X.mid()
    vm = (IVec(m - 1.0).log() + 1.0) / m
    centred = (vm + d * (X - m)).intersect(naive)
    d = ((inv - centred) / X).intersect(d)
    return centred, d


def _point_piece2(x: np.ndarray) -> IVec:
    return (IVec(x - 1.0).log() + 1.0) / x


# table ----------------------------------------------------------------------

class BuchstabTable:
    """Piecewise certified representation of omega on ``[1, u_top]``.

    Immutable after construction; safe to share between threads. The
    sparse range-query tables are built lazily under a lock on the first
    query spanning more than two cells.
    """

    def __init__(self, u_max: float, h: float, n_per_unit: int, offsets: np.ndarray,
                 nodes: np.ndarray, node: IVec, W: IVec, cell: IVec, d1: IVec, d2: IVec):
        self.u_max = float(u_max)
        self.h = float(h)
        self.n_per_unit = n_per_unit
        self.offsets = offsets
        self.nodes = nodes
        self.node = node
        self.W = W
        self.cell_range = cell
        self.d1 = d1
        self.d2 = d2
        self.u_top = float(nodes[-1])
        self._rmq = None
        self._rmq_lock = threading.Lock()

    # public views ---------------------------------------------------------
    @property
    def step(self) -> float:
        """Effective cell width (``1/n_per_unit``, never larger than ``h``)."""
        return 1.0 / self.n_per_unit

    @property
    def n_cells(self) -> int:
        return len(self.nodes) - 1

    def cell(self, i: int) -> Enclosure:
        """Range enclosure of omega over ``[nodes[i], nodes[i+1]]``."""
        return Enclosure(float(self.cell_range.lo[i]), float(self.cell_range.hi[i]))

    @property
    def cells(self) -> list[Enclosure]:
        return [self.cell(i) for i in range(self.n_cells)]

    def integral_prefix(self, i: int) -> Enclosure:
        """Enclosure of ``int_2^u omega(t-1) dt`` at node ``i`` (0 for u <= 2)."""
        if self.nodes[i] <= 2.0:
            return Enclosure(0.0, 0.0)
        lo = float(_down(self.W.lo[i] - 1.0))
        hi = float(_up(self.W.hi[i] - 1.0))
        return Enclosure(max(lo, 0.0), hi)

    def cell_index(self, u: float) -> int:
        i = int(np.searchsorted(self.nodes, u, side="right")) - 1
        return min(max(i, 0), self.n_cells - 1)

    # range queries --------------------------------------------------------
    def _sparse(self):
        with self._rmq_lock:
            if self._rmq is None:
                self._rmq = {
                    "r_lo": _sparse_table(self.cell_range.lo, np.minimum, np.inf),
                    "r_hi": _sparse_table(self.cell_range.hi, np.maximum, -np.inf),
                    "d_lo": _sparse_table(self.d1.lo, np.minimum, np.inf),
                    "d_hi": _sparse_table(self.d1.hi, np.maximum, -np.inf),
                }
            return self._rmq

    def _hull_cells(self, which: str, i0: np.ndarray, i1: np.ndarray) -> IVec:
        """Hull of per-cell enclosures over the index ranges ``[i0, i1]``."""
        arr = self.cell_range if which == "r" else self.d1
        lo = np.minimum(arr.lo[i0], arr.lo[i1])
        hi = np.maximum(arr.hi[i0], arr.hi[i1])
        wide = i1 > i0 + 1
        if np.any(wide):
            rmq = self._sparse()
            a, b = i0[wide], i1[wide]
            lo[wide] = _query(rmq[which + "_lo"], a, b, np.minimum)
            hi[wide] = _query(rmq[which + "_hi"], a, b, np.maximum)
        return IVec(lo, hi)

    def _indices(self, X: IVec):
        nc = self.n_cells
        i0 = np.clip(np.searchsorted(self.nodes, X.lo, side="right") - 1, 0, nc - 1)
        i1 = np.clip(np.searchsorted(self.nodes, X.hi, side="left") - 1, 0, nc - 1)
        return i0, np.maximum(i1, i0)

    def _interp(self, X: IVec, i: np.ndarray) -> IVec:
        """omega on ``X`` clipped into cell ``i`` by linear interpolation.

        ``omega(x) = L(x) - omega''(xi) (x-a)(b-x)/2`` with L the chord.
        """
        a = self.nodes[i]
        b = self.nodes[i + 1]
        dt = b - a
        Xc = IVec(np.clip(X.lo, a, b), np.clip(X.hi, a, b))
        wa = (b - Xc) / dt
        wb = (Xc - a) / dt
        oa = IVec(self.node.lo[i], self.node.hi[i])
        ob = IVec(self.node.lo[i + 1], self.node.hi[i + 1])
        chord = oa * wa + ob * wb
        q = (Xc - a) * (b - Xc) * 0.5
        q = IVec(np.maximum(q.lo, 0.0), q.hi)
        d2 = IVec(self.d2.lo[i], self.d2.hi[i])
        return chord - d2 * q

    def _table_value(self, X: IVec) -> IVec:
        i0, i1 = self._indices(X)
        res = self._hull_cells("r", i0, i1)
        one = i1 == i0
        two = i1 == i0 + 1
        if np.any(one | two):
            r0 = self._interp(X, i0)
            i1s = np.minimum(i0 + 1, self.n_cells - 1)
            r1 = self._interp(X, i1s)
            narrow = IVec.where(two, r0.hull(r1), r0)
            sel = one | two
            res = IVec(np.where(sel, np.maximum(res.lo, narrow.lo), res.lo),
                       np.where(sel, np.minimum(res.hi, narrow.hi), res.hi))
        return res

    def _table_deriv(self, X: IVec) -> IVec:
        i0, i1 = self._indices(X)
        hull = self._hull_cells("d", i0, i1)
        dde = (self._value(X - 1.0)[0] - self._table_value(X)) / X
        return hull.intersect(dde)

    # vectorised evaluation ------------------------------------------------
    def _check_top(self, X: IVec):
        if np.any(X.hi > self.u_max):
            bad = float(np.max(X.hi))
            raise TableRangeError(f"omega query at u={bad!r} exceeds u_max={self.u_max!r}")

    def _value(self, X: IVec) -> tuple[IVec, int]:
        """Enclosure of omega over each interval of ``X``; returns guard hits."""
        X = IVec(np.broadcast_to(X.lo, X.shape).astype(np.float64),
                 np.broadcast_to(X.hi, X.shape).astype(np.float64))
        self._check_top(X)
        lo = np.full(X.shape, np.inf)
        hi = np.full(X.shape, -np.inf)

        def merge(mask, piece):
            nonlocal lo, hi
            lo = np.where(mask, np.minimum(lo, piece.lo), lo)
            hi = np.where(mask, np.maximum(hi, piece.hi), hi)

        below = X.lo < 1.0
        merge(below, IVec(0.0, 0.0))
        m1 = (X.hi >= 1.0) & (X.lo <= 2.0)
        if np.any(m1):
            merge(m1, _piece1(IVec(np.clip(X.lo, 1.0, 2.0), np.clip(X.hi, 1.0, 2.0))))
        m2 = (X.hi >= 2.0) & (X.lo <= 3.0)
        if np.any(m2):
            merge(m2, _piece2(IVec(np.clip(X.lo, 2.0, 3.0), np.clip(X.hi, 2.0, 3.0)))[0])
        m3 = X.hi >= 3.0
        if np.any(m3):
            merge(m3, self._table_value(IVec(np.clip(X.lo, 3.0, self.u_top),
                                             np.clip(X.hi, 3.0, self.u_top))))
        return IVec(lo, hi), int(np.count_nonzero(below))

    def _deriv(self, X: IVec) -> IVec:
        """Enclosure of the (Clarke) derivative of omega over ``X``.

        Unbounded where ``X`` reaches below 1, since omega jumps there.
        """
        X = IVec(np.broadcast_to(X.lo, X.shape).astype(np.float64),
                 np.broadcast_to(X.hi, X.shape).astype(np.float64))
        self._check_top(X)
        lo = np.full(X.shape, np.inf)
        hi = np.full(X.shape, -np.inf)

        def merge(mask, piece):
            nonlocal lo, hi
            lo = np.where(mask, np.minimum(lo, piece.lo), lo)
            hi = np.where(mask, np.maximum(hi, piece.hi), hi)

        below = X.lo < 1.0
        merge(below, IVec(-np.inf, np.inf))
        m1 = (X.hi >= 1.0) & (X.lo <= 2.0)
        if np.any(m1):
            merge(m1, _piece1_deriv(IVec(np.clip(X.lo, 1.0, 2.0), np.clip(X.hi, 1.0, 2.0))))
        m2 = (X.hi >= 2.0) & (X.lo <= 3.0)
        if np.any(m2):
            merge(m2, _piece2(IVec(np.clip(X.lo, 2.0, 3.0), np.clip(X.hi, 2.0, 3.0)))[1])
        m3 = X.hi >= 3.0
        if np.any(m3):
            merge(m3, self._table_deriv(IVec(np.clip(X.lo, 3.0, self.u_top),
                                             np.clip(X.hi, 3.0, self.u_top))))
        return IVec(lo, hi)

    def __repr__(self):
        return (f"BuchstabTable(u_max={self.u_max}, h={self.h}, "
                f"n_per_unit={self.n_per_unit}, cells={self.n_cells})")


def _sparse_table(values: np.ndarray, op, pad: float) -> np.ndarray:
    n = len(values)
    levels = max(1, n.bit_length())
    out = np.full((levels, n), pad)
    out[0] = values
    span = 1
    for k in range(1, levels):
        out[k, : n - 2 * span + 1] = op(out[k - 1, : n - 2 * span + 1],
                                        out[k - 1, span: n - span + 1])
        span *= 2
    return out


def _query(table: np.ndarray, i0: np.ndarray, i1: np.ndarray, op) -> np.ndarray:
    length = i1 - i0 + 1
    k = np.floor(np.log2(length)).astype(np.int64)
    return op(table[k, i0], table[k, i1 - (1 << k) + 1])


# construction ---------------------------------------------------------------

def build_table(u_max: float = 10.0, h: float = 1e-4) -> BuchstabTable:
    """Build a certified Buchstab table on ``[1, ceil(u_max)]``.

    The effective step is ``1/ceil(1/h)``, which never exceeds ``h``.
    """
    if not (isinstance(u_max, (int, float)) and math.isfinite(u_max) and u_max >= 9):
        raise ConfigError(f"u_max must be >= 9, got {u_max!r}")
    if not (isinstance(h, (int, float)) and 0 < h <= 1e-3):
        raise ConfigError(f"h must satisfy 0 < h <= 1e-3, got {h!r}")
    N = math.ceil(1.0 / h - 1e-9)
    K = math.ceil(u_max) - 1
    offsets = np.round(np.arange(N + 1) * (_DYADIC / N)) / _DYADIC
    dt = np.diff(offsets)
    nodes = np.concatenate([k + offsets[:-1] for k in range(1, K + 1)] + [np.array([K + 1.0])])

    n_cells = K * N
    node_lo = np.empty(n_cells + 1)
    node_hi = np.empty(n_cells + 1)
    W_lo = np.zeros(n_cells + 1)
    W_hi = np.zeros(n_cells + 1)
    c_lo, c_hi = np.empty(n_cells), np.empty(n_cells)
    d1_lo, d1_hi = np.empty(n_cells), np.empty(n_cells)
    d2_lo, d2_hi = np.empty(n_cells), np.empty(n_cells)

    def put(arr_lo, arr_hi, sl, v: IVec):
        arr_lo[sl] = v.lo
        arr_hi[sl] = v.hi

    # segment [1, 2]
    s = slice(0, N)
    x = nodes[0: N + 1]
    put(node_lo, node_hi, slice(0, N + 1), IVec(1.0) / x)
    W_lo[0: N + 1] = 1.0
    W_hi[0: N + 1] = 1.0
    X = IVec(nodes[0:N], nodes[1: N + 1])
    inv = X.recip()
    put(c_lo, c_hi, s, _piece1(X))
    put(d1_lo, d1_hi, s, -inv.sqr())
    put(d2_lo, d2_hi, s, inv.sqr() * inv * 2.0)

    # segment [2, 3]
    s = slice(N, 2 * N)
    x = nodes[N: 2 * N + 1]
    put(node_lo, node_hi, slice(N, 2 * N + 1), _point_piece2(x))
    put(W_lo, W_hi, slice(N, 2 * N + 1), IVec(x - 1.0).log() + 1.0)
    X = IVec(nodes[N: 2 * N], nodes[N + 1: 2 * N + 1])
    rng, der = _piece2(X)
    put(c_lo, c_hi, s, rng)
    put(d1_lo, d1_hi, s, der)
    put(d2_lo, d2_hi, s, (-((X - 1.0).recip().sqr()) - der * 2.0) / X)

    # segments [k, k+1], k >= 3: method of steps
    err_coeff = IVec(dt) * dt * dt / 12.0
    q_max = _up(dt * dt / 8.0)
    steps = np.arange(1, N + 1, dtype=np.float64)
    for k in range(3, K + 1):
        base = (k - 1) * N
        prev = slice(base - N, base)
        o_prev_a = IVec(node_lo[base - N: base], node_hi[base - N: base])
        o_prev_b = IVec(node_lo[base - N + 1: base + 1], node_hi[base - N + 1: base + 1])
        d2p = IVec(d2_lo[prev], d2_hi[prev])
        incr = (o_prev_a + o_prev_b) * dt * 0.5 - d2p * err_coeff

        # extended-precision prefix sums with a certified recursive-summation bound
        s_lo = np.cumsum(incr.lo.astype(_WIDE)) + _WIDE(W_lo[base])
        s_hi = np.cumsum(incr.hi.astype(_WIDE)) + _WIDE(W_hi[base])
        mag = np.cumsum(np.maximum(np.abs(incr.lo), np.abs(incr.hi))) + W_hi[base]
        corr = _up(_up((steps + 3.0) * mag) * _WIDE_EPS).astype(_WIDE)
        # casting to binary64 rounds to nearest; two outward steps cover it
        W_lo[base + 1: base + N + 1] = _down(_down((s_lo - corr).astype(np.float64)))
        W_hi[base + 1: base + N + 1] = _up(_up((s_hi + corr).astype(np.float64)))

        x = nodes[base + 1: base + N + 1]
        put(node_lo, node_hi, slice(base + 1, base + N + 1),
            IVec(W_lo[base + 1: base + N + 1], W_hi[base + 1: base + N + 1]) / x)

        cur = slice(base, base + N)
        a = nodes[base: base + N]
        b = nodes[base + 1: base + N + 1]
        X = IVec(a, b)
        oa = IVec(node_lo[base: base + N], node_hi[base: base + N])
        ob = IVec(node_lo[base + 1: base + N + 1], node_hi[base + 1: base + N + 1])
        if np.any(W_lo[base: base + N] <= 0.0):
            raise DomainError("non-positive W in Buchstab recursion")
        r0 = IVec(_down(W_lo[base: base + N] / b), _up(W_hi[base + 1: base + N + 1] / a))
        rp = IVec(c_lo[prev], c_hi[prev])
        d1p = IVec(d1_lo[prev], d1_hi[prev])
        d1_0 = (rp - r0) / X
        d2_0 = (d1p - d1_0 * 2.0) / X
        q = IVec(0.0, q_max)
        rng = (oa.hull(ob) - d2_0 * q).intersect(r0)
        der = ((rp - rng) / X).intersect(d1_0)
        der2 = ((d1p - der * 2.0) / X).intersect(d2_0)
        put(c_lo, c_hi, cur, rng)
        put(d1_lo, d1_hi, cur, der)
        put(d2_lo, d2_hi, cur, der2)

    return BuchstabTable(
        u_max=u_max, h=h, n_per_unit=N, offsets=offsets, nodes=nodes,
        node=IVec(node_lo, node_hi), W=IVec(W_lo, W_hi),
        cell=IVec(c_lo, c_hi), d1=IVec(d1_lo, d1_hi), d2=IVec(d2_lo, d2_hi),
    )


# scalar API -----------------------------------------------------------------

def omega_closed(u: Enclosure) -> Enclosure:
    """omega on ``u ⊆ [1, 3]`` from the closed forms (hull across u = 2)."""
    if u.lo < 1.0 or u.hi > 3.0:
        raise DomainError(f"omega_closed needs u within [1, 3], got {u!r}")
    X = IVec(np.array([u.lo]), np.array([u.hi]))
    lo, hi = np.inf, -np.inf
    if u.lo <= 2.0:
        p = _piece1(IVec(np.minimum(X.lo, 2.0), np.minimum(X.hi, 2.0)))
        lo, hi = min(lo, p.lo[0]), max(hi, p.hi[0])
    if u.hi >= 2.0:
        p = _piece2(IVec(np.maximum(X.lo, 2.0), np.maximum(X.hi, 2.0)))[0]
        lo, hi = min(lo, p.lo[0]), max(hi, p.hi[0])
    return Enclosure(float(lo), float(hi))


def omega(u: Enclosure, table: BuchstabTable) -> Enclosure:
    """Certified enclosure of omega over ``u`` using ``table``.

    Raises :class:`TableRangeError` above ``table.u_max``; never
    extrapolates. Inputs reaching slightly below 1 are hulled with 0.
    """
    if u.lo < 1.0 - U_LOWER_SLACK:
        raise DomainError(f"omega query below 1: {u!r}")
    if u.hi > table.u_max:
        raise TableRangeError(f"omega query at u={u.hi!r} exceeds u_max={table.u_max!r}")
    X = IVec(np.array([u.lo]), np.array([u.hi]))
    val, hits = table._value(X)
    if hits:
        log.warning("omega: u<1 convention applied for %r", u)
    res = Enclosure(float(val.lo[0]), float(val.hi[0]))
    if u.lo >= 1.0 and u.hi <= 3.0:
        i0, i1 = table._indices(X)
        cells = table._hull_cells("r", i0, i1)
        res = enc_intersect(res, Enclosure(float(cells.lo[0]), float(cells.hi[0])))
    return res
