"""Independent, non-certified estimators used to cross-check the engine.

Nothing here touches the certified table: the Buchstab function is
recomputed by a plain trapezoid method of steps, and the sieve terms are
integrated over their full-dimensional domains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np

from .errors import ConfigError, DomainError
from .integrals import DEFAULT_TAU
from .terms import TermId, TermSpec, f4_array, term_spec

MC_CHUNK = 1 << 20
MIN_SAMPLES = 10_000
RHO_MAX = 10_000_000


@dataclass(frozen=True)
class OracleEstimate:
    mean: float
    stderr: float
    samples: int
    seed: int
    accepted: int = 0
    degenerate: bool = False

    def agrees_with(self, lo: float, hi: float, k: float = 4.0) -> bool:
        """Mean within ``k`` standard errors of the midpoint of ``[lo, hi]``.

        The enclosure half-width is added to the tolerance because the true
        value may sit anywhere in the enclosure.
        """
        mid = 0.5 * (lo + hi)
        slack = 0.5 * (hi - lo) + 1e-12 * abs(mid) + 1e-15
        return not self.degenerate and abs(self.mean - mid) <= k * self.stderr + slack


@dataclass(frozen=True)
class PrimitiveCount:
    x_max: int
    count: int

    @property
    def ratio(self) -> float:
        return self.count / (self.x_max - 1)


# Buchstab reference ---------------------------------------------------------------------

@lru_cache(maxsize=4)
def _omega_grid(n_per_unit: int, u_max: int) -> tuple[np.ndarray, np.ndarray]:
    h = 1.0 / n_per_unit
    u = 1.0 + h * np.arange((u_max - 1) * n_per_unit + 1)
    w = np.empty_like(u)
    w[: n_per_unit + 1] = 1.0 / u[: n_per_unit + 1]
    # u omega(u) = (u0 omega(u0)) + int_{u0}^u omega(t - 1) dt, unit by unit
    for k in range(1, u_max - 1):
        lo = k * n_per_unit
        prev = w[lo - n_per_unit: lo + 1]
        inc = np.concatenate([[0.0], np.cumsum(0.5 * h * (prev[1:] + prev[:-1]))])
        w[lo: lo + n_per_unit + 1] = (u[lo] * w[lo] + inc) / u[lo: lo + n_per_unit + 1]
    return u, w


def omega_reference(u, h: float = 1e-5, u_max: int = 10):
    """Buchstab function by the trapezoid method of steps (not certified).

    Accepts scalars or arrays; returns 0 below 1 and raises above ``u_max``.
    """
    n = int(round(1.0 / h))
    grid_u, grid_w = _omega_grid(n, u_max)
    arr = np.asarray(u, dtype=np.float64)
    if np.any(arr > u_max):
        raise DomainError(f"omega_reference defined up to u={u_max}")
    out = np.where(arr < 1.0, 0.0, np.interp(arr, grid_u, grid_w))
    return float(out) if out.ndim == 0 else out


# term integrands in physical coordinates -------------------------------------------------

def _bounding_box(spec: TermSpec) -> list[tuple[float, float]]:
    a_lo, a_hi = (float(x) for x in spec.alpha_range)
    box = [(a_lo, a_hi)]
    if spec.dimension == 1:
        return box
    lows = [float(p.lower.exact(a)) for p in spec.parts for a in (p.a_lo, p.a_hi)]
    ups = [float(p.upper.exact(a)) for p in spec.parts for a in (p.a_lo, p.a_hi)]
    b = (min(lows), max(ups))
    return box + [b] * (spec.dimension - 1)


def _point_values(spec: TermSpec, pts: np.ndarray) -> np.ndarray:
    """Integrand times domain multiplicity at physical points ``(n, dim)``."""
    a = pts[:, 0]
    weight = float(spec.coefficient) * a ** spec.alpha_power
    if spec.dimension == 1:
        return weight
    if spec.dimension == 2:
        b = pts[:, 1]
        mult = np.zeros(len(a))
        for p in spec.parts:
            lo = float(p.lower.c0) + float(p.lower.c1) * a
            up = float(p.upper.c0) + float(p.upper.c1) * a
            inside = (a >= float(p.a_lo)) & (a <= float(p.a_hi)) & (b >= lo) & (b <= up)
            mult += inside
        u = np.where(mult > 0, a / b - 1.0, 1.0)
        return mult * weight * omega_reference(u) / (b * b)
    b1, b2, b3 = pts[:, 1], pts[:, 2], pts[:, 3]
    p = spec.parts[0]
    floor = float(p.lower.c0) + float(p.lower.c1) * a
    top = a - 1.0
    inside = (b3 >= floor) & (b3 <= b2) & (b2 <= b1) & (b1 <= top)
    if spec.indicator:
        inside &= f4_array(a, b1, b2, b3)
    u = np.where(inside, (a - b1 - b2 - b3) / b3, 1.0)
    return np.where(inside, weight * omega_reference(u) / (b1 * b2 * b3 * b3), 0.0)


# estimators ---------------------------------------------------------------------------------

def mc_term(term: Union[str, TermId], samples: int, seed: int, tau=DEFAULT_TAU) -> OracleEstimate:
    """Plain Monte Carlo over the term's bounding box.

    Samples are drawn in fixed-size chunks, each from its own PCG64 stream
    spawned from ``SeedSequence(seed)``, so the estimate depends only on
    ``(term, samples, seed)``.
    """
    samples = int(samples)
    if samples < MIN_SAMPLES:
        raise ConfigError(f"samples must be >= {MIN_SAMPLES}, got {samples}")
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    spec = term_spec(term, tau)
    box = _bounding_box(spec)
    lo = np.array([b[0] for b in box])
    span = np.array([b[1] - b[0] for b in box])
    vol = float(np.prod(span))
    n_chunks = -(-samples // MC_CHUNK)
    streams = np.random.SeedSequence(seed).spawn(n_chunks)
    sums, sqs, accepted = [], [], 0
    for k, ss in enumerate(streams):
        n = min(MC_CHUNK, samples - k * MC_CHUNK)
        rng = np.random.Generator(np.random.PCG64(ss))
        pts = lo + rng.random((n, len(box))) * span
        v = np.broadcast_to(_point_values(spec, pts), (n,))
        accepted += int(np.count_nonzero(v))
        sums.append(math.fsum(v.tolist()))
        sqs.append(math.fsum((v * v).tolist()))
    mean = math.fsum(sums) / samples
    var = max(math.fsum(sqs) / samples - mean * mean, 0.0) * samples / max(samples - 1, 1)
    return OracleEstimate(mean * vol, vol * math.sqrt(var / samples), samples, seed,
                          accepted, accepted == 0)


def riemann_fast(term: Union[str, TermId], grid: int, tau=DEFAULT_TAU) -> float:
    """Midpoint rule with ``grid`` points per axis in unit coordinates.

    Inner variables are mapped onto their nested limits, so the rule never
    straddles a domain edge; the indicator of G4 is applied pointwise.
    """
    if grid < 10:
        raise ConfigError("grid must be >= 10 per dimension")
    spec = term_spec(term, tau)
    axis = (np.arange(grid) + 0.5) / grid
    total = []
    for part in spec.parts:
        a0, a1 = float(part.a_lo), float(part.a_hi)
        da = a1 - a0
        a = a0 + axis * da
        w = float(spec.coefficient) * a ** spec.alpha_power
        if spec.dimension == 1:
            total.append(math.fsum((w * da).tolist()) / grid)
            continue
        lo_c = (float(part.lower.c0), float(part.lower.c1))
        up_c = (float(part.upper.c0), float(part.upper.c1))
        if spec.dimension == 2:
            for i in range(grid):
                lo = lo_c[0] + lo_c[1] * a[i]
                up = max(up_c[0] + up_c[1] * a[i], lo)
                b = lo + axis * (up - lo)
                f = omega_reference(np.maximum(a[i] / b - 1.0, 1.0)) / (b * b)
                total.append(w[i] * da * (up - lo) * math.fsum(f.tolist()) / grid**2)
            continue
        s1, s2, s3 = np.meshgrid(axis, axis, axis, indexing="ij")
        for i in range(grid):
            L = lo_c[0] + lo_c[1] * a[i]
            M = up_c[0] + up_c[1] * a[i]
            b1 = L + s1 * (M - L)
            b2 = L + s2 * (b1 - L)
            b3 = L + s3 * (b2 - L)
            jac = (M - L) * (b1 - L) * (b2 - L)
            f = jac * omega_reference((a[i] - b1 - b2 - b3) / b3) / (b1 * b2 * b3 * b3)
            if spec.indicator:
                f = np.where(f4_array(a[i], b1, b2, b3), f, 0.0)
            total.append(w[i] * da * math.fsum(f.ravel().tolist()) / grid**4)
    return math.fsum(total)


# primitive divisors -----------------------------------------------------------------------

def _primes_upto(n: int) -> np.ndarray:
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, math.isqrt(n) + 1):
        if sieve[p]:
            sieve[p * p:: p] = False
    return np.flatnonzero(sieve)


def _sqrt_minus_one(p: int) -> int:
    """A root of ``r^2 = -1 (mod p)`` for a prime ``p = 1 (mod 4)``."""
    for c in range(2, p):
        if pow(c, (p - 1) // 2, p) == p - 1:
            return pow(c, (p - 1) // 4, p)
    raise DomainError(f"no root of -1 modulo {p}")


def largest_prime_factors(x_max: int) -> np.ndarray:
    """``P+(n^2 + 1)`` for ``n = 0 .. x_max`` (index ``n``).

    Sieves out every prime up to ``2 x_max`` along the residue classes of
    the roots of ``-1``; a cofactor left above 1 exceeds ``2 x_max > n`` and
    ``n^2 + 1`` has at most one prime factor above ``n``, so it is prime.
    """
    n = np.arange(x_max + 1, dtype=np.int64)
    rest = n * n + 1
    big = np.ones(x_max + 1, dtype=np.int64)
    for p in _primes_upto(max(2 * x_max, 2)).tolist():
        if p == 2:
            roots = (1,)
        elif p % 4 == 1:
            r = _sqrt_minus_one(p)
            roots = (r, p - r)
        else:
            continue
        for r in roots:
            idx = np.arange(r, x_max + 1, p)
            if idx.size == 0:
                continue
            big[idx] = p
            sub = rest[idx]
            while True:
                div = sub % p == 0
                if not div.any():
                    break
                sub = np.where(div, sub // p, sub)
            rest[idx] = sub
    return np.where(rest > 1, rest, big)


def empirical_rho(x_max: int) -> PrimitiveCount:
    """Count ``2 <= n <= x_max`` with ``P+(n^2 + 1) > 2n``."""
    if not isinstance(x_max, (int, np.integer)) or not 2 <= x_max <= RHO_MAX:
        raise ConfigError(f"x_max must be an integer in [2, {RHO_MAX}], got {x_max!r}")
    x_max = int(x_max)
    big = largest_prime_factors(x_max)
    n = np.arange(x_max + 1, dtype=np.int64)
    count = int(np.count_nonzero(big[2:] > 2 * n[2:]))
    return PrimitiveCount(x_max, count)


def _prime_factors(m: int) -> set[int]:
    out = set()
    d = 2
    while d * d <= m:
        while m % d == 0:
            out.add(d)
            m //= d
        d += 1
    if m > 1:
        out.add(m)
    return out


def primitive_count_by_definition(x_max: int) -> PrimitiveCount:
    """Count ``2 <= n <= x_max`` whose ``n^2 + 1`` has a prime not dividing any earlier term."""
    if not 2 <= x_max <= 100_000:
        raise ConfigError("definition-level counter is limited to x_max <= 1e5")
    seen: set[int] = set()
    count = 0
    for n in range(1, x_max + 1):
        ps = _prime_factors(n * n + 1)
        if n >= 2 and not ps <= seen:
            count += 1
        seen |= ps
    return PrimitiveCount(x_max, count)
