import itertools
import math
import random
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from sievebounds.enclosure import Enclosure
from sievebounds.errors import DomainError
from sievebounds.oracle import omega_reference
from sievebounds.terms import (PRIMED, UNPRIMED, CellClass, TermId, closed_form_term, f4,
                               f4_array, f4_cell, integrand, sigma, term_spec, xi)

F = Fraction


def test_sixteen_terms():
    assert len(TermId) == 16
    assert len(PRIMED) == len(UNPRIMED) == 8
    assert TermId.parse("G6'") is TermId.G6p
    assert TermId.parse("g2") is TermId.G2
    with pytest.raises(DomainError):
        TermId.parse("G9")


@pytest.mark.parametrize("term", list(TermId))
def test_primed_terms_drop_one_power_of_alpha(term):
    spec = term_spec(term)
    base = term_spec(TermId(f"G{term.base}"))
    assert spec.alpha_power == base.alpha_power - (1 if term.primed else 0)
    assert spec.parts == base.parts
    assert spec.sign == (-1 if term.base == 6 else 1)
    assert spec.indicator == (term.base == 4)


@pytest.mark.parametrize("term", list(TermId))
def test_domains_nonempty(term):
    spec = term_spec(term)
    lo, hi = spec.alpha_range
    assert lo < hi
    for part in spec.parts:
        if part.lower is None:
            continue
        mid = (part.a_lo + part.a_hi) / 2
        assert part.lower.exact(mid) < part.upper.exact(mid)


def test_g1_is_sum_of_two_parts():
    assert len(term_spec("G1").parts) == 2


def test_sigma_xi():
    assert sigma(1).contains(F(1, 3))
    assert sigma(F(5, 4)).contains(F(1, 4)) and xi(F(5, 4)).contains(F(1, 4))
    assert sigma(F(7, 6)).contains(F(5, 18))


def test_f4_examples():
    assert f4(1.15, 0.14, 0.14, 0.14) == 0
    assert f4(1.15, 0.145, 0.145, 0.145) == 1


def test_f4_band_is_closed():
    a = F(23, 20)
    assert f4(a, F(3, 40), F(3, 40), F(1)) == 0  # b1 + b2 == a - 1
    hi = (2 - a) / 3
    assert f4(a, hi / 2, hi / 2, F(1)) == 0


def test_f4_permutation_symmetry():
    rng = random.Random(7)
    for _ in range(10_000):
        a = F(rng.uniform(8 / 7, 7 / 6))
        bs = [F(rng.uniform(0.0, 0.3)) for _ in range(3)]
        ref = f4(a, *bs)
        assert all(f4(a, *p) == ref for p in itertools.permutations(bs))


def test_f4_array_matches_exact():
    rng = np.random.default_rng(11)
    a = rng.uniform(8 / 7, 7 / 6, 2000)
    b = rng.uniform(0.0, 0.3, (3, 2000))
    arr = f4_array(a, *b)
    assert all(int(arr[i]) == f4(a[i], *b[:, i]) for i in range(2000))


def test_f4_cell_classes():
    a = Enclosure(1.15, 1.15)
    wide = Enclosure(0.3, 0.31)
    assert f4_cell(a, wide, wide, wide) is CellClass.INSIDE
    low = Enclosure(0.1, 0.11)
    assert f4_cell(a, low, low, Enclosure(0.2, 0.21)) is CellClass.OUTSIDE
    edge = Enclosure(0.14, 0.145)
    assert f4_cell(a, edge, edge, edge) is CellClass.BOUNDARY


def test_f4_cell_consistent_with_pointwise():
    rng = random.Random(3)
    for _ in range(500):
        a0 = rng.uniform(8 / 7, 7 / 6)
        bs = [rng.uniform(0.02, 0.3) for _ in range(3)]
        boxes = [Enclosure(b, b + 0.01) for b in bs]
        cls = f4_cell(Enclosure(a0, a0 + 1e-3), *boxes)
        corners = [f4(a, *c) for a in (a0, a0 + 1e-3)
                   for c in itertools.product(*[(b, b + 0.01) for b in bs])]
        if cls is CellClass.INSIDE:
            assert all(corners)
        elif cls is CellClass.OUTSIDE:
            assert not any(corners)


def test_integrand_g1_closed_form_region(table):
    e = integrand("G1", (1.05, 0.5), table)
    exact = F(105, 100) * F(10, 11) * 4
    assert e.contains(exact) or abs(e.mid - float(exact)) <= 4 * math.ulp(3.8)
    assert abs(e.mid - 3.8181818181818) < 1e-12
    p = integrand("G1p", (1.05, 0.5), table)
    assert abs(p.mid - e.mid / 1.05) <= e.width + p.width + 1e-15


def test_integrand_g6_against_reference(table):
    e = integrand("G6", (1.2, 0.25), table)
    ref = 1.2 * omega_reference(3.8) / 0.0625
    assert abs(e.mid - ref) <= e.width / 2 + 1e-8


def test_integrand_domain_checks(table):
    with pytest.raises(DomainError):
        integrand("G2", (1.5, 0.3), table)
    with pytest.raises(DomainError):
        integrand("G2", (1.1,), table)


def test_integrand_g4_indicator(table):
    assert integrand("G4", (1.15, 0.14, 0.14, 0.14), table) == Enclosure(0.0, 0.0)
    inside = integrand("G4", (1.15, 0.145, 0.145, 0.145), table)
    assert inside.lo > 0
    spread = integrand("G4", (Enclosure(1.15, 1.15),) + (Enclosure(0.14, 0.145),) * 3, table)
    assert spread.lo == 0.0 and spread.hi > 0


def test_closed_forms():
    assert closed_form_term("G0").contains(F(1, 6))
    assert closed_form_term("G5").contains(F(29, 72))
    assert closed_form_term("G5p").contains(F(1, 3))
    g7 = closed_form_term("G7", F(1312, 1000))
    assert g7.contains(F(317688, 10**6)) and g7.hi <= 0.31769
    assert closed_form_term("G7p", F(1317, 1000)).contains(F(268, 1000))
    g0p = closed_form_term("G0p")
    mpmath.mp.prec = 120
    assert mpmath.mpf(g0p.lo) <= mpmath.log(mpmath.mpf(7) / 6) <= mpmath.mpf(g0p.hi)
    assert g0p.hi <= 0.154151
    for t in ("G0", "G5", "G7", "G0p", "G5p", "G7p"):
        assert closed_form_term(t).width <= 1e-9


def test_closed_form_domain():
    with pytest.raises(DomainError):
        closed_form_term("G7", F(6, 5))
    with pytest.raises(DomainError):
        closed_form_term("G2")
