from fractions import Fraction

import pytest

from sievebounds.enclosure import Enclosure, enc_add
from sievebounds.errors import ConfigError, InfeasibleError
from sievebounds.integrals import (QuadratureConfig, admissible_tau, compute_term, fixed_sum,
                                   primed_fixed_sum, rho_coefficient, solve_tau, total_S)
from sievebounds.report import LEGACY_VALUES, TARGET_CHECKS
from sievebounds.terms import HALF, SIGMA, Part, TermId, TermSpec, closed_form_term, term_spec

F = Fraction
TWO_DIM = [TermId(t) for t in ("G1", "G2", "G3", "G6", "G1p", "G2p", "G3p", "G6p")]
ROUNDED_PRIMED_BOUNDS = {
    "G0p": 0.154151, "G1p": 0.027475, "G2p": 0.077933, "G3p": 0.026835,
    "G4p": 0.00009, "G5p": F(1, 3), "G6p": 0.05016,
}


def enc_of(x) -> Enclosure:
    return Enclosure.from_fraction(F(x))


@pytest.mark.parametrize("term", list(TARGET_CHECKS))
def test_claimed_bounds(rigorous, term):
    r = rigorous[term]
    assert r.certified and not r.budget_exceeded
    for check in TARGET_CHECKS[term]:
        assert check.holds(r.enclosure), check.describe()


def test_config_validation():
    for kwargs in ({"mode": "exact"}, {"route": "x"}, {"target_width": 0.0},
                   {"target_width": float("inf")}, {"max_cells": 0}, {"workers": 0}):
        with pytest.raises(ConfigError):
            QuadratureConfig(**kwargs)


def test_empty_inner_range_contributes_zero(table):
    spec = TermSpec(TermId.G1, 2, (Part(F(1), F(17, 16), HALF, SIGMA),), 1)
    r = compute_term(spec, QuadratureConfig(), table)
    assert r.enclosure == Enclosure(0.0, 0.0)


def test_degenerate_slice_at_range_end(table):
    part = term_spec("G1").parts[0]
    assert part.lower.exact(1) == part.upper.exact(1) == F(1, 3)


@pytest.mark.parametrize("i", [1, 2, 3, 4, 6])
def test_primed_unprimed_sandwich(rigorous, i):
    g = rigorous[TermId(f"G{i}")].enclosure
    gp = rigorous[TermId(f"G{i}p")].enclosure
    a_min, a_max = (float(x) for x in term_spec(f"G{i}").alpha_range)
    assert a_min * gp.lo <= g.hi
    assert g.lo <= a_max * gp.hi


@pytest.mark.parametrize("term", ["G4", "G4p"])
def test_indicator_only_removes_mass(rigorous, table, term):
    free = compute_term(term_spec(term).without_indicator(), QuadratureConfig(), table)
    assert rigorous[TermId(term)].enclosure.hi <= free.enclosure.hi


@pytest.mark.parametrize("term", TWO_DIM)
def test_halving_width_nests(rigorous, table, term):
    coarse = compute_term(term, QuadratureConfig(target_width=2e-9), table).enclosure
    fine = rigorous[term].enclosure
    assert coarse.lo <= fine.lo and fine.hi <= coarse.hi


@pytest.mark.parametrize("term", list(TermId))
def test_fast_estimate_inside_rigorous(rigorous, fast, term):
    r, f = rigorous[term], fast[term]
    assert not f.certified and f.enclosure.lo == f.enclosure.hi
    assert r.enclosure.contains(f.enclosure.mid)


@pytest.mark.parametrize("workers", [1, 4, 8])
@pytest.mark.parametrize("term", ["G1", "G4"])
def test_bit_reproducible_across_workers(rigorous, table, term, workers):
    r = compute_term(term, QuadratureConfig(workers=workers), table)
    ref = rigorous[TermId(term)]
    assert (r.enclosure.lo, r.enclosure.hi, r.cells_evaluated) == (
        ref.enclosure.lo, ref.enclosure.hi, ref.cells_evaluated)


def test_g1_parts(rigorous):
    p0, p1 = rigorous[TermId.G1].parts
    assert p0.lo >= 0 and p1.lo >= 0
    assert enc_add(p0, p1) == enc_add(p1, p0) == rigorous[TermId.G1].enclosure


def test_two_dimensional_terms_stay_in_table_range(rigorous):
    for t in TWO_DIM:
        assert rigorous[t].guard_hits == 0
    assert rigorous[TermId.G4].guard_hits >= 0


def test_direct_route_agrees(rigorous, table):
    for term in ("G1", "G6"):
        d = compute_term(term, QuadratureConfig(route="direct"), table)
        assert d.enclosure.width <= 5e-6
        assert d.enclosure.overlaps(rigorous[TermId(term)].enclosure)


def test_budget_exceeded_is_flagged(table):
    r = compute_term("G4", QuadratureConfig(max_cells=10), table)
    assert r.budget_exceeded


def test_total_at_five_quarters_is_fixed_sum(rigorous):
    assert total_S(F(5, 4), rigorous) == fixed_sum(rigorous)


def test_total_missing_term(rigorous):
    partial = {t: r for t, r in rigorous.items() if t is not TermId.G3}
    with pytest.raises(ConfigError):
        total_S(F(1317, 1000), partial)


def test_total_and_exponent(rigorous):
    assert total_S(F(1317, 1000), rigorous).hi < 0.9993
    tau = solve_tau(rigorous)
    assert 1.317 <= tau.lo <= 1.318
    assert total_S(tau.lo, rigorous).hi <= 1.0
    assert str(admissible_tau(tau)) == "1.3171"


def _legacy_results():
    res = {t: enc_of(v) for t, v in LEGACY_VALUES.items()}
    res[TermId.G0] = closed_form_term("G0")
    res[TermId.G5] = closed_form_term("G5")
    return res


def test_legacy_aggregate():
    res = _legacy_results()
    assert total_S(F(1312, 1000), res).hi < 0.998
    assert solve_tau(res).lo >= 1.312


def test_infeasible_fixed_sum():
    res = {TermId(f"G{i}"): Enclosure(0.0, 0.0) for i in range(7)}
    res[TermId.G0] = Enclosure(1.1, 1.1)
    with pytest.raises(InfeasibleError):
        solve_tau(res)


def test_rho_coefficient(rigorous):
    assert rho_coefficient(F(1317, 1000), rigorous).hi < 0.838
    base = rho_coefficient(F(5, 4), rigorous)
    assert base == primed_fixed_sum(rigorous)
    step = rho_coefficient(F(1317, 1000), rigorous)
    g7p = closed_form_term("G7p", F(1317, 1000))
    assert g7p.contains(F(268, 1000))
    assert step == enc_add(base, g7p)


def test_rho_at_rounded_primed_bounds():
    res = {TermId(t): enc_of(v) for t, v in ROUNDED_PRIMED_BOUNDS.items()}
    assert abs(rho_coefficient(F(5, 4), res).mid - 0.5697) < 1e-4


def test_admissible_tau_truncates():
    assert str(admissible_tau(Enclosure(1.31719, 1.3172))) == "1.3171"
    # binary64 1.317 lies just below 1.317
    assert str(admissible_tau(Enclosure(1.317, 1.3171))) == "1.3169"
    assert str(admissible_tau(Enclosure(1.31700001, 1.3171))) == "1.3170"
