import logging
import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from sievebounds.buchstab import build_table, omega, omega_closed
from sievebounds.enclosure import Enclosure
from sievebounds.errors import ConfigError, DomainError, TableRangeError
from sievebounds.oracle import omega_reference

E_NEG_GAMMA = math.exp(-0.5772156649015329)


def point(x) -> Enclosure:
    return Enclosure.from_fraction(Fraction(x))


@pytest.fixture(scope="module")
def half_table():
    return build_table(10.0, 5e-5)


def test_closed_form_examples():
    assert omega_closed(point(Fraction(3, 2))).contains(Fraction(2, 3))
    at2 = omega_closed(point(2))
    assert at2.contains(Fraction(1, 2))
    mpmath.mp.prec = 120
    ref = (1 + mpmath.log(mpmath.mpf(1.5))) / mpmath.mpf(2.5)
    e = omega_closed(point(2.5))
    assert mpmath.mpf(e.lo) <= ref <= mpmath.mpf(e.hi)


def test_closed_form_straddling_joint_hulls_both_pieces():
    e = omega_closed(Enclosure(1.9, 2.1))
    assert e.contains(Fraction(1, 2))
    assert e.hi >= 1 / 1.9
    assert e.contains((1 + math.log(1.1)) / 2.1)


def test_closed_form_domain():
    with pytest.raises(DomainError):
        omega_closed(Enclosure(0.5, 1.5))
    with pytest.raises(DomainError):
        omega_closed(Enclosure(2.5, 3.5))


def test_table_at_three_matches_closed_form(table):
    mpmath.mp.prec = 120
    ref = (1 + mpmath.log(2)) / 3
    e = omega(point(3), table)
    assert mpmath.mpf(e.lo) <= ref <= mpmath.mpf(e.hi)


def test_cells_on_first_segment_follow_reciprocal(table):
    N = table.n_per_unit
    lo = table.cell_range.lo[:N]
    hi = table.cell_range.hi[:N]
    a, b = table.nodes[:N], table.nodes[1:N + 1]
    assert np.all(lo <= 1.0 / b) and np.all(hi >= 1.0 / a)
    assert np.all(lo >= np.nextafter(np.nextafter(1.0 / b, 0), 0))
    assert np.all(hi <= np.nextafter(np.nextafter(1.0 / a, 2), 2))


def test_value_at_eight(table):
    e = omega(point(8), table)
    assert e.width <= 1e-3
    assert abs(e.mid - 0.5614594836) <= 1e-4


def test_point_queries(table):
    assert omega(point(1), table).contains(1)
    e = omega(Enclosure(1.2, 1.4), table)
    assert e.lo >= 1 / 1.4 - 1e-12 and e.hi <= 1 / 1.2 + 1e-12


def test_wide_query_self_refinement(table):
    fine = build_table(10.0, table.h / 10)
    e = omega(Enclosure(5.9, 6.1), table)
    f = omega(Enclosure(5.9, 6.1), fine)
    assert e.width <= 10 * table.h + 1e-3
    assert abs(e.mid - f.mid) <= 2e-3


def test_range_error_above_umax(table):
    with pytest.raises(TableRangeError):
        omega(Enclosure(9.5, 10.5), table)


def test_query_below_one_rejected(table):
    with pytest.raises(DomainError):
        omega(Enclosure(0.5, 1.0), table)


def test_guard_is_logged(table, caplog):
    with caplog.at_level(logging.WARNING, logger="sievebounds"):
        e = omega(Enclosure(1.0 - 1e-13, 1.0), table)
    assert e.lo == 0.0 and e.hi >= 1.0
    assert any("u<1" in r.getMessage() for r in caplog.records)


@pytest.mark.parametrize("u_max,h", [(8, 1e-4), (10, 0.0), (10, 2e-3), (float("nan"), 1e-4)])
def test_invalid_configuration(u_max, h):
    with pytest.raises(ConfigError):
        build_table(u_max, h)


def test_table_invariants(table):
    lo, hi = table.cell_range.lo, table.cell_range.hi
    assert np.all(lo <= hi)
    assert np.all(np.maximum(lo[:-1], lo[1:]) <= np.minimum(hi[:-1], hi[1:]))
    assert np.all((hi >= 0.5) & (lo <= 1.0))
    assert table.n_cells * table.step >= table.u_max - 1 - 1e-12


def test_fine_grid_enclosures(table):
    us = np.linspace(1.0, 10.0, 9001)
    for u in us.tolist():
        e = omega(Enclosure(u, u), table)
        assert e.hi >= 0.5 and e.lo <= 1.0
        if e.width <= 1e-4:
            assert e.lo >= 0.4999


def test_agrees_with_independent_reference(table):
    us = np.linspace(1.0, 10.0, 2001)
    ref = omega_reference(us)
    for u, r in zip(us.tolist(), ref.tolist()):
        e = omega(Enclosure(u, u), table)
        assert e.lo - 1e-9 <= r <= e.hi + 1e-9


def _dilog_closed_form(u):
    """omega on [3, 4] by direct integration of the [2, 3] closed form."""
    u = mpmath.mpf(u)
    inner = mpmath.quad(lambda t: (1 + mpmath.log(t - 2)) / (t - 1), [3, u])
    return (1 + mpmath.log(2) + inner) / u


def test_third_segment_against_high_precision_quadrature(table):
    mpmath.mp.prec = 80
    for u in (3.25, 3.5, 3.75, 4.0):
        e = omega(point(u), table)
        ref = _dilog_closed_form(u)
        assert mpmath.mpf(e.lo) <= ref <= mpmath.mpf(e.hi)
        assert e.width < 1e-10


def test_joint_consistency(table):
    for joint in (2.0, 3.0):
        left = omega(Enclosure(math.nextafter(joint, 0), math.nextafter(joint, 0)), table)
        right = omega(Enclosure(math.nextafter(joint, 9), math.nextafter(joint, 9)), table)
        assert abs(left.mid - right.mid) <= left.width + right.width + 1e-15


def test_prefix_integral_is_monotone(table):
    lo = [table.integral_prefix(i).lo for i in range(0, table.n_cells + 1, 7)]
    hi = [table.integral_prefix(i).hi for i in range(0, table.n_cells + 1, 7)]
    assert np.all(np.diff(lo) >= 0) and np.all(np.diff(hi) >= 0)


def _widen2(e: Enclosure) -> tuple[float, float]:
    return (math.nextafter(math.nextafter(e.lo, -math.inf), -math.inf),
            math.nextafter(math.nextafter(e.hi, math.inf), math.inf))


def _cells_touching(table, u: float) -> Enclosure:
    i0 = max(int(np.searchsorted(table.nodes, u, side="left")) - 1, 0)
    i1 = min(int(np.searchsorted(table.nodes, u, side="right")) - 1, table.n_cells - 1)
    return Enclosure(float(table.cell_range.lo[i0:i1 + 1].min()),
                     float(table.cell_range.hi[i0:i1 + 1].max()))


def test_half_step_points_nest_in_step_points(table, half_table):
    for u in np.linspace(1.0, 10.0, 4001).tolist():
        fine = omega(Enclosure(u, u), half_table)
        lo, hi = _widen2(omega(Enclosure(u, u), table))
        assert lo <= fine.lo and fine.hi <= hi, u


def test_half_step_points_nest_in_step_cells(table, half_table):
    for u in np.linspace(1.0, 10.0, 4001).tolist():
        fine = omega(Enclosure(u, u), half_table)
        lo, hi = _widen2(_cells_touching(table, u))
        assert lo <= fine.lo and fine.hi <= hi, u


def test_half_step_points_overlap_step_points(table, half_table):
    for u in np.linspace(1.0, 10.0, 4001).tolist():
        assert omega(Enclosure(u, u), half_table).overlaps(omega(Enclosure(u, u), table))


def test_midpoint_at_eight_against_fine_independent_run(table):
    fine = build_table(10.0, 1e-5)
    e = omega(point(8), table)
    assert abs(e.mid - omega(point(8), fine).mid) <= 1e-4
    assert abs(e.mid - E_NEG_GAMMA) <= 1e-4
