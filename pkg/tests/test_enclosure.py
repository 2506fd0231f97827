import math
import random
import sys
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sievebounds.enclosure import (Enclosure, enc, enc_add, enc_div, enc_hull, enc_intersect,
                                   enc_log, enc_mul, enc_ratio, enc_sqrt, enc_sub, enc_width)
from sievebounds.errors import DomainError

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)


@st.composite
def intervals(draw):
    a, b = draw(finite), draw(finite)
    return Enclosure(min(a, b), max(a, b))


def test_add_exact_integers():
    assert enc_add(Enclosure(1, 1), Enclosure(2, 2)) == Enclosure(3, 3)


def test_mul_sign_cases():
    assert enc_mul(Enclosure(-1, 2), Enclosure(3, 3)) == Enclosure(-3, 6)


def test_div_third_is_tight():
    e = enc_div(Enclosure(1, 1), Enclosure(3, 3))
    assert e.lo < Fraction(1, 3) < e.hi
    assert e.hi == math.nextafter(e.lo, 1.0)


def test_div_by_zero_interval():
    with pytest.raises(DomainError):
        enc_div(Enclosure(1, 1), Enclosure(-1, 1))


def test_log_one():
    e = enc_log(Enclosure(1, 1))
    assert e.contains(0)
    assert e.width <= 2 * math.ulp(0.0)


def test_log_one_and_a_half():
    mpmath.mp.prec = 200
    e = enc_log(Enclosure(1.5, 1.5))
    assert Fraction(e.lo) < Fraction(str(mpmath.log(mpmath.mpf(1.5)))) < Fraction(e.hi)


def test_log_nonpositive():
    with pytest.raises(DomainError):
        enc_log(Enclosure(0.0, 1.0))


def test_sqrt_four():
    assert enc_sqrt(Enclosure(4, 4)).contains(2)


def test_sqrt_negative():
    with pytest.raises(DomainError):
        enc_sqrt(Enclosure(-1, 1))


def test_hull_and_width():
    assert enc_hull(Enclosure(0, 1), Enclosure(2, 3)) == Enclosure(0, 3)
    assert enc_width(Enclosure(0, 0)) == 0
    a = Enclosure(0.25, 7.5)
    assert enc_hull(a, a) == a


def test_intersect_disjoint():
    with pytest.raises(DomainError):
        enc_intersect(Enclosure(0, 1), Enclosure(2, 3))


def test_invalid_enclosures():
    with pytest.raises(DomainError):
        Enclosure(2.0, 1.0)
    with pytest.raises(DomainError):
        Enclosure(float("nan"), 1.0)


def test_rational_constants_as_exact_ratios():
    for p, q in ((1, 6), (7, 6), (17, 16), (8, 7), (5, 4), (29, 72)):
        e = enc_ratio(p, q)
        assert e.contains(Fraction(p, q))
        assert e == Enclosure.from_fraction(Fraction(p, q))


def test_exact_membership():
    e = Enclosure.from_fraction(Fraction(1, 3))
    assert e.contains(Fraction(1, 3))
    assert Enclosure(0.0, 0.1).contains(Fraction(1, 10)) == (Fraction(0.1) >= Fraction(1, 10))


OPS = [(enc_add, lambda x, y: x + y), (enc_sub, lambda x, y: x - y),
       (enc_mul, lambda x, y: x * y)]


def test_containment_random_pairs():
    rng = random.Random(20240607)
    for _ in range(100_000):
        a = sorted((rng.uniform(-10, 10), rng.uniform(-10, 10)))
        b = sorted((rng.uniform(-10, 10), rng.uniform(-10, 10)))
        ea, eb = Enclosure(*a), Enclosure(*b)
        x = Fraction(rng.choice(a))
        y = Fraction(rng.choice(b))
        op, ref = OPS[rng.randrange(3)]
        assert op(ea, eb).contains(ref(x, y))


@settings(max_examples=300, deadline=None)
@given(intervals(), intervals(), st.floats(0, 1), st.floats(0, 1))
def test_division_contains_exact_quotient(a, b, s, t):
    if b.lo <= 0 <= b.hi:
        return
    x = Fraction(a.lo) + Fraction(s) * (Fraction(a.hi) - Fraction(a.lo))
    y = Fraction(b.lo) + Fraction(t) * (Fraction(b.hi) - Fraction(b.lo))
    try:
        q = enc_div(a, b)
    except DomainError:
        assert max(abs(Fraction(a.lo)), abs(Fraction(a.hi))) / min(
            abs(Fraction(b.lo)), abs(Fraction(b.hi))) > Fraction(sys.float_info.max)
        return
    assert q.contains(x / y)


def test_overflow_is_reported():
    with pytest.raises(DomainError):
        enc_mul(Enclosure(1e300, 1e300), Enclosure(1e300, 1e300))


@settings(max_examples=300, deadline=None)
@given(st.floats(min_value=1e-300, max_value=1e300))
def test_log_and_sqrt_contain_reference(x):
    mpmath.mp.prec = 120
    e = enc_log(Enclosure(x, x))
    r = mpmath.log(mpmath.mpf(x))
    assert mpmath.mpf(e.lo) <= r <= mpmath.mpf(e.hi)
    s = enc_sqrt(Enclosure(x, x))
    assert Fraction(s.lo) ** 2 <= Fraction(x) <= Fraction(s.hi) ** 2


@settings(max_examples=200, deadline=None)
@given(intervals(), intervals(), st.floats(0, 10), st.floats(0, 10))
def test_inclusion_monotonicity(a, b, da, db):
    wa = Enclosure(a.lo - da, a.hi + da)
    wb = Enclosure(b.lo - db, b.hi + db)
    for op, _ in OPS:
        assert op(a, b).subset_of(op(wa, wb))


def test_determinism():
    a, b = Enclosure(0.1, 0.3), Enclosure(1.7, 2.9)
    assert [enc_div(a, b) for _ in range(3)] == [enc_div(a, b)] * 3


def test_operator_sugar():
    a = enc(Fraction(1, 3))
    assert (a + 1).contains(Fraction(4, 3))
    assert (1 - a).contains(Fraction(2, 3))
    assert (a * 3).contains(1)
    assert (1 / a).contains(3)
    assert (-a).contains(Fraction(-1, 3))
