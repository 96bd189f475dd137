import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kochlab.diophantine import (cf_expand, cf_from_quotients, is_diophantine_D,
                                 min_orbit_distance, min_orbit_distances, ostrovski_expand,
                                 rotate)
from kochlab.errors import DepthError, DomainError, PrecisionError


def exact_cf(fr: Fraction, depth):
    """Euclid on an exact rational: the oracle for quotient sequences."""
    out = []
    x = fr
    while len(out) < depth and x:
        y = 1 / x
        a = math.floor(y)
        out.append(a)
        x = y - a
    return out


def test_golden_table():
    cf = cf_expand("golden", 6)
    assert cf.partial_quotients == (1,) * 6
    assert cf.denominators == (1, 1, 2, 3, 5, 8, 13)


def test_sqrt2_table():
    # q_0 = 1, q_1 = a_1 = 2, then q_{n+1} = 2 q_n + q_{n-1}
    cf = cf_expand("sqrt2", 5)
    assert cf.partial_quotients == (2,) * 5
    assert cf.denominators == (1, 2, 5, 12, 29, 70)


def test_sqrt2_from_decimal_string_matches_named():
    s = mpmath.nstr(mpmath.sqrt(2) - 1, 40)
    assert cf_expand(s, 20).partial_quotients == cf_expand("sqrt2", 20).partial_quotients


@pytest.mark.parametrize("fr", [Fraction(1, 3) + Fraction(1, 10 ** 12),
                                Fraction(1, 3) - Fraction(1, 10 ** 12)])
def test_near_one_third_against_rational_oracle(fr):
    cf = cf_expand(fr, 1)
    assert list(cf.partial_quotients) == exact_cf(fr, 1)
    assert cf.partial_quotients[0] in (2, 3)


@given(st.fractions(min_value=Fraction(1, 1000), max_value=Fraction(999, 1000),
                    max_denominator=10 ** 6))
@settings(max_examples=60, deadline=None)
def test_rational_expansion_matches_euclid(fr):
    ref = exact_cf(fr, 50)
    d = len(ref)
    if ref[-1] == 1 and d > 1:
        d -= 1  # the last quotient may be written either way
    assert list(cf_expand(fr, d).partial_quotients) == ref[:d]


def test_rational_runs_out():
    with pytest.raises(PrecisionError):
        cf_expand(Fraction(2, 7), 10)


def test_float_precision_limit():
    with pytest.raises(PrecisionError):
        cf_expand(0.6180339887498949, 60)


def test_alpha_domain():
    with pytest.raises(DomainError):
        cf_expand(Fraction(3, 2), 3)
    with pytest.raises(DomainError):
        cf_expand("golden", 0)


@pytest.mark.parametrize("name", ["golden", "sqrt2"])
def test_best_approximation(name):
    cf = cf_expand(name, 30)
    with mpmath.workdps(60):
        exact = {"golden": (mpmath.sqrt(5) - 1) / 2, "sqrt2": mpmath.sqrt(2) - 1}[name]
        for n in range(cf.depth):
            q = cf.q(n)
            dist = abs(q * exact - mpmath.nint(q * exact))
            assert dist < mpmath.mpf(1) / cf.q(n + 1)


@given(st.lists(st.integers(1, 50), min_size=2, max_size=25))
def test_recursion_invariant(quotients):
    cf = cf_from_quotients(quotients)
    q = cf.denominators
    assert q[0] == 1 and q[1] == quotients[0]
    for n in range(1, len(quotients)):
        assert q[n + 1] == quotients[n] * q[n] + q[n - 1]
    assert all(b > a for a, b in zip(q[1:], q[2:]))


def test_class_D_golden():
    assert is_diophantine_D(cf_expand("golden", 20), 2).passed


def test_class_D_injected_large_quotient():
    cert = is_diophantine_D(cf_from_quotients([1, 1, 1, 1, 10 ** 6, 1, 1]), 2)
    assert not cert.passed and cert.first_failure == 4


def test_class_D_sqrt2_against_direct_ratios():
    cf = cf_expand("sqrt2", 20)
    q = cf.denominators
    worst = max(q[n + 1] / (q[n] * max(1.0, math.log(q[n]) ** 2)) for n in range(len(q) - 1))
    cert = is_diophantine_D(cf, 3)
    assert cert.passed and cert.worst_ratio == pytest.approx(worst, rel=1e-15)
    assert cert.passed == (cert.worst_ratio <= 3)


def greedy(N, qs):
    digits = {}
    for k in range(len(qs) - 1, -1, -1):
        if qs[k] <= N:
            digits[k], N = divmod(N, qs[k])
    return digits


def test_ostrovski_four_golden():
    d = ostrovski_expand(4, cf_expand("golden", 10))
    # q = 1, 1, 2, 3, ... ; 4 = 3 + 1 (the duplicated q_0 = q_1 = 1 collapses onto q_1)
    assert d.reconstruct() == 4
    assert d.digits[3] == 1 and d.nonzero == 2
    assert {k: b for k, b in greedy(4, d.cf.denominators).items() if b} == \
        {k: b for k, b in enumerate(d.digits) if b}


def test_ostrovski_hundred_sqrt2():
    cf = cf_expand("sqrt2", 10)
    d = ostrovski_expand(100, cf)
    used = {cf.q(k): b for k, b in enumerate(d.digits) if b}
    assert d.reconstruct() == 100
    assert sum(q * b for q, b in used.items()) == 100
    assert used == {q: b for q, b in ((cf.q(k), b) for k, b in greedy(100, cf.denominators).items()) if b}


@pytest.mark.parametrize("n", range(1, 15))
def test_ostrovski_single_digit_at_denominator(n):
    cf = cf_expand("golden", 20)
    d = ostrovski_expand(cf.q(n), cf)
    assert d.nonzero == 1 and d.reconstruct() == cf.q(n)


@given(st.integers(1, 10 ** 7))
def test_ostrovski_roundtrip_and_digit_bounds(N):
    cf = cf_expand("sqrt2", 25)
    d = ostrovski_expand(N, cf)
    assert d.reconstruct() == N
    for k in range(1, len(d.digits)):
        assert d.digits[k] <= cf.a(k + 1) if k + 1 <= cf.depth else True
    assert cf.q(d.top) <= N < cf.q(d.top + 1) or cf.q(d.top) == cf.q(d.top + 1)


def test_ostrovski_out_of_range():
    with pytest.raises(DepthError):
        ostrovski_expand(10 ** 9, cf_expand("golden", 10))


def test_min_orbit_distance_examples():
    cf = cf_expand("golden", 30)
    assert min_orbit_distance(0.0, 5, cf) == (0, 0.0)
    j, d = min_orbit_distance(0.1, 2, cf)
    assert j == 0 and d == pytest.approx(0.1)
    assert min_orbit_distance(0.5, 1, cf) == (0, 0.5)
    # second orbit point 0.7180...
    assert float(rotate(0.1, 1, cf)) == pytest.approx(0.718033988749895, abs=1e-14)


def test_min_orbit_distance_vectorized_matches_naive():
    cf = cf_expand("golden", 40)
    rng = np.random.default_rng(5)
    xs = rng.random(1000)
    Ns = rng.integers(1, 500, 1000)
    for x, N in zip(xs[:200], Ns[:200]):
        j, d = min_orbit_distance(x, int(N), cf)
        jj, dd = min_orbit_distances(np.array([x]), int(N), cf)
        ph = np.mod(x + np.arange(N) * ((math.sqrt(5) - 1) / 2), 1.0)
        ref = np.minimum(ph, 1 - ph)
        assert d == pytest.approx(ref.min(), abs=1e-12)
        assert (int(jj[0]), float(dd[0])) == (j, d)
