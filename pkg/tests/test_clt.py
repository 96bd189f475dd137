import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from kochlab import clt as cl
from kochlab.cocycle import ConstantObservable
from kochlab.errors import DomainError
from kochlab.kochergin import default_x0

FIBER = cl.FiberFlow()
D = cl.FiberObservableD()


@pytest.fixture(scope="module")
def skew(flow, bump_cocycle):
    return cl.SkewProduct(flow, FIBER, bump_cocycle, 0)


@pytest.fixture(scope="module")
def theta_bump(flow):
    x0 = default_x0(flow, 0.3)
    return cl.ThetaBump(x0.theta, x0.u, 0.05)


@pytest.fixture(scope="module")
def corr():
    return cl.fiber_correlation(FIBER, D, samples=20_000, rng_seed=3)


@pytest.mark.parametrize("kw", [dict(matrix=((2, 1), (2, 1))), dict(matrix=((1, 1), (0, 1))),
                                dict(rho=1.0), dict(rho=0.0)])
def test_fiber_validation(kw):
    with pytest.raises(DomainError):
        cl.FiberFlow(**kw)


def test_fiber_zero_time():
    Y = np.array([[123, 456]], dtype=np.int64)
    Y2, v2 = cl.fiber_evolve(FIBER, Y, [0.3], 0.0)
    assert np.array_equal(Y2, Y) and v2[0] == 0.3


def test_fiber_in_fiber():
    Y = cl.FiberFlow.from_float([[0.25, 0.1]])  # roof 1 + 0.2 cos(pi / 2) = 1
    Y2, v2 = cl.fiber_evolve(FIBER, Y, [0.1], 0.5)
    assert np.array_equal(Y2, Y) and v2[0] == pytest.approx(0.6)


def test_origin_is_periodic():
    Y = np.zeros((1, 2), dtype=np.int64)
    Y2, v2 = cl.fiber_evolve(FIBER, Y, [0.1], 5 * 1.2)
    assert np.array_equal(Y2, Y) and v2[0] == pytest.approx(0.1, abs=1e-12)


def test_automorphism_exact_inverse():
    Y = np.random.default_rng(0).integers(0, cl.MOD, (100, 2), dtype=np.int64)
    assert np.array_equal(FIBER.apply(FIBER.apply(Y), inverse=True), Y)


@given(st.integers(0, 10 ** 6), st.floats(-50, 50), st.floats(-50, 50))
@settings(max_examples=60, deadline=None)
def test_fiber_group_property(seed, s, t):
    Y, v = cl.sample_fiber(FIBER, np.random.default_rng(seed), 4)
    a = cl.fiber_evolve(FIBER, *cl.fiber_evolve(FIBER, Y, v, s), t)
    b = cl.fiber_evolve(FIBER, Y, v, s + t)
    same = np.all(a[0] == b[0], axis=1)
    # a boundary crossing can put the two routes on adjacent sides of the roof
    assert np.all(np.abs(a[1] - b[1])[same] <= 1e-9 * (1 + abs(s) + abs(t)))
    assert same.mean() >= 0.5


def test_fiber_invertible():
    Y, v = cl.sample_fiber(FIBER, np.random.default_rng(1), 50)
    Y2, v2 = cl.fiber_evolve(FIBER, *cl.fiber_evolve(FIBER, Y, v, 17.3), -17.3)
    assert np.array_equal(Y2, Y)
    np.testing.assert_allclose(v2, v, atol=1e-10)


def test_fiber_measure_preservation():
    Y, v = cl.sample_fiber(FIBER, np.random.default_rng(2), 200_000)
    g = lambda Y, v: np.cos(2 * np.pi * FIBER.to_float(Y)[:, 1]) + np.sin(v)
    Y2, v2 = cl.fiber_evolve(FIBER, Y, v, 3.7)
    diff = g(Y2, v2) - g(Y, v)
    assert abs(diff.mean()) <= 4 * diff.std() / math.sqrt(diff.size)


def test_D_mean_zero_and_norm():
    Y, v = cl.sample_fiber(FIBER, np.random.default_rng(3), 400_000)
    d = D(Y, v)
    assert abs(d.mean()) <= 4 * d.std() / math.sqrt(d.size)
    d2 = d * d
    assert abs(d2.mean() - D.norm_sq(FIBER)) <= 4 * d2.std() / math.sqrt(d.size)


def test_zero_cocycle_freezes_fiber(flow):
    sp = cl.SkewProduct(flow, FIBER, ConstantObservable(0.0))
    Y = np.array([[5, 7], [11, 13]], dtype=np.int64)
    _, _, Y2, v2, tau = cl.skew_evolve(sp, np.array([0.3, 0.6]), np.array([0.1, 0.2]), Y,
                                       np.array([0.4, 0.5]), 250.0)
    assert np.array_equal(Y2, Y) and np.all(tau == 0) and list(v2) == [0.4, 0.5]


def test_skew_group_property(skew):
    th, u = np.array([0.3]), np.array([0.2])
    Y, v = cl.sample_fiber(FIBER, np.random.default_rng(4), 1)
    a = cl.skew_evolve(skew, th, u, Y, v, 70.0)
    b = cl.skew_evolve(skew, *cl.skew_evolve(skew, th, u, Y, v, 30.0)[:4], 40.0)
    assert a[0][0] == pytest.approx(b[0][0], abs=1e-9)
    assert a[1][0] == pytest.approx(b[1][0], abs=1e-8)
    assert np.array_equal(a[2], b[2]) and a[3][0] == pytest.approx(b[3][0], abs=1e-8)


def test_theta_norm_and_overlap(flow):
    rep = cl.theta_properties(flow, [0.05], [0.0, 0.02])
    (_, _, p2, want2, _), (_, _, p3, want3, _) = rep.rows
    assert p2 == pytest.approx(3.927e-3, abs=1e-6)
    assert p2 == pytest.approx(want2, abs=1e-9)
    assert p3 == pytest.approx(want3, abs=1e-9)
    assert rep.passed and rep.p1_ok


def test_theta_delta_domain(flow):
    with pytest.raises(DomainError):
        cl.theta_properties(flow, [0.2])


def test_zero_observable_degenerate(skew, theta_bump):
    res = cl.clt_monte_carlo(skew, theta_bump, cl.FiberObservableD(0.0), [50.0], 40, 0)
    assert res[0].degenerate and res[0].sigma2 == 0.0
    ve = cl.variance_series(skew, theta_bump, cl.FiberObservableD(0.0), 50.0, 20, 0)
    assert ve.value == 0.0


def test_summarize_sample():
    z = np.random.default_rng(5).standard_normal(5000) * 0.3
    r = cl.summarize_sample(100.0, z)
    assert r.sigma2 == pytest.approx(0.09, rel=0.06)
    assert abs(r.skewness) < 0.15 and abs(r.excess_kurtosis) < 0.3
    assert math.isnan(cl.summarize_sample(1.0, z[:100]).ks_pvalue)


def test_ks_calibrated_on_gaussian_data():
    ps = np.array([cl.summarize_sample(1.0, np.random.default_rng(s).standard_normal(2000)).ks_pvalue
                   for s in range(300)])
    assert (ps < 0.01).mean() <= 0.03
    assert 0.3 < np.median(ps) < 0.7


def test_variance_t0_is_product_norm(flow, skew, theta_bump, corr):
    ve = cl.variance_series(skew, theta_bump, D, 0.0, 100, 0, corr=corr)
    assert ve.value == 0.0  # empty integration range
    h = theta_bump.delta
    p2, _ = integrate.dblquad(lambda uu, t: float(theta_bump(t, uu)) ** 2,
                              theta_bump.theta0 - 6 * h, theta_bump.theta0 + 6 * h,
                              lambda t: 0.0, lambda t: theta_bump.u0 + 6 * h)
    Y, v = cl.sample_fiber(FIBER, np.random.default_rng(6), 400_000)
    d2 = float(np.mean(D(Y, v) ** 2))
    assert ve.c0 == pytest.approx(p2 * d2 / flow.mean_roof, rel=0.01)


def test_fiber_correlation_starts_at_norm(corr):
    assert corr.values[0] == pytest.approx(D.norm_sq(FIBER), abs=4 * corr.se[0])
    assert corr.decay_time(0.05) <= 30


def test_fejer_series_matches_monte_carlo(skew, theta_bump, corr):
    T = 100.0
    mc = cl.clt_monte_carlo(skew, theta_bump, D, [T], 3000, 11)[0]
    ve = cl.variance_series(skew, theta_bump, D, T, 1500, 12, corr=corr, fejer_T=T)
    gap = abs(mc.sigma2 - ve.value)
    assert gap <= 4 * math.hypot(mc.sigma2_se, ve.se) + 0.05 * ve.value
