import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kochlab import cocycle as cc
from kochlab.errors import GeometryError, RankError
from kochlab.kochergin import FlowPoint, KocherginFlow, evolve, orbital_integrals, sample_invariant
from kochlab.roof import CompositeRoof


def test_plateau_values(flow, bump_cocycle):
    tau = bump_cocycle
    for j, c in enumerate(tau.centers):
        th = np.full(5, c + 0.5 * tau.kappa)
        f = flow.f(th)
        u = np.linspace(tau.ell, f[0] - tau.ell, 5)
        v = tau.value(th, u, f)
        assert np.all(tau.in_kappa_neighborhood(j, th, u, f))
        np.testing.assert_allclose(v[:, j], 1.0, atol=1e-15)
        np.testing.assert_allclose(np.delete(v, j, axis=1), 0.0, atol=1e-15)


def test_bottom_of_fiber_is_zero(flow, bump_cocycle):
    th = np.array([bump_cocycle.centers[0]])
    assert np.all(bump_cocycle.value(th + 1e-3, [0.0], flow.f(th + 1e-3)) == 0.0)


def test_invariant_mean_zero(flow, bump_cocycle):
    m = cc.invariant_mean(flow, bump_cocycle)
    np.testing.assert_allclose(m, 0.0, atol=1e-6)


def test_partial_matches_quadrature(flow, bump_cocycle):
    from scipy import integrate
    th = np.array([bump_cocycle.centers[1] + 0.01])
    f = flow.f(th)
    for w in (0.1, 0.4, 0.5 * f[0], f[0] - 0.1):
        ref = integrate.quad(lambda u: bump_cocycle.value(th, [u], f)[0, 1], 0, w,
                             points=[0.25, 0.5], limit=200)[0]
        assert bump_cocycle.partial(th, [w], f)[0, 1] == pytest.approx(ref, abs=1e-10)
    np.testing.assert_allclose(bump_cocycle.full(th, f), bump_cocycle.partial(th, f, f), atol=1e-12)


def test_overlapping_plateaus_rejected(roof, golden):
    fl = KocherginFlow(golden, CompositeRoof(roof, (0.1, 0.15, 0.6, 0.8)))
    with pytest.raises(GeometryError):
        cc.build_bump_cocycle(fl, 0.02)


def test_analytic_single_singularity(roof, golden):
    fl = KocherginFlow(golden, CompositeRoof(roof, (0.0,)))
    ac = cc.build_analytic_cocycle(fl, L=0, fourier_degree=2)
    assert ac.residuals["system"] < 1e-10
    assert ac.poly(0.0)[0, 0] == pytest.approx(1.0, abs=1e-10)
    assert abs(ac.weighted_mean()[0]) < 1e-10


def test_analytic_rank_error(flow):
    with pytest.raises(RankError):
        cc.build_analytic_cocycle(flow, L=2, fourier_degree=3)


def test_analytic_interpolation(flow, analytic_cocycle):
    ac = analytic_cocycle
    np.testing.assert_allclose(ac.poly(ac.centers), np.eye(4), atol=1e-8)
    for order in (1, 2):
        np.testing.assert_allclose(ac.poly(ac.centers, order), 0.0, atol=1e-6)


@pytest.mark.parametrize("x", [0.03, 0.31, 0.77])
@pytest.mark.parametrize("order", [1, 2, 3])
def test_analytic_jets_against_mpmath(analytic_cocycle, x, order):
    for j in range(analytic_cocycle.k):
        ref = analytic_cocycle.mp_derivative(j, x, order)
        got = analytic_cocycle.poly(x, order)[0, j]
        assert got == pytest.approx(ref, rel=1e-9, abs=1e-9 * (2 * math.pi * 13) ** order)


def test_analytic_weighted_mean_by_quadrature(flow, analytic_cocycle):
    from kochlab.roof import circle_integral
    for j in range(4):
        v = circle_integral(lambda t: float(analytic_cocycle.poly(t)[0, j] * flow.f(t)),
                            flow.roof.singularities)
        assert v == pytest.approx(0.0, abs=1e-8)


def test_constant_hook_gives_T(flow):
    s = sample_invariant(flow, 1, 50)
    for T in (0.3, 17.0, 2500.0):
        v, _ = orbital_integrals(flow, cc.ConstantObservable(), s.theta, s.u, T)
        np.testing.assert_allclose(v[:, 0], T, rtol=1e-12)


def test_plateau_start_gives_T(flow, bump_cocycle):
    j = 2
    p = FlowPoint(float(bump_cocycle.centers[j]) + 1e-3, bump_cocycle.ell)
    T = float(flow.f(p.theta)) - 2 * bump_cocycle.ell
    r = cc.orbital_integral_fast(flow, bump_cocycle, j, p, T)
    assert r.n_returns == 0
    assert r.value == pytest.approx(T, rel=1e-12)


def test_no_return_agreement(flow, bump_cocycle):
    p = FlowPoint(0.3, 0.05)
    T = float(flow.f(0.3)) - 0.1
    for j in range(4):
        a = cc.orbital_integral_fast(flow, bump_cocycle, j, p, T)
        b = cc.orbital_integral_quadrature(flow, bump_cocycle, p, T, j)
        assert a.n_returns == b.n_returns == 0
        assert a.value == pytest.approx(b.value, abs=1e-10)


@given(st.integers(0, 10 ** 6), st.floats(0, 300), st.floats(0, 300))
@settings(max_examples=40, deadline=None)
def test_additivity(flow, bump_cocycle, seed, s, t):
    rng = np.random.default_rng(seed)
    th = rng.random()
    p = FlowPoint(th, rng.random() * float(flow.f(th)))
    whole, _ = orbital_integrals(flow, bump_cocycle, [p.theta], [p.u], s + t)
    q = evolve(flow, p, s)
    a, _ = orbital_integrals(flow, bump_cocycle, [p.theta], [p.u], s)
    b, _ = orbital_integrals(flow, bump_cocycle, [q.theta], [q.u], t)
    np.testing.assert_allclose(whole, a + b, atol=1e-8 * (1 + s + t))


def test_fast_vs_quadrature(flow, bump_cocycle):
    r = cc.compare_orbital_methods(flow, bump_cocycle, 200.0, 5, 3)
    assert r.passed and r.max_method_gap <= 1e-8


def test_time_average_mean_zero(flow, bump_cocycle):
    s = sample_invariant(flow, 12, 20_000)
    v = cc.vector_integrals(flow, bump_cocycle, s.theta, s.u, 50.0) / 50.0
    se = v.std(axis=0) / math.sqrt(v.shape[0])
    assert np.all(np.abs(v.mean(axis=0)) <= 4 * se)


@pytest.mark.parametrize("side", [1.0, -1.0])
def test_tall_fiber_dominates(flow, bump_cocycle, side):
    j = 0
    th = float(bump_cocycle.centers[j]) + side * 1e-6
    f0 = float(flow.f(th))
    r = cc.orbital_integral_fast(flow, bump_cocycle, j, FlowPoint(th, 0.0), f0)
    # the whole tall fiber except its two ramps sits on the plateau
    assert r.value == pytest.approx(f0 - 1.5 * bump_cocycle.ell, rel=1e-12)
    assert r.value > 10


def test_case1_extreme(flow, bump_cocycle):
    reps = cc.check_case1_lower_bound(flow, bump_cocycle, 0.05, [1e4], 10, 0)
    assert reps[0].passed
    assert min(reps[0].returns) < 1e4 ** 0.95


def test_s2_zero_cocycle_fraction_one(flow):
    r = cc.scan_S2_smallset(flow, cc.ConstantObservable(0.0), 0.01, [1e2, 1e3], 200, 0)
    assert r.fractions == (1.0, 1.0) and not r.passed


def test_analytic_difference_of_identical_is_zero(flow, bump_cocycle):
    r = cc.check_analytic_difference(flow, bump_cocycle, bump_cocycle, [1e2], 100, 0)
    assert r.q99_ratio == (0.0,) and r.passed


def test_exclusion_mass(flow, bump_cocycle, analytic_cocycle):
    r = cc.check_analytic_difference(flow, bump_cocycle, analytic_cocycle, [1e2], 2000, 0,
                                     exponent=1.0)
    # radius 1e-6: a handful of points at most, far below the union bound
    assert r.excluded_fraction[0] <= r.mass_bound[0] + 3 / math.sqrt(2000)


def test_psi_bounded(flow, bump_cocycle, analytic_cocycle):
    rep = cc.psi_singularity_type(flow, bump_cocycle, analytic_cocycle)
    assert rep["max_power"] < 0.05
