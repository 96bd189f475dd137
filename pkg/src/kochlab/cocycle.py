"""Bump cocycles over the special flow and their orbital integrals.

Component ``j`` of the smooth cocycle is

    tau_j(theta, u) = P_j(theta) B(u; f(theta)) - lam_j Q(theta) V(u)

where ``P_j`` is a plateau (1 within kappa of c_j, 0 beyond 2 kappa), ``B``
is 1 on the fiber except for smooth ramps of width ell/2 near its bottom
and top, and ``Q V`` is one correction bump placed as far from the
singularities as possible.  ``lam_j`` is fixed so that the mean is zero.
Every piece is a degree-7 polynomial spline, so fiber integrals are exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import mpmath
import numpy as np
from scipy import integrate

from .birkhoff import birkhoff_sum, loglog_slope
from .diophantine import rotate
from .errors import ConstructionError, DomainError, GeometryError, RankError
from .kochergin import (FiberObservable, FlowPoint, KocherginFlow, orbital_integrals,
                        sample_invariant, walk)
from .roof import roof_cos_moment
from .smooth import bump, bump_cumulative, plateau, smoothstep, smoothstep_integral

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def _circ(theta, c):
    return np.abs(np.mod(np.asarray(theta, dtype=np.float64) - c + 0.5, 1.0) - 0.5)


class BumpCocycle(FiberObservable):
    """The vector cocycle (tau_1, ..., tau_k), one plateau per singularity."""

    def __init__(self, flow: KocherginFlow, kappa: float, ell: float = 0.5):
        cs = np.asarray(flow.roof.singularities, dtype=np.float64)
        k = cs.size
        if kappa <= 0:
            raise GeometryError("kappa must be positive")
        if k > 1:
            dmin = min(float(_circ(cs[i], cs[j])) for i in range(k) for j in range(i + 1, k))
            if dmin <= 4 * kappa:
                raise GeometryError(
                    f"2*kappa-balls overlap: min distance {dmin:.4g} <= 4*kappa = {4 * kappa:.4g}")
        if 4 * kappa >= 1.0:
            raise GeometryError("kappa too large for the circle")
        inf_f = flow.roof.inf_value
        if inf_f < 2 * ell:
            raise GeometryError("fiber ramps need inf f >= 2 ell")
        self.flow, self.kappa, self.ell, self.k = flow, float(kappa), float(ell), k
        self.centers = cs
        theta_star = flow.roof.farthest_point
        d_star = float(np.min(_circ(theta_star, cs)))
        rho = min(0.25, 0.9 * (d_star - 2 * kappa))
        if rho <= 0:
            raise GeometryError("no room for the correction bump")
        grid = theta_star + np.linspace(-rho, rho, 401)
        f_low = float(np.min(flow.f(grid)))
        self.theta_star, self.rho = theta_star, rho
        self.v_center, self.v_half = 0.5 * f_low, 0.4 * f_low
        self.plateau_mass = np.array([self._plateau_integral(c) for c in cs])
        # int Q = rho, int V = v_half
        self.lam = self.plateau_mass / (self.rho * self.v_half)

    # -- construction helpers
    def _plateau_integral(self, c: float) -> float:
        """int P(theta) (f(theta) - 1.5 ell) d theta over the 2 kappa-ball of c."""
        kap, f = self.kappa, self.flow.f
        span = 2 * kap

        def g(s):
            d = span * s ** 3
            w = 3 * span * s * s
            return plateau(d / kap) * (f(c + d) + f(c - d) - 3 * self.ell) * w

        val, _ = integrate.quad(g, 0.0, 1.0, epsabs=1e-13, epsrel=1e-12, limit=400,
                                points=[(0.5) ** (1 / 3)])
        return val

    # -- pieces
    def _P(self, theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
        return plateau(_circ(theta[:, None], self.centers[None, :]) / self.kappa)

    def _Q(self, theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
        return 1.0 - smoothstep(_circ(theta, self.theta_star) / self.rho)

    def _B(self, u, f):
        h = 0.5 * self.ell
        return smoothstep((u - h) / h) * smoothstep((f - h - u) / h)

    def _M(self, w, f):
        h = 0.5 * self.ell
        return h * smoothstep_integral((w - h) / h) - h * smoothstep_integral((w - (f - self.ell)) / h)

    # -- FiberObservable interface
    def value(self, theta, u, f):
        u = np.atleast_1d(np.asarray(u, dtype=np.float64))
        f = np.atleast_1d(np.asarray(f, dtype=np.float64))
        corr = (self._Q(theta) * bump(u, self.v_center, self.v_half))[:, None]
        return self._P(theta) * self._B(u, f)[:, None] - self.lam[None, :] * corr

    def partial(self, theta, w, f):
        w = np.atleast_1d(np.asarray(w, dtype=np.float64))
        f = np.atleast_1d(np.asarray(f, dtype=np.float64))
        corr = (self._Q(theta) * bump_cumulative(w, self.v_center, self.v_half))[:, None]
        return self._P(theta) * self._M(w, f)[:, None] - self.lam[None, :] * corr

    def full(self, theta, f):
        f = np.atleast_1d(np.asarray(f, dtype=np.float64))
        corr = (self._Q(theta) * self.v_half)[:, None]
        return self._P(theta) * (f - 1.5 * self.ell)[:, None] - self.lam[None, :] * corr

    def in_kappa_neighborhood(self, j, theta, u, f):
        """The set on which tau_j is pinned to 1 (or tau_i, i != j, to 0)."""
        return (_circ(theta, self.centers[j]) < self.kappa) & (u >= self.ell) & (u <= f - self.ell)

    def describe(self) -> dict:
        return {"kappa": self.kappa, "ell": self.ell, "centers": self.centers.tolist(),
                "correction_center": self.theta_star, "correction_half_width": self.rho,
                "correction_height": [self.v_center, self.v_half], "lambda": self.lam.tolist()}


def build_bump_cocycle(flow: KocherginFlow, kappa: float, ell: float = 0.5) -> BumpCocycle:
    return BumpCocycle(flow, kappa, ell)


def invariant_mean(flow: KocherginFlow, obs: FiberObservable, panels: int = 16) -> np.ndarray:
    """Mean of obs under d theta du / int f, by pointwise 2-D quadrature.

    The inner u-integral uses Gauss-Legendre panels between the ramp
    breakpoints, the outer theta-integral adaptive quadrature on the
    cubically substituted half-gaps.  Only ``obs.value`` is used, so this
    is independent of the closed-form fiber integrals.
    """
    ell = getattr(obs, "ell", 0.5)

    def inner(theta):
        f = float(flow.f(theta))
        bps = [0.0, ell / 2, ell, f - ell, f - ell / 2, f]
        if hasattr(obs, "v_center"):
            bps += [obs.v_center - obs.v_half, obs.v_center, obs.v_center + obs.v_half]
        bps = np.unique(np.clip(bps, 0.0, f))
        a, b = bps[:-1], bps[1:]
        edges = np.concatenate([np.linspace(x, y, panels + 1)[:-1] for x, y in zip(a, b)] + [[f]])
        lo, hi = edges[:-1], edges[1:]
        mid, rad = 0.5 * (lo + hi), 0.5 * (hi - lo)
        us = (mid[:, None] + rad[:, None] * _GL_NODES[None, :]).ravel()
        ws = (rad[:, None] * _GL_WEIGHTS[None, :]).ravel()
        vals = obs.value(np.full(us.size, theta), us, np.full(us.size, f))
        return ws @ vals

    cs = sorted(flow.roof.singularities)
    out = np.zeros(obs.k)
    # split each gap at its midpoint and substitute d = h s^3 near the singular ends
    for i, c in enumerate(cs):
        right = cs[i + 1] if i + 1 < len(cs) else cs[0] + 1.0
        h = (right - c) / 2
        for anchor, sign in ((c, 1.0), (right, -1.0)):
            for comp in range(obs.k):
                g = lambda s, a=anchor, sg=sign, comp=comp: (
                    inner(a + sg * h * s ** 3)[comp] * 3 * h * s * s)
                val, _ = integrate.quad(g, 0.0, 1.0, epsabs=1e-12, epsrel=1e-10, limit=200)
                out[comp] += val
    return out / flow.roof.count


# --- analytic (trigonometric polynomial) cocycle --------------------------

class AnalyticCocycle(FiberObservable):
    """tau_bar_j(theta, u) = p_j(theta), trigonometric polynomials in theta."""

    def __init__(self, flow: KocherginFlow, order_L: int, fourier_degree: int,
                 cos_coef: np.ndarray, sin_coef: np.ndarray, residuals: dict):
        self.flow, self.order_L, self.fourier_degree = flow, order_L, fourier_degree
        self.cos_coef, self.sin_coef = cos_coef, sin_coef  # (k, D+1), (k, D+1)
        self.residuals = residuals
        self.k = cos_coef.shape[0]
        self.centers = np.asarray(flow.roof.singularities)

    def poly(self, theta, order: int = 0) -> np.ndarray:
        """(B, k) values of d^order p_j / d theta^order."""
        theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
        D = self.fourier_degree
        kk = np.arange(D + 1)
        w = 2 * math.pi * kk
        ph = np.outer(theta, w) + order * math.pi / 2
        scale = w ** order if order else np.ones(D + 1)
        return (np.cos(ph) * scale) @ self.cos_coef.T + (np.sin(ph) * scale) @ self.sin_coef.T

    def value(self, theta, u, f):
        return self.poly(theta)

    def partial(self, theta, w, f):
        return self.poly(theta) * np.atleast_1d(np.asarray(w, dtype=np.float64))[:, None]

    def full(self, theta, f):
        return self.poly(theta) * np.atleast_1d(np.asarray(f, dtype=np.float64))[:, None]

    def weighted_mean(self) -> np.ndarray:
        """int p_j f d theta / int f, from the Fourier moments of the roof."""
        D = self.fourier_degree
        base = self.flow.roof.base
        Fk = np.array([roof_cos_moment(base, k) for k in range(D + 1)])
        cs = self.centers
        ck = np.cos(2 * math.pi * np.outer(np.arange(D + 1), cs)).sum(axis=1) * Fk
        sk = np.sin(2 * math.pi * np.outer(np.arange(D + 1), cs)).sum(axis=1) * Fk
        return (self.cos_coef @ ck + self.sin_coef @ sk) / self.flow.roof.count

    def mp_derivative(self, j: int, x: float, order: int) -> float:
        """High-precision numerical derivative, independent of the solver."""
        cc = [mpmath.mpf(float(v)) for v in self.cos_coef[j]]
        sc = [mpmath.mpf(float(v)) for v in self.sin_coef[j]]

        def p(t):
            return mpmath.fsum(cc[k] * mpmath.cos(2 * mpmath.pi * k * t)
                               + sc[k] * mpmath.sin(2 * mpmath.pi * k * t)
                               for k in range(len(cc)))

        with mpmath.workdps(40):
            return float(mpmath.diff(p, mpmath.mpf(x), order))


def build_analytic_cocycle(flow: KocherginFlow, L: int = 2, fourier_degree: int | None = None,
                           tol: float = 1e-8) -> AnalyticCocycle:
    """Least-norm trigonometric interpolation with vanishing jets and zero mean."""
    cs = np.asarray(flow.roof.singularities)
    k = cs.size
    n_con = k * (L + 1) + 1
    D = fourier_degree if fourier_degree is not None else n_con
    if 2 * D + 1 < n_con:
        raise RankError(f"degree {D} gives {2 * D + 1} unknowns for {n_con} constraints")
    kk = np.arange(D + 1)
    w = 2 * math.pi * kk
    rows = []
    for order in range(L + 1):
        sc = (w / max(w[-1], 1.0)) ** order if order else np.ones(D + 1)
        for c in cs:
            ph = w * c + order * math.pi / 2
            rows.append(np.concatenate([np.cos(ph) * sc, np.sin(ph) * sc]))
    Fk = np.array([roof_cos_moment(flow.roof.base, q) for q in range(D + 1)])
    mean_row = np.concatenate([np.cos(np.outer(kk, cs) * 2 * math.pi).sum(axis=1) * Fk,
                               np.sin(np.outer(kk, cs) * 2 * math.pi).sum(axis=1) * Fk])
    rows.append(mean_row / k)
    A = np.array(rows)
    # sin(0 * theta) is identically zero: drop that column
    keep = np.ones(A.shape[1], dtype=bool)
    keep[D + 1] = False
    A_red = A[:, keep]
    rhs = np.zeros((n_con, k))
    rhs[:k, :] = np.eye(k)
    sol, _, rank, sv = np.linalg.lstsq(A_red, rhs, rcond=None)
    if rank < n_con or sv[-1] < 1e-12 * sv[0]:
        raise RankError(f"constraint matrix has rank {rank} < {n_con}")
    resid = float(np.max(np.abs(A_red @ sol - rhs)))
    if resid > tol:
        raise RankError(f"interpolation residual {resid:.3g} exceeds {tol:g}")
    full = np.zeros((A.shape[1], k))
    full[keep] = sol
    cos_coef = full[:D + 1].T.copy()
    sin_coef = full[D + 1:].T.copy()
    ac = AnalyticCocycle(flow, L, D, cos_coef, sin_coef, {})
    vals = ac.poly(cs)
    jets = [np.max(np.abs(ac.poly(cs, order))) for order in range(1, L + 1)]
    ac.residuals = {"values": float(np.max(np.abs(vals - np.eye(k)))),
                    "jets": float(max(jets)) if jets else 0.0,
                    "mean": float(np.max(np.abs(ac.weighted_mean()))),
                    "system": resid}
    return ac


class ObservableDifference(FiberObservable):
    def __init__(self, a: FiberObservable, b: FiberObservable):
        self.a, self.b, self.k = a, b, a.k

    def value(self, theta, u, f):
        return self.a.value(theta, u, f) - self.b.value(theta, u, f)

    def partial(self, theta, w, f):
        return self.a.partial(theta, w, f) - self.b.partial(theta, w, f)

    def full(self, theta, f):
        return self.a.full(theta, f) - self.b.full(theta, f)


def psi_singularity_type(flow: KocherginFlow, smooth: FiberObservable,
                         analytic: FiberObservable,
                         h_grid: Sequence[float] = tuple(10.0 ** -np.arange(3, 10))) -> dict:
    """Growth of psi_i = int_0^f (tau_i - tau_bar_i) du as theta -> c_j.

    For every pair (i, j) and side, fits |psi_i(c_j +- h)| ~ h^-beta and
    |psi_i| ~ a ln(1/h).  beta near 0 means at worst a logarithmic singularity.
    """
    diff = ObservableDifference(smooth, analytic)
    h = np.asarray(h_grid, dtype=np.float64)
    cs = np.asarray(flow.roof.singularities)
    beta, logc = np.zeros((cs.size, diff.k)), np.zeros((cs.size, diff.k))
    for j, c in enumerate(cs):
        for side in (-1.0, 1.0):
            th = np.mod(c + side * h, 1.0)
            psi = np.abs(diff.full(th, flow.f(th)))
            for i in range(diff.k):
                y = np.maximum(psi[:, i], 1e-300)
                b = -loglog_slope(h, y)
                a = float(np.polyfit(np.log(1 / h), psi[:, i], 1)[0])
                beta[j, i] = max(beta[j, i], b)
                logc[j, i] = max(logc[j, i], abs(a))
    return {"h_grid": h.tolist(), "max_power": float(beta.max()),
            "max_log_coefficient": float(logc.max()), "power": beta.tolist(),
            "log_coefficient": logc.tolist()}


class ConstantObservable(FiberObservable):
    """Test hook: the constant c (k = 1)."""

    def __init__(self, c: float = 1.0):
        self.c, self.k = float(c), 1

    def value(self, theta, u, f):
        return np.full((np.size(u), 1), self.c)

    def partial(self, theta, w, f):
        return (self.c * np.atleast_1d(np.asarray(w, dtype=np.float64)))[:, None]


# --- orbital integrals -----------------------------------------------------

@dataclass(frozen=True)
class OrbitalIntegral:
    component: int
    point: FlowPoint
    T: float
    value: float
    method: str
    error_estimate: float
    n_returns: int = 0
    leading_term: float | None = None


def orbital_integral_fast(flow: KocherginFlow, cocycle: FiberObservable, j: int,
                          p: FlowPoint, T: float) -> OrbitalIntegral:
    """Exact fiber decomposition: boundary partials plus per-fiber integrals.

    Also records the leading term S_N(fbar_0(. - c_j))(theta) computed by
    the brute-force Birkhoff route.
    """
    vals, r = orbital_integrals(flow, cocycle, [p.theta], [p.u], T)
    N = int(r.n[0])
    lead = None
    if hasattr(cocycle, "centers") and j < len(cocycle.centers):
        c = float(cocycle.centers[j])
        base = flow.roof.base
        lead = float(birkhoff_sum(lambda y: base.eval(y - c, 0) - 1.0, [p.theta], N, flow.cf)[0]) \
            if N > 0 else 0.0
    v = float(vals[0, j])
    return OrbitalIntegral(j, p, float(T), v, "decomposition", 1e-12 * max(1.0, abs(v)), N, lead)


def fiber_segments(flow: KocherginFlow, p: FlowPoint, T: float):
    """(theta_n, f_n, u_start, u_end) for every fiber the orbit touches up to T."""
    seen = []

    def visit(idx, th, fv):
        seen.append((float(th[0]), float(fv[0])))

    r = walk(flow, p.theta, p.u, T, visit)
    segs = []
    for n, (th, fv) in enumerate(seen):
        segs.append((th, fv, p.u if n == 0 else 0.0, fv))
    start = p.u if not seen else 0.0
    segs.append((float(r.theta), float(r.roof), start, float(r.height)))
    return segs, int(r.n)


def _segment_quadrature(obs, j, segs, h):
    total = []
    for th, fv, a, b in segs:
        if b <= a:
            continue
        m = max(1, int(math.ceil((b - a) / h)))
        edges = np.linspace(a, b, m + 1)
        mid, rad = 0.5 * (edges[1:] + edges[:-1]), 0.5 * (edges[1:] - edges[:-1])
        us = (mid[:, None] + rad[:, None] * _GL_NODES[None, :]).ravel()
        ws = (rad[:, None] * _GL_WEIGHTS[None, :]).ravel()
        vals = obs.value(np.full(us.size, th), us, np.full(us.size, fv))[:, j]
        total.append(float(ws @ vals))
    return math.fsum(total)


def orbital_integral_quadrature(flow: KocherginFlow, tau: FiberObservable, p: FlowPoint,
                                T: float, j: int = 0, h: float | None = None) -> OrbitalIntegral:
    """Composite Gauss-Legendre along t -> tau_j(K_t p), restarted at every fiber.

    The error estimate is the change under step halving.
    """
    h = h if h is not None else min(0.25, getattr(tau, "ell", 0.5) / 8)
    segs, N = fiber_segments(flow, p, T)
    coarse = _segment_quadrature(tau, j, segs, h)
    fine = _segment_quadrature(tau, j, segs, h / 2)
    return OrbitalIntegral(j, p, float(T), fine, "quadrature", abs(fine - coarse), N)


def corollary_budget(flow: KocherginFlow, j: int, p: FlowPoint, T: float, N: int) -> float:
    """fbar(x - c_j) + fbar(x + N alpha - c_j) + ln^4 T."""
    c = flow.roof.singularities[j]
    base = flow.roof.base
    end = float(rotate(p.theta, N, flow.cf))
    return abs(base.eval(p.theta - c)) + abs(base.eval(end - c)) + math.log(T) ** 4


@dataclass(frozen=True)
class AgreementReport:
    T: float
    count: int
    max_method_gap: float
    max_error_estimate: float
    fitted_C: float
    frozen_C: float | None
    passed: bool
    rows: tuple = field(repr=False, default=())


def compare_orbital_methods(flow: KocherginFlow, cocycle: BumpCocycle, T: float, count: int,
                            rng_seed: int, frozen_C: float | None = None,
                            headroom: float = 2.0) -> AgreementReport:
    """Fast route vs quadrature route, and both against the Corollary budget."""
    pts = sample_invariant(flow, rng_seed, count)
    rows, ok, gap_max, err_max, fit = [], True, 0.0, 0.0, 0.0
    for th, uu in zip(pts.theta, pts.u):
        p = FlowPoint(float(th), float(uu))
        for j in range(cocycle.k):
            fast = orbital_integral_fast(flow, cocycle, j, p, T)
            quad = orbital_integral_quadrature(flow, cocycle, p, T, j)
            gap = abs(fast.value - quad.value)
            tol = max(10 * quad.error_estimate, 1e-9 * max(1.0, abs(quad.value)))
            budget = corollary_budget(flow, j, p, T, fast.n_returns)
            ratio = abs(quad.value - fast.leading_term) / budget
            rows.append((p.theta, p.u, j, fast.n_returns, fast.value, quad.value,
                         quad.error_estimate, fast.leading_term, budget, ratio))
            gap_max = max(gap_max, gap)
            err_max = max(err_max, quad.error_estimate)
            fit = max(fit, ratio)
            ok = ok and gap <= tol
    if frozen_C is not None:
        ok = ok and fit <= headroom * frozen_C and frozen_C <= 10.0
    return AgreementReport(float(T), count, gap_max, err_max, fit, frozen_C, ok, tuple(rows))


# --- Case 1: few returns force a large component -----------------------------

@dataclass(frozen=True)
class Case1Report:
    T: float
    epsilon: float
    trials: int
    returns: tuple
    margins: tuple
    passed: bool


def construct_case1_points(flow: KocherginFlow, epsilon: float, T: float, trials: int,
                           rng_seed: int):
    """Points whose orbit passes within 1/(eps T^(1/g)) of a singularity early on."""
    rng = np.random.default_rng(rng_seed)
    g = flow.roof.gamma
    radius = 1.0 / (epsilon * T ** (1.0 / g))
    cs = np.asarray(flow.roof.singularities)
    u_max = max(1, int(0.5 * T / flow.mean_roof))
    j = rng.integers(0, cs.size, trials)
    steps = rng.integers(0, u_max + 1, trials)
    mag = rng.uniform(0.01, 1.0, trials) * radius
    d = np.where(rng.random(trials) < 0.5, -mag, mag)
    theta = rotate(cs[j] + d, -steps, flow.cf)
    w = rng.random(trials) * flow.f(theta)
    return theta, w, j, steps


def check_case1_lower_bound(flow: KocherginFlow, cocycle: BumpCocycle, epsilon: float,
                            T_grid: Sequence[float], trials: int, rng_seed: int = 0):
    reports = []
    for T in T_grid:
        theta, w, _, _ = construct_case1_points(flow, epsilon, T, trials, rng_seed)
        vals, r = orbital_integrals(flow, cocycle, theta, w, T)
        few = r.n < T ** (1.0 - epsilon)
        if not np.any(few):
            raise ConstructionError(f"no constructed point has N < T^(1-eps) at T={T:g}")
        margins = vals.max(axis=1) - epsilon ** 2 * T
        ok = bool(np.all(few) and np.all(margins > 0))
        reports.append(Case1Report(float(T), epsilon, trials, tuple(int(x) for x in r.n),
                                   tuple(float(m) for m in margins), ok))
    return reports


# --- S2: the small-integral set ----------------------------------------------

@dataclass(frozen=True)
class S2Report:
    C_const: float
    T_grid: tuple
    fractions: tuple
    counts: tuple
    sample_count: int
    exponent: float
    strictly_decreasing: bool
    passed: bool


def vector_integrals(flow, obs, theta, u, T, chunk: int = 20000):
    out = []
    for s in range(0, theta.size, chunk):
        v, _ = orbital_integrals(flow, obs, theta[s:s + chunk], u[s:s + chunk], T)
        out.append(v)
    return np.concatenate(out)


def scan_S2_smallset(flow: KocherginFlow, cocycle: FiberObservable, C_const: float,
                     T_grid: Sequence[float], sample_count: int, rng_seed: int,
                     exponent_max: float = -1.0) -> S2Report:
    pts = sample_invariant(flow, rng_seed, sample_count)
    fr, counts = [], []
    for T in T_grid:
        v = vector_integrals(flow, cocycle, pts.theta, pts.u, T)
        small = np.max(np.abs(v), axis=1) < C_const * math.log(T) ** 2
        counts.append(int(small.sum()))
        fr.append(float(small.mean()))
    dec = all(b < a for a, b in zip(fr, fr[1:]))
    # a zero count enters the fit at half a sample
    safe = [max(x, 0.5 / sample_count) for x in fr]
    expo = loglog_slope(T_grid, safe) if len(T_grid) > 1 else 0.0
    return S2Report(float(C_const), tuple(float(t) for t in T_grid), tuple(fr), tuple(counts),
                    sample_count, expo, dec, bool(dec and expo <= exponent_max))


# --- smooth vs analytic ------------------------------------------------------

@dataclass(frozen=True)
class AnalyticDifferenceReport:
    T_grid: tuple
    q99_ratio: tuple
    excluded_fraction: tuple
    mass_bound: tuple
    bound: float
    passed: bool


def check_analytic_difference(flow: KocherginFlow, smooth: FiberObservable,
                              analytic: FiberObservable, T_grid: Sequence[float],
                              sample_count: int, rng_seed: int = 0, exponent: float = 20.0,
                              bound: float = 1.0) -> AnalyticDifferenceReport:
    """0.99-quantile of ||int (tau - tau_bar)|| / ln^5 T over orbits avoiding
    the T^(-exponent/g)-neighborhoods of the singularities."""
    pts = sample_invariant(flow, rng_seed, sample_count)
    diff = ObservableDifference(smooth, analytic)
    g = flow.roof.gamma
    q99, excl, mass, ok = [], [], [], True
    for T in T_grid:
        radius = T ** (-exponent / g)
        dmin = flow.roof.distance_to_singularities(pts.theta).copy()

        def visit(idx, th, fv):
            dmin[idx] = np.minimum(dmin[idx], flow.roof.distance_to_singularities(th))

        acc = -diff.partial(pts.theta, pts.u, flow.f(pts.theta))

        def visit_acc(idx, th, fv):
            visit(idx, th, fv)
            acc[idx] += diff.full(th, fv)

        r = walk(flow, pts.theta, pts.u, np.full(pts.theta.size, float(T)), visit_acc)
        acc += diff.partial(r.theta, r.height, r.roof)
        dmin = np.minimum(dmin, flow.roof.distance_to_singularities(r.theta))
        good = dmin >= radius
        ratio = np.max(np.abs(acc[good]), axis=1) / math.log(T) ** 5
        q = float(np.quantile(ratio, 0.99)) if ratio.size else 0.0
        mb = (flow.inv_inf_f * T + 2) * flow.roof.count * 2 * radius
        q99.append(q)
        excl.append(float(1 - good.mean()))
        mass.append(mb)
        ok = ok and q <= bound
    return AnalyticDifferenceReport(tuple(float(t) for t in T_grid), tuple(q99), tuple(excl),
                                    tuple(mass), bound, ok)
