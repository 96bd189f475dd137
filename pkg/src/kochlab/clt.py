"""Skew products over the special flow with a mixing suspension fiber, and CLT tests.

The fiber is the suspension of a hyperbolic toral automorphism A under
r(y) = 1 + rho cos(2 pi y_1).  Torus points are kept as integers modulo
2^52, so A and its inverse act exactly and the fiber flow is exactly
invertible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, stats

from .diophantine import rotate
from .errors import DomainError, PrecisionError
from .kochergin import FiberObservable, KocherginFlow, _sample_theta, orbital_integrals
from .parallel import DEFAULT_CHUNK, chunk_generators, ordered_map
from .smooth import bump

BITS = 52
MOD = 1 << BITS
SCALE = 1.0 / MOD
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
WINDOW = 5.7  # Gaussian cut-off in units of delta: exp(-5.7^2) < 1e-14


@dataclass(frozen=True)
class FiberFlow:
    matrix: tuple = ((2, 1), (1, 1))
    rho: float = 0.2
    horizon: float = 1e6

    def __post_init__(self):
        (a, b), (c, d) = self.matrix
        if a * d - b * c != 1:
            raise DomainError("automorphism must have determinant 1")
        if abs(a + d) <= 2:
            raise DomainError("automorphism must be hyperbolic (|trace| > 2)")
        if max(abs(a) + abs(b), abs(c) + abs(d)) >= 1 << (62 - BITS):
            raise DomainError("matrix entries too large for exact 64-bit arithmetic")
        if not (0.0 < self.rho < 1.0):
            raise DomainError("rho must lie in (0, 1)")
        object.__setattr__(self, "_fwd", np.array(self.matrix, dtype=np.int64))
        object.__setattr__(self, "_inv", np.array([[d, -b], [-c, a]], dtype=np.int64))

    def roof(self, Y):
        y1 = np.asarray(Y)[..., 0] * SCALE
        return 1.0 + self.rho * np.cos(2 * math.pi * y1)

    def apply(self, Y, inverse: bool = False):
        M = self._inv if inverse else self._fwd
        Y = np.asarray(Y, dtype=np.int64)
        y0, y1 = Y[..., 0], Y[..., 1]
        out = np.empty_like(Y)
        out[..., 0] = np.mod(M[0, 0] * y0 + M[0, 1] * y1, MOD)
        out[..., 1] = np.mod(M[1, 0] * y0 + M[1, 1] * y1, MOD)
        return out

    @staticmethod
    def to_float(Y):
        return np.asarray(Y) * SCALE

    @staticmethod
    def from_float(y):
        return np.mod(np.round(np.asarray(y, dtype=np.float64) * MOD), MOD).astype(np.int64)


def fiber_evolve(fiber: FiberFlow, Y, v, t):
    """G_t(Y, v) for arrays; Y is (B, 2) int64, v and t are (B,)."""
    Y = np.array(np.atleast_2d(Y), dtype=np.int64)
    v = np.atleast_1d(np.asarray(v, dtype=np.float64))
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), v.shape)
    if t.size and np.max(np.abs(t)) > fiber.horizon:
        raise PrecisionError(f"|t| exceeds the fiber horizon {fiber.horizon:g}")
    h = v + t
    r = fiber.roof(Y)
    up = np.flatnonzero(h >= r)
    while up.size:
        h[up] -= r[up]
        Y[up] = fiber.apply(Y[up])
        r[up] = fiber.roof(Y[up])
        up = up[h[up] >= r[up]]
    down = np.flatnonzero(h < 0)
    while down.size:
        Y[down] = fiber.apply(Y[down], inverse=True)
        r[down] = fiber.roof(Y[down])
        h[down] += r[down]
        down = down[h[down] < 0]
    h = np.clip(h, 0.0, np.nextafter(r, 0.0))
    return Y, h


def sample_fiber(fiber: FiberFlow, rng: np.random.Generator, size: int):
    """Points of the normalized suspension measure (uniform under the roof)."""
    out = np.empty((0, 2), dtype=np.int64)
    top = 1.0 + fiber.rho
    while out.shape[0] < size:
        cand = rng.integers(0, MOD, size=(2 * (size - out.shape[0]) + 8, 2), dtype=np.int64)
        keep = rng.random(cand.shape[0]) * top < fiber.roof(cand)
        out = np.concatenate([out, cand[keep]])
    Y = out[:size]
    return Y, rng.random(size) * fiber.roof(Y)


@dataclass(frozen=True)
class FiberObservableD:
    """D(y, v) = amplitude * sin(2 pi y_1) * W(v), W a C^3 bump on [0, 2 * half_width]."""
    amplitude: float = 1.0
    half_width: float = 0.25

    def __call__(self, Y, v):
        y1 = np.asarray(Y)[..., 0] * SCALE
        return self.amplitude * np.sin(2 * math.pi * y1) * bump(v, self.half_width, self.half_width)

    def norm_sq(self, fiber: FiberFlow) -> float:
        """||D||^2 under the normalized suspension measure (mean roof is 1)."""
        h = self.half_width
        w2, _ = integrate.quad(lambda s: float(bump(s, h, h)) ** 2, 0.0, 2 * h,
                               epsabs=1e-14, epsrel=1e-12)
        return self.amplitude ** 2 * 0.5 * w2


@dataclass(frozen=True)
class ThetaBump:
    """Gaussian bump of width delta at (theta0, u0), periodized in theta."""
    theta0: float
    u0: float
    delta: float
    lattice: int = 3

    def __call__(self, theta, u):
        theta = np.asarray(theta, dtype=np.float64)
        du2 = (np.asarray(u, dtype=np.float64) - self.u0) ** 2
        d = np.mod(theta - self.theta0 + 0.5, 1.0) - 0.5
        out = np.zeros(np.broadcast(theta, du2).shape)
        for m in range(-self.lattice, self.lattice + 1):
            out = out + np.exp(-((d - m) ** 2 + du2) / self.delta ** 2)
        return out

    def distance(self, theta, u):
        """max(circle distance in theta, |u - u0|)."""
        d = np.abs(np.mod(np.asarray(theta) - self.theta0 + 0.5, 1.0) - 0.5)
        return np.maximum(d, np.abs(np.asarray(u) - self.u0))

    @property
    def window(self) -> float:
        return WINDOW * self.delta

    @property
    def lebesgue_mass(self) -> float:
        return math.pi * self.delta ** 2

    @property
    def norm_sq_lebesgue(self) -> float:
        return 0.5 * math.pi * self.delta ** 2


@dataclass(frozen=True)
class ThetaReport:
    rows: tuple  # (delta, d, measured, predicted, error)
    p1_ok: bool
    p1_rows: tuple  # (delta, max value beyond delta^0.9, bound, strict gaussian at d = 2 delta)
    passed: bool


def _theta_overlap(flow: KocherginFlow, a: ThetaBump, b: ThetaBump) -> float:
    w = a.window + abs(b.theta0 - a.theta0)
    tl, th = a.theta0 - w, a.theta0 + w
    ul = max(0.0, min(a.u0, b.u0) - w)
    uh = max(a.u0, b.u0) + w
    val, _ = integrate.dblquad(lambda u, t: float(a(t, u) * b(t, u)), tl, th,
                               lambda t: ul, lambda t: min(uh, float(flow.f(t))),
                               epsabs=1e-13, epsrel=1e-11)
    return val


def theta_properties(flow: KocherginFlow, delta_grid: Sequence[float] = (0.1, 0.05),
                     d_grid: Sequence[float] = (0.0, 0.02, 0.05), theta0: float | None = None,
                     u0: float = 0.3, tol: float = 1e-6) -> ThetaReport:
    """P1 on a grid; P2 and P3 by 2-D adaptive quadrature over the flow space."""
    theta0 = flow.roof.farthest_point if theta0 is None else theta0
    rows, p1_rows, ok, p1_ok = [], [], True, True
    for delta in delta_grid:
        if not (0 < delta <= 0.1):
            raise DomainError("delta must lie in (0, 0.1]")
        a = ThetaBump(theta0, u0, delta)
        for d in d_grid:
            b = ThetaBump(theta0 + d, u0, delta)
            got = _theta_overlap(flow, a, b)
            want = 0.5 * math.pi * delta ** 2 * math.exp(-d * d / (2 * delta ** 2))
            rows.append((delta, d, got, want, abs(got - want)))
            ok = ok and abs(got - want) <= tol
        r = delta ** 0.9
        ang = np.linspace(0, 2 * math.pi, 721)
        grid = []
        for rad in np.linspace(r * 1.0000001, 0.5, 60):
            grid.append((theta0 + rad * np.clip(np.cos(ang) * 1.5, -1, 1),
                         u0 + rad * np.clip(np.sin(ang) * 1.5, -1, 1)))
        th = np.concatenate([g[0] for g in grid])
        uu = np.concatenate([g[1] for g in grid])
        far = a.distance(th, uu) > r
        vmax = float(np.max(a(th[far], uu[far])))
        bound = math.exp(-delta ** -0.1)
        p1_rows.append((delta, vmax, bound, math.exp(-(2 * delta / delta) ** 2)))
        p1_ok = p1_ok and vmax <= bound
    return ThetaReport(tuple(rows), p1_ok, tuple(p1_rows), ok and p1_ok)


@dataclass(frozen=True)
class SkewProduct:
    base: KocherginFlow
    fiber: FiberFlow
    cocycle: FiberObservable
    component: int = 0


def skew_evolve(sp: SkewProduct, theta, u, Y, v, T: float):
    """F_T(x, y) = (K_T x, G_{tau_T(x)} y) with tau_T from the fast route."""
    vals, r = orbital_integrals(sp.base, sp.cocycle, theta, u, T)
    tau = vals[:, sp.component]
    Y2, v2 = fiber_evolve(sp.fiber, Y, v, tau)
    return r.theta, r.height, Y2, v2, tau


def _panel_nodes(lo, hi, panels):
    """(B, panels * 8) Gauss-Legendre nodes and weights on [lo, hi] per row."""
    edges = lo[:, None] + (hi - lo)[:, None] * np.linspace(0.0, 1.0, panels + 1)[None, :]
    mid = 0.5 * (edges[:, 1:] + edges[:, :-1])
    rad = 0.5 * (edges[:, 1:] - edges[:, :-1])
    nodes = (mid[:, :, None] + rad[:, :, None] * _GL_NODES[None, None, :]).reshape(lo.size, -1)
    wts = (rad[:, :, None] * _GL_WEIGHTS[None, None, :]).reshape(lo.size, -1)
    return nodes, wts


def _passages(sp: SkewProduct, bump_: ThetaBump, theta, u, T, panels, on_nodes):
    """Walk the base orbits up to time T and call ``on_nodes`` on every passage
    through the Gaussian window of ``bump_``.

    ``on_nodes(idx, t_nodes, weights, theta_n, heights, tau_nodes)`` gets
    (b, M) arrays for the points ``idx`` that pass on the current fiber.
    """
    flow, obs, j = sp.base, sp.cocycle, sp.component
    B = theta.size
    cur = theta.copy()
    n = np.zeros(B, dtype=np.int64)
    fcur = np.atleast_1d(flow.f(cur))
    start = u.copy()
    elapsed = np.zeros(B)  # time at which the orbit sits at height ``start``
    offset = -obs.partial(cur, u, fcur)[:, j]  # tau at height w is offset + partial(w)
    W = bump_.window
    active = np.arange(B)
    while active.size:
        th, fv, st = cur[active], fcur[active], start[active]
        rem = T - elapsed[active]
        top = np.minimum(fv, st + rem)
        lo = np.maximum(st, bump_.u0 - W)
        hi = np.minimum(top, bump_.u0 + W)
        dth = np.abs(np.mod(th - bump_.theta0 + 0.5, 1.0) - 0.5)
        hit = (hi > lo) & (dth <= W)
        if np.any(hit):
            sel = np.flatnonzero(hit)
            idx = active[sel]
            hts, wts = _panel_nodes(lo[sel], hi[sel], panels)
            M = hts.shape[1]
            thr = np.repeat(th[sel], M)
            tau = offset[idx][:, None] + obs.partial(thr, hts.ravel(),
                                                      np.repeat(fv[sel], M))[:, j].reshape(-1, M)
            times = elapsed[idx][:, None] + (hts - st[sel][:, None])
            on_nodes(idx, times, wts, th[sel], hts, tau)
        done = st + rem <= fv
        go = ~done
        idx = active[go]
        if idx.size:
            offset[idx] += obs.full(cur[idx], fcur[idx])[:, j]
            elapsed[idx] += fcur[idx] - start[idx]
            start[idx] = 0.0
            n[idx] += 1
            cur[idx] = rotate(theta[idx], n[idx], flow.cf)
            fcur[idx] = flow.f(cur[idx])
        active = idx


def _clt_integrals(sp: SkewProduct, bump_: ThetaBump, D: FiberObservableD,
                   theta, u, Y, v, T, panels=12):
    """int_0^T Theta(K_s x) D(G_{tau_s(x)} y) ds for each sample."""
    acc = np.zeros(theta.size)
    Yc, vc = Y.copy(), v.copy()
    tau_c = np.zeros(theta.size)

    def on_nodes(idx, times, wts, th, hts, tau):
        nonlocal Yc, vc
        th_vals = bump_(th[:, None], hts)
        for k in range(hts.shape[1]):
            Ynew, vnew = fiber_evolve(sp.fiber, Yc[idx], vc[idx], tau[:, k] - tau_c[idx])
            Yc[idx], vc[idx], tau_c[idx] = Ynew, vnew, tau[:, k]
            acc[idx] += wts[:, k] * th_vals[:, k] * D(Ynew, vnew)

    _passages(sp, bump_, theta, u, T, panels, on_nodes)
    return acc


@dataclass(frozen=True)
class CltResult:
    T: float
    sample_count: int
    Z: np.ndarray = field(repr=False)
    sigma2: float
    sigma2_se: float
    ks_statistic: float
    ks_pvalue: float
    skewness: float
    skewness_se: float
    excess_kurtosis: float
    kurtosis_se: float
    degenerate: bool
    variance_series: float | None = None
    variance_series_se: float | None = None
    variance_tail_bound: float | None = None

    def summary(self) -> dict:
        return {k: getattr(self, k) for k in (
            "T", "sample_count", "sigma2", "sigma2_se", "ks_statistic", "ks_pvalue", "skewness",
            "skewness_se", "excess_kurtosis", "kurtosis_se", "degenerate", "variance_series",
            "variance_series_se", "variance_tail_bound")}


def _clt_chunk(args):
    sp, bump_, D, T_grid, size, rng, panels = args
    theta = _sample_theta(sp.base, rng, size)
    u = rng.random(size) * sp.base.f(theta)
    Y, v = sample_fiber(sp.fiber, rng, size)
    return np.stack([_clt_integrals(sp, bump_, D, theta, u, Y, v, T, panels) for T in T_grid])


def clt_monte_carlo(sp: SkewProduct, bump_: ThetaBump, D: FiberObservableD,
                    T_grid: Sequence[float], sample_count: int, rng_seed: int,
                    chunk_size: int = DEFAULT_CHUNK, workers: int = 1,
                    panels: int = 12) -> list[CltResult]:
    """Z_T = int_0^T H(F_s(x, y)) ds / sqrt(T) for points of the product measure.

    H = Theta * D has fiber mean zero for every base point, so no centering
    is needed.
    """
    if sample_count < 1:
        raise DomainError("sample_count must be >= 1")
    tasks = [(sp, bump_, D, tuple(T_grid), size, rng, panels)
             for _, size, rng in chunk_generators(rng_seed, sample_count, chunk_size)]
    raw = np.concatenate(ordered_map(_clt_chunk, tasks, workers), axis=1)
    out = []
    for T, vals in zip(T_grid, raw):
        Z = vals / math.sqrt(T)
        out.append(summarize_sample(T, Z))
    return out


def summarize_sample(T: float, Z: np.ndarray) -> CltResult:
    n = Z.size
    s2 = float(np.var(Z, ddof=1)) if n > 1 else 0.0
    m4 = float(np.mean((Z - Z.mean()) ** 4))
    se = math.sqrt(max(m4 - s2 * s2, 0.0) / n)
    floor = 1e-24 + (1e-12 * float(np.max(np.abs(Z)) if n else 0.0)) ** 2
    degenerate = s2 < 10 * floor
    if degenerate or n < 500:
        ks, p = float("nan"), float("nan")
    else:
        res = stats.kstest(Z, "norm", args=(float(Z.mean()) * 0.0, math.sqrt(s2)))
        ks, p = float(res.statistic), float(res.pvalue)
    sk = float(stats.skew(Z)) if not degenerate else 0.0
    ku = float(stats.kurtosis(Z)) if not degenerate else 0.0
    return CltResult(float(T), n, Z, s2, se, ks, p, sk, math.sqrt(6.0 / n), ku,
                     math.sqrt(24.0 / n), bool(degenerate))


# --- fiber correlations and the variance series -------------------------------

@dataclass(frozen=True)
class FiberCorrelation:
    tau: np.ndarray
    values: np.ndarray
    samples: int
    se: np.ndarray

    def __call__(self, t):
        t = np.abs(np.asarray(t, dtype=np.float64))
        out = np.interp(t, self.tau, self.values)
        return np.where(t > self.tau[-1], 0.0, out)

    def decay_time(self, fraction: float = 0.05) -> float:
        """First tau after which |C| stays below fraction * C(0)."""
        big = np.abs(self.values) >= fraction * abs(self.values[0])
        last = np.flatnonzero(big)
        return float(self.tau[min(last[-1] + 1, self.tau.size - 1)]) if last.size else 0.0


def fiber_correlation(fiber: FiberFlow, D: FiberObservableD, tau_max: float = 40.0,
                      step: float = 0.02, samples: int = 100_000, rng_seed: int = 0,
                      chunk_size: int = 25_000) -> FiberCorrelation:
    """C_D(tau) = int D(y) D(G_tau y) d nu(y), Monte Carlo over the suspension."""
    steps = int(round(tau_max / step))
    tau = np.arange(steps + 1) * step
    s1 = np.zeros(steps + 1)
    s2 = np.zeros(steps + 1)
    for _, size, rng in chunk_generators(rng_seed, samples, chunk_size):
        Y, v = sample_fiber(fiber, rng, size)
        d0 = D(Y, v)
        for k in range(steps + 1):
            if k:
                Y, v = fiber_evolve(fiber, Y, v, step)
            prod = d0 * D(Y, v)
            s1[k] += prod.sum()
            s2[k] += (prod * prod).sum()
    mean = s1 / samples
    se = np.sqrt(np.maximum(s2 / samples - mean ** 2, 0.0) / samples)
    return FiberCorrelation(tau, mean, samples, se)


@dataclass(frozen=True)
class VarianceEstimate:
    value: float
    se: float
    t_max: float
    c0: float
    tail_bound: float
    fejer_T: float | None
    samples: int


def _variance_chunk(args):
    sp, bump_, corr, t_max, size, rng, panels, fejer_T = args
    flow = sp.base
    sd = bump_.delta / math.sqrt(2.0)
    theta = np.empty(0)
    u = np.empty(0)
    while theta.size < size:
        th = np.mod(bump_.theta0 + sd * rng.standard_normal(size), 1.0)
        uu = bump_.u0 + sd * rng.standard_normal(size)
        ok = (uu >= 0) & (uu < flow.f(th))
        theta, u = np.concatenate([theta, th[ok]]), np.concatenate([u, uu[ok]])
    theta, u = theta[:size], u[:size]
    acc = np.zeros(size)

    def on_nodes(idx, times, wts, th, hts, tau):
        w = wts * bump_(th[:, None], hts) * corr(tau)
        if fejer_T:
            w = w * np.clip(1.0 - times / fejer_T, 0.0, None)
        acc[idx] += w.sum(axis=1)

    if t_max > 0:
        _passages(sp, bump_, theta, u, t_max, panels, on_nodes)
    return acc


def variance_series(sp: SkewProduct, bump_: ThetaBump, D: FiberObservableD, t_max: float,
                    quad_samples: int, rng_seed: int, corr: FiberCorrelation | None = None,
                    fejer_T: float | None = None, s2_exponent: float | None = None,
                    chunk_size: int = DEFAULT_CHUNK, workers: int = 1,
                    panels: int = 12) -> VarianceEstimate:
    """sigma^2 = int_{-t_max}^{t_max} c(t) dt, c(t) = E[H . H o F_t].

    c is even, so only t >= 0 is integrated.  The base point is drawn from
    the Gaussian itself (importance sampling), each passage of the orbit
    through the Gaussian window is integrated by Gauss-Legendre panels, and
    the fiber factor comes from the tabulated correlation C_D(tau_t(x)).
    With ``fejer_T`` the weight 1 - |t| / T gives the exact finite-T
    variance of int_0^T H / sqrt(T).
    """
    mean_f = sp.base.mean_roof
    dnorm = D.norm_sq(sp.fiber)
    c0 = bump_.norm_sq_lebesgue / mean_f * dnorm
    if D.amplitude == 0.0:
        return VarianceEstimate(0.0, 0.0, float(t_max), 0.0, 0.0, fejer_T, quad_samples)
    if corr is None:
        corr = fiber_correlation(sp.fiber, D, rng_seed=rng_seed)
    tasks = [(sp, bump_, corr, float(t_max), size, rng, panels, fejer_T)
             for _, size, rng in chunk_generators(rng_seed, quad_samples, chunk_size)]
    vals = np.concatenate(ordered_map(_variance_chunk, tasks, workers))
    scale = 2.0 * bump_.lebesgue_mass / mean_f
    est = scale * float(vals.mean())
    se = scale * float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
    tail = float("inf")
    if t_max <= 0:
        tail = float("inf")
    elif s2_exponent is not None and s2_exponent < -1:
        # |c(t)| <= ||H||^2 t^beta beyond t_max (desk-scale stand-in for O(t^-5))
        tail = 2 * c0 * t_max ** (s2_exponent + 1) / (-s2_exponent - 1)
    return VarianceEstimate(est, se, float(t_max), c0, tail, fejer_T, quad_samples)
