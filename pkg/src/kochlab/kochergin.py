"""Special flow under a power-singular roof over a circle rotation.

A phase point is (theta, u) with 0 <= u < f(theta).  The flow moves u up
at unit speed; on reaching the roof the point jumps to (theta + alpha, 0).
All evolution goes through :func:`walk`, which advances many points at
once, one fiber per step, keeping only the still-active points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .birkhoff import loglog_slope
from .diophantine import (ContinuedFraction, DiophantineCertificate, is_diophantine_D,
                          rotate)
from .errors import DomainError, PrecisionError, SingularityError, WindowError
from .parallel import DEFAULT_CHUNK, chunk_generators
from .roof import CompositeRoof
from .smooth import bump, bump_cumulative

SINGULARITY_GUARD = 1e-15


@dataclass(frozen=True)
class FlowPoint:
    theta: float
    u: float


@dataclass(frozen=True)
class ReturnCount:
    N: int
    residual: float


@dataclass(frozen=True)
class KocherginFlow:
    cf: ContinuedFraction
    roof: CompositeRoof
    diophantine_C: float = 3.0
    horizon: float = 1e7
    certificate: DiophantineCertificate = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "certificate", is_diophantine_D(self.cf, self.diophantine_C))

    @property
    def alpha(self) -> float:
        return self.cf.alpha

    @property
    def in_class_D(self) -> bool:
        return self.certificate.passed

    @property
    def inv_inf_f(self) -> float:
        return self.roof.inv_inf

    @property
    def mean_roof(self) -> float:
        return float(self.roof.count)

    def f(self, theta):
        return self.roof.eval(theta, 0)

    def _guarded_f(self, theta):
        fv = np.asarray(self.roof.eval(theta, 0))
        base = self.roof.base
        # only a huge roof value can hide a near-hit, so check those alone
        tall = fv > base.coeff_a * SINGULARITY_GUARD ** -base.gamma
        if np.any(tall):
            d = self.roof.distance_to_singularities(np.asarray(theta)[tall])
            if np.any(d < SINGULARITY_GUARD):
                raise SingularityError("orbit enters the singularity guard radius")
        return fv

    def with_singularities(self, singularities) -> "KocherginFlow":
        return KocherginFlow(self.cf, CompositeRoof(self.roof.base, tuple(singularities)),
                             self.diophantine_C, self.horizon)


@dataclass
class WalkResult:
    n: np.ndarray
    theta: np.ndarray
    height: np.ndarray
    roof: np.ndarray


def walk(flow: KocherginFlow, theta, u, t, visit: Callable | None = None) -> WalkResult:
    """Advance points (theta, u) by times t (arrays broadcast together).

    ``visit(idx, theta_n, f_n)`` is called for every fiber that a forward
    orbit leaves, with ``idx`` indexing the points that leave it.
    """
    theta, u, t = np.broadcast_arrays(np.asarray(theta, float), np.asarray(u, float),
                                      np.asarray(t, float))
    theta = np.array(theta, dtype=np.float64).ravel()
    shape = u.shape
    u = u.ravel()
    t = np.array(t, dtype=np.float64).ravel()
    if t.size and np.max(np.abs(t)) > flow.horizon:
        raise PrecisionError(f"|t| exceeds the evolution horizon {flow.horizon:g}")
    n = np.zeros(theta.size, dtype=np.int64)
    cur = theta.copy()
    fcur = np.atleast_1d(flow._guarded_f(cur)).astype(np.float64)
    h = u + t
    comp = np.zeros_like(h)

    fwd = np.flatnonzero(h >= fcur)
    while fwd.size:
        if visit is not None:
            visit(fwd, cur[fwd], fcur[fwd])
        # compensated h -= f
        y = -fcur[fwd] - comp[fwd]
        s = h[fwd] + y
        comp[fwd] = (s - h[fwd]) - y
        h[fwd] = s
        n[fwd] += 1
        cur[fwd] = rotate(theta[fwd], n[fwd], flow.cf)
        fcur[fwd] = flow._guarded_f(cur[fwd])
        fwd = fwd[h[fwd] >= fcur[fwd]]

    back = np.flatnonzero(h < 0)
    while back.size:
        n[back] -= 1
        cur[back] = rotate(theta[back], n[back], flow.cf)
        fcur[back] = flow._guarded_f(cur[back])
        y = fcur[back] - comp[back]
        s = h[back] + y
        comp[back] = (s - h[back]) - y
        h[back] = s
        back = back[h[back] < 0]
    h = h + comp
    # rounding can leave h a hair outside [0, f); clamp into the fiber
    h = np.clip(h, 0.0, np.nextafter(fcur, 0.0))
    return WalkResult(n.reshape(shape), cur.reshape(shape), h.reshape(shape),
                      fcur.reshape(shape))


def evolve(flow: KocherginFlow, p: FlowPoint, t: float) -> FlowPoint:
    r = walk(flow, p.theta, p.u, t)
    return FlowPoint(float(r.theta), float(r.height))


def evolve_batch(flow: KocherginFlow, theta, u, t):
    r = walk(flow, theta, u, t)
    return r.theta, r.height, r.n


def return_count(flow: KocherginFlow, p: FlowPoint, T: float) -> ReturnCount:
    if T < 0:
        raise DomainError("T must be non-negative")
    r = walk(flow, p.theta, p.u, T)
    return ReturnCount(int(r.n), float(r.height))


def trajectory(flow: KocherginFlow, p: FlowPoint, times) -> np.ndarray:
    """Rows (t, theta, u) for the given times, for CSV dumps."""
    times = np.asarray(times, dtype=np.float64)
    r = walk(flow, np.full(times.shape, p.theta), np.full(times.shape, p.u), times)
    return np.column_stack([times, r.theta, r.height])


# --- observables integrated fiber by fiber -------------------------------

class FiberObservable:
    """Vector observable on the special-flow space with closed-form fiber integrals.

    Subclasses provide ``value(theta, u, f)``, ``partial(theta, w, f)`` (the
    integral over heights [0, w]) and optionally ``full(theta, f)``; all
    return arrays of shape (B, k).
    """

    k: int = 1

    def value(self, theta, u, f):
        raise NotImplementedError

    def partial(self, theta, w, f):
        raise NotImplementedError

    def full(self, theta, f):
        return self.partial(theta, f, f)


class SeparableBand(FiberObservable):
    """H(theta, u) = g(theta) * bump(u; center, half_width), bump below inf f."""

    def __init__(self, g: Callable, center: float, half_width: float, scale: float = 1.0):
        self.g, self.center, self.half_width, self.scale = g, center, half_width, scale
        self.k = 1

    def value(self, theta, u, f):
        return (self.scale * self.g(theta) * bump(u, self.center, self.half_width))[:, None]

    def partial(self, theta, w, f):
        return (self.scale * self.g(theta)
                * bump_cumulative(w, self.center, self.half_width))[:, None]

    @property
    def fiber_mass(self) -> float:
        return self.half_width


def orbital_integrals(flow: KocherginFlow, obs: FiberObservable, theta, u, T):
    """int_0^T obs(K_t(theta, u)) dt for each point, via exact fiber integrals.

    Returns (values (B, k), WalkResult).
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    f0 = np.atleast_1d(flow.f(theta))
    acc = -np.asarray(obs.partial(theta, u, f0), dtype=np.float64).reshape(theta.size, -1)
    acc = acc.copy()

    def visit(idx, th, fv):
        acc[idx] += obs.full(th, fv)

    r = walk(flow, theta, u, np.broadcast_to(np.asarray(T, float), theta.shape), visit)
    acc += obs.partial(r.theta, r.height, r.roof)
    return acc, r


# --- invariant measure ---------------------------------------------------

@dataclass(frozen=True)
class FlowSample:
    theta: np.ndarray
    u: np.ndarray

    def __len__(self):
        return int(self.theta.size)

    def points(self):
        return [FlowPoint(float(a), float(b)) for a, b in zip(self.theta, self.u)]


def _sample_theta(flow: KocherginFlow, rng: np.random.Generator, size: int) -> np.ndarray:
    """theta with density f / int f, by rejection from a uniform + power-cap mixture."""
    base = flow.roof.base
    g, a = base.gamma, base.coeff_a
    cs = np.asarray(flow.roof.singularities)
    k0 = flow.roof.count * (a * 2.0 ** g + max(base.offset_b, 0.0))
    w_cap = a * 2.0 ** g / (1.0 - g)  # mass of a d^-g over the circle
    weights = np.concatenate([[k0], np.full(cs.size, w_cap)])
    weights /= weights.sum()
    out = np.empty(0)
    while out.size < size:
        m = 2 * (size - out.size) + 16
        comp = rng.choice(weights.size, size=m, p=weights)
        uni = rng.random(m)
        d = 0.5 * rng.random(m) ** (1.0 / (1.0 - g))
        sign = np.where(rng.random(m) < 0.5, -1.0, 1.0)
        th = np.where(comp == 0, uni, cs[np.maximum(comp - 1, 0)] + sign * d)
        th = np.mod(th, 1.0)
        dist = np.abs(np.mod(th[:, None] - cs[None, :] + 0.5, 1.0) - 0.5)
        dist = np.maximum(dist, SINGULARITY_GUARD)
        env = k0 + a * np.sum(dist ** -g, axis=1)
        near = dist.min(axis=1) <= SINGULARITY_GUARD
        th = th[~near]
        env = env[~near]
        accept = rng.random(th.size) * env < flow.f(th)
        out = np.concatenate([out, th[accept]])
    return out[:size]


def sample_invariant(flow: KocherginFlow, rng_seed: int, count: int,
                     chunk_size: int = DEFAULT_CHUNK) -> FlowSample:
    """i.i.d. points of the normalized invariant measure d theta du / int f."""
    if count < 1:
        raise DomainError("count must be >= 1")
    thetas, us = [], []
    for _, size, rng in chunk_generators(rng_seed, count, chunk_size):
        th = _sample_theta(flow, rng, size)
        thetas.append(th)
        us.append(rng.random(size) * flow.f(th))
    return FlowSample(np.concatenate(thetas), np.concatenate(us))


# --- S3: non-return of small balls ----------------------------------------

@dataclass(frozen=True)
class S3Report:
    x0: FlowPoint
    m: float
    C: float
    deltas: tuple
    windows: tuple
    min_clearance: tuple
    passed: bool


def default_x0(flow: KocherginFlow, height: float = 0.3) -> FlowPoint:
    return FlowPoint(flow.roof.farthest_point, height)


def _fiber_schedule(flow, theta, u, t_max, backward=False):
    """Boundary times and fiber angles for orbits up to |t| <= t_max.

    Forward: fiber k (k = 0 is the starting fiber) is occupied during
    [start_k, start_{k+1}) with start_0 = -u.  Backward uses the same layout
    with fibers k = 0, -1, -2, ...
    """
    B = theta.size
    kmax = int(math.ceil(t_max * flow.inv_inf_f)) + 2
    ks = np.arange(kmax + 1)
    if backward:
        ks = -ks
    idx = np.repeat(ks[None, :], B, axis=0)
    th = rotate(np.repeat(theta[:, None], ks.size, axis=1), idx, flow.cf)
    fv = flow.f(th)
    if backward:
        # start of fiber -k is -u - sum_{i=1..k} f(theta_{-i})
        starts = -u[:, None] - np.concatenate([np.zeros((B, 1)), np.cumsum(fv[:, 1:], axis=1)], axis=1)
    else:
        starts = -u[:, None] + np.concatenate([np.zeros((B, 1)), np.cumsum(fv[:, :-1], axis=1)], axis=1)
    return th, starts


def check_S3(flow: KocherginFlow, x0: FlowPoint | None = None,
             delta_grid: Sequence[float] = (0.02, 0.01, 0.005), m: float = 1.05,
             C: float = 3.0, samples: int = 1000, rng_seed: int = 0,
             t_step_factor: float = 0.25) -> S3Report:
    """Sampled check that K_t B(x0, d) misses B(x0, d) for |t| in (C d, (C d)^(-1/m)).

    Balls use the max metric max(||dtheta||, |du|).
    """
    if not m < 1.1:
        raise DomainError("m must be < 1.1")
    x0 = x0 or default_x0(flow)
    rng = np.random.default_rng(rng_seed)
    windows, clearances, ok = [], [], True
    for delta in delta_grid:
        lo, hi = C * delta, (C * delta) ** (-1.0 / m)
        if lo >= hi:
            raise WindowError(f"empty window ({lo:g}, {hi:g}) at delta={delta:g}")
        ball_f = flow.f(x0.theta + np.linspace(-delta, delta, 21))
        if x0.u - delta < 0 or x0.u + delta >= np.min(ball_f):
            raise DomainError("B(x0, delta) does not fit inside the fibers")
        th = x0.theta + rng.uniform(-delta, delta, samples)
        uu = x0.u + rng.uniform(-delta, delta, samples)
        ts = np.arange(lo, hi, delta * t_step_factor)
        ts = np.append(ts, hi)
        worst = np.inf
        for backward in (False, True):
            fib_th, starts = _fiber_schedule(flow, th, uu, hi, backward)
            for s0 in range(0, samples, 100):
                sl = slice(s0, s0 + 100)
                tt = -ts if backward else ts
                st = starts[sl]
                if backward:
                    k = np.sum(st[:, None, :] > tt[None, :, None], axis=2)
                    k = np.minimum(k, st.shape[1] - 1)
                else:
                    k = np.sum(st[:, None, :] <= tt[None, :, None], axis=2) - 1
                thk = np.take_along_axis(fib_th[sl], k, axis=1)
                height = tt[None, :] - np.take_along_axis(st, k, axis=1)
                dth = np.abs(np.mod(thk - x0.theta + 0.5, 1.0) - 0.5)
                dist = np.maximum(dth, np.abs(height - x0.u))
                worst = min(worst, float(dist.min()) - delta)
        windows.append((lo, hi))
        clearances.append(worst)
        ok = ok and worst > 0
    return S3Report(x0, m, C, tuple(delta_grid), tuple(windows), tuple(clearances), ok)


# --- S1: sub-sqrt(T) deviations -------------------------------------------

@dataclass(frozen=True)
class S1Report:
    T_grid: tuple
    median: tuple
    q90: tuple
    slope: float
    passed: bool


def check_S1_empirical(flow: KocherginFlow, observable: FiberObservable, T_grid: Sequence[float],
                       sample_count: int, rng_seed: int, slope_tol: float = -0.05) -> S1Report:
    pts = sample_invariant(flow, rng_seed, sample_count)
    med, q90 = [], []
    for T in T_grid:
        vals, _ = orbital_integrals(flow, observable, pts.theta, pts.u, T)
        z = np.abs(vals[:, 0]) / math.sqrt(T)
        med.append(float(np.median(z)))
        q90.append(float(np.quantile(z, 0.9)))
    if max(q90) == 0.0:
        return S1Report(tuple(T_grid), tuple(med), tuple(q90), float("-inf"), True)
    slope = loglog_slope(T_grid, q90)
    return S1Report(tuple(T_grid), tuple(med), tuple(q90), slope, slope <= slope_tol)
