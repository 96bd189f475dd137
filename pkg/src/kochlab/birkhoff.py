"""Ergodic sums over a circle rotation and the estimates built on them.

The module has two routes to Birkhoff sums:

* brute force (:func:`birkhoff_sum`): evaluate the observable along the
  orbit, chunk by chunk, with compensated accumulation;
* a sorted-orbit route for piecewise-linear observables
  (:meth:`PiecewiseLinear.birkhoff_sums`), which uses prefix sums over the
  sorted orbit and costs O((N + M K) log N) for M base points.

The second route is what makes grids with N up to 2^20 cheap; the first
route serves as its oracle in the tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .diophantine import (ContinuedFraction, circle_distance, min_orbit_distances,
                          rotation_phases)
from .errors import BisectionError, DomainError, SingularityError
from .intervals import (IntervalUnion, translate_intersection_measure,
                        translate_intersection_measures)
from .roof import SingularRoof

__all__ = [
    "PiecewiseLinear", "bv_test_observables", "birkhoff_sum", "ErgodicSumQuery",
    "ergodic_sum", "check_denjoy_koksma", "DenjoyKoksmaReport", "dk0_residual_scan",
    "ResidualScanReport", "second_derivative_lower_bound", "SecondDerivativeReport",
    "SmallSumCover", "compute_AN_cover", "bv_growth_scan", "translate_intersection_measure",
    "translate_intersection_measures", "loglog_slope", "few_translates_check",
    "FewTranslatesReport",
]

SINGULARITY_GUARD = 1e-15
_CHUNK = 1 << 22


def loglog_slope(x, y) -> float:
    """Least-squares slope of log y against log x."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    return float(np.polyfit(lx, ly, 1)[0])


def _neumaier_add(total, comp, value):
    s = total + value
    big = np.abs(total) >= np.abs(value)
    comp = comp + np.where(big, (total - s) + value, (value - s) + total)
    return s, comp


def birkhoff_sum(g: Callable, x, N: int, alpha, start: int = 0,
                 exclude=None) -> np.ndarray:
    """S_N(g)(x) = sum_{start <= j < start+N} g(x + j alpha), vectorized over x.

    ``exclude`` optionally gives, per base point, one orbit index to skip.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    total = np.zeros(x.shape)
    comp = np.zeros(x.shape)
    step = max(1, _CHUNK // max(1, x.size))
    for s0 in range(start, start + N, step):
        cnt = min(step, start + N - s0)
        ph = rotation_phases(alpha, cnt, s0)
        vals = g(x[:, None] + ph[None, :])
        if exclude is not None:
            j = np.asarray(exclude)[:, None] - s0
            mask = (j >= 0) & (j < cnt) & (np.arange(cnt)[None, :] == j)
            vals = np.where(mask, 0.0, vals)
        total, comp = _neumaier_add(total, comp, vals.sum(axis=1))
    return total + comp


class PiecewiseLinear:
    """Piecewise-linear circle function with possible jumps.

    On ``[knots[k], knots[k+1])`` the value is ``values[k] + slopes[k] * (y - knots[k])``;
    the first knot is 0 and the last piece ends at 1.
    """

    def __init__(self, knots, values, slopes=None, name: str = ""):
        knots = np.asarray(knots, dtype=np.float64)
        values = np.asarray(values, dtype=np.float64)
        slopes = np.zeros_like(values) if slopes is None else np.asarray(slopes, dtype=np.float64)
        if knots[0] != 0.0:
            # insert a breakpoint at 0 so that no piece wraps around
            last = knots.size - 1
            v0 = values[last] + slopes[last] * (1.0 - knots[last])
            knots = np.concatenate([[0.0], knots])
            values = np.concatenate([[v0], values])
            slopes = np.concatenate([[slopes[last]], slopes])
        if np.any(np.diff(knots) <= 0) or knots[-1] >= 1.0:
            raise DomainError("knots must increase strictly inside [0, 1)")
        self.knots, self.values, self.slopes, self.name = knots, values, slopes, name
        self.lengths = np.diff(np.append(knots, 1.0))

    def __call__(self, y):
        y = np.mod(np.asarray(y, dtype=np.float64), 1.0)
        k = np.searchsorted(self.knots, y, side="right") - 1
        return self.values[k] + self.slopes[k] * (y - self.knots[k])

    @property
    def mean(self) -> float:
        L = self.lengths
        return math.fsum((self.values * L + 0.5 * self.slopes * L * L).tolist())

    @property
    def variation(self) -> float:
        """Total variation of the periodic function (jumps included)."""
        L = self.lengths
        ends = self.values + self.slopes * L
        jumps = np.abs(np.roll(self.values, -1) - ends)
        return math.fsum((np.abs(self.slopes) * L).tolist() + jumps.tolist())

    def centered(self) -> "PiecewiseLinear":
        return PiecewiseLinear(self.knots, self.values - self.mean, self.slopes, self.name)

    def birkhoff_sums(self, x, N: int, alpha, phases: np.ndarray | None = None) -> np.ndarray:
        """S_N(h)(x) for every x via prefix sums over the sorted orbit."""
        x = np.mod(np.atleast_1d(np.asarray(x, dtype=np.float64)), 1.0)
        if phases is None:
            phases = rotation_phases(alpha, N)
        P = np.sort(phases)
        n = P.size
        # residuals against the uniform grid keep the prefix sums small
        resid = P - (np.arange(n) + 0.5) / n
        E = np.concatenate([[0.0], np.cumsum(resid)])

        def count_sum(a, b):
            i0 = np.searchsorted(P, a, side="left")
            i1 = np.searchsorted(P, b, side="left")
            i1 = np.maximum(i1, i0)
            cnt = i1 - i0
            grid = (i1.astype(np.int64) ** 2 - i0.astype(np.int64) ** 2) / (2.0 * n)
            return cnt, grid + (E[i1] - E[i0])

        t0 = self.knots[None, :]
        t1 = np.append(self.knots[1:], 1.0)[None, :]
        xx = x[:, None]
        # orbit points that land at y >= x (no wrap) and at y < x (wrap)
        c1, s1 = count_sum(np.maximum(t0, xx) - xx, np.maximum(t1, xx) - xx)
        c2, s2 = count_sum(np.minimum(t0, xx) + 1.0 - xx, np.minimum(t1, xx) + 1.0 - xx)
        ysum = s1 + c1 * xx + s2 + c2 * (xx - 1.0)
        cnt = c1 + c2
        contrib = self.slopes[None, :] * (ysum - cnt * t0) + self.values[None, :] * cnt
        return contrib.sum(axis=1)


def bv_test_observables() -> list[PiecewiseLinear]:
    """Five mean-zero BV observables used by the Denjoy-Koksma checks."""
    obs = [
        PiecewiseLinear([0.0, 0.5], [0.5, -0.5], name="half_indicator"),
        PiecewiseLinear([0.0], [-0.5], [1.0], name="sawtooth"),
        PiecewiseLinear([0.0, 0.5], [0.25, -0.25], [-1.0, 1.0], name="tent"),
        PiecewiseLinear([0.0, 0.1, 0.35], [-0.25, 0.75, -0.25], name="window"),
        PiecewiseLinear([0.0, 0.2, 0.3, 0.7], [0.0, 0.0, 1.0, 0.5], [0.0, 10.0, -2.5, 0.0],
                        name="ramp_step").centered(),
    ]
    return obs


_ROOF_TAGS = {"roof": 0, "roof_centered": 0, "roof_deriv1": 1, "roof_deriv2": 2}


@dataclass(frozen=True)
class ErgodicSumQuery:
    observable: str
    x: float
    N: int
    alpha: object
    roof: SingularRoof | None = None
    custom: Callable | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.N < 1:
            raise DomainError("N must be >= 1")
        if self.observable in _ROOF_TAGS and self.roof is None:
            raise DomainError("roof observables need a roof")
        if self.observable == "bv_custom" and self.custom is None:
            raise DomainError("bv_custom needs a callable")
        if self.observable not in _ROOF_TAGS and self.observable != "bv_custom":
            raise DomainError(f"unknown observable tag {self.observable!r}")


def ergodic_sum(q: ErgodicSumQuery) -> float:
    """Evaluate S_N(g)(x) for a tagged observable; reports singular hits."""
    if q.observable == "bv_custom":
        return float(birkhoff_sum(q.custom, q.x, q.N, q.alpha)[0])
    j, d = min_orbit_distances(np.array([q.x]), q.N, q.alpha)
    if d[0] < SINGULARITY_GUARD:
        raise SingularityError(f"orbit point j={int(j[0])} within {SINGULARITY_GUARD} of 0",
                               index=int(j[0]))
    order = _ROOF_TAGS[q.observable]
    shift = 1.0 if q.observable == "roof_centered" else 0.0
    g = lambda y: q.roof.eval(y, order) - shift
    return float(birkhoff_sum(g, q.x, q.N, q.alpha)[0])


@dataclass(frozen=True)
class DenjoyKoksmaReport:
    observable: str
    n: int
    q_n: int
    max_deviation: float
    bound: float
    passed: bool


def check_denjoy_koksma(h: PiecewiseLinear, cf: ContinuedFraction, n: int,
                        grid, slack: float = 1e-9) -> DenjoyKoksmaReport:
    """max over the grid of |S_{q_n}(h) - q_n mean(h)| against 2 Var(h)."""
    q = cf.denominators[n]
    dev = np.abs(h.birkhoff_sums(grid, q, cf) - q * h.mean)
    m = float(dev.max())
    bound = 2.0 * h.variation
    return DenjoyKoksmaReport(h.name, n, q, m, bound, m <= bound + slack)


@dataclass(frozen=True)
class ResidualScanReport:
    N_grid: tuple
    max_ratio: tuple
    slope: float
    constant: float | None
    passed: bool


def dk0_residual_scan(roof: SingularRoof, cf, N_grid: Sequence[int], x_grid,
                      calibration: float | None = None, slope_tol: float = 0.05,
                      headroom: float = 2.0) -> ResidualScanReport:
    """Normalized residual |S_N(fbar) - N - fbar(x_min)| / (A N^g ln^5 N)."""
    x_grid = np.asarray(x_grid, dtype=np.float64)
    ratios = []
    for N in N_grid:
        jmin, _ = min_orbit_distances(x_grid, int(N), cf)
        # the nearest visit is skipped instead of subtracted, so a huge
        # spike never has to cancel against itself
        s = birkhoff_sum(roof.eval, x_grid, int(N), cf, exclude=jmin)
        R = np.abs(s - N)
        if N == 1:
            ratios.append(float(np.max(R)))
            continue
        scale = roof.asymptotic_A * N ** roof.gamma * math.log(N) ** 5
        ratios.append(float(np.max(R) / scale))
    usable = [(N, r) for N, r in zip(N_grid, ratios) if N > 1]
    slope = loglog_slope(*zip(*usable)) if len(usable) >= 2 else 0.0
    ok = slope <= slope_tol
    if calibration is not None:
        ok = ok and max(r for _, r in usable) <= headroom * calibration
    return ResidualScanReport(tuple(int(n) for n in N_grid), tuple(ratios), slope,
                              calibration, bool(ok))


@dataclass(frozen=True)
class SecondDerivativeReport:
    N_grid: tuple
    min_sum: tuple
    bound: tuple
    N0: int
    passed: bool


def second_derivative_lower_bound(roof: SingularRoof, cf, N_grid: Sequence[int], x_grid,
                                  N0: int = 16) -> SecondDerivativeReport:
    x_grid = np.asarray(x_grid, dtype=np.float64)
    mins, bounds, ok = [], [], True
    for N in N_grid:
        s = birkhoff_sum(lambda y: roof.eval(y, 2), x_grid, int(N), cf)
        m = float(s.min())
        b = roof.asymptotic_A * N ** (2 + roof.gamma) / math.log(N) ** 10 if N > 1 else 0.0
        mins.append(m)
        bounds.append(b)
        if N >= N0 and m < b:
            ok = False
    return SecondDerivativeReport(tuple(int(n) for n in N_grid), tuple(mins), tuple(bounds),
                                  N0, ok)


@dataclass(frozen=True)
class SmallSumCover:
    N: int
    epsilon: float
    threshold: float
    centers: np.ndarray = field(repr=False)
    radius: float
    measured_A_N: float
    grid_size: int
    escapes: int
    zeros: np.ndarray = field(repr=False, default=None)

    def union(self) -> IntervalUnion:
        return IntervalUnion.from_arcs(self.centers, self.radius)

    @property
    def cover_measure(self) -> float:
        return self.union().measure()

    @property
    def counting_bound(self) -> float:
        """2 * 3N * delta_N, the length bound from the center count."""
        return 6.0 * self.N * self.radius


def compute_AN_cover(roof: SingularRoof, cf, N: int, epsilon: float = 0.01,
                     grid_factor: float = 10.0, check: bool = True) -> SmallSumCover:
    """Cover of A_N = {|S_N(fbar_0)| <= N^(g^2+eps)} by arcs of radius N^-(1+g/5).

    Per interval of the partition by {-i alpha}: the zero of S_N(fbar_0')
    by bisection, then the two points at distance delta_N on either side,
    kept only when S_N(fbar_0) there is below the threshold.
    """
    N = int(N)
    if N < 1:
        raise DomainError("N must be >= 1")
    if not (0 < epsilon <= 0.05):
        raise DomainError("epsilon must lie in (0, 0.05]")
    g = roof.gamma
    delta = N ** -(1.0 + g / 5.0)
    thr = N ** (g * g + epsilon)
    P = np.sort(np.mod(-rotation_phases(cf, N), 1.0))
    left = P
    right = np.append(P[1:], P[0] + 1.0)
    width = right - left
    d1 = lambda y: roof.eval(y, 1)
    lo = left + width * 1e-9
    hi = right - width * 1e-9
    f_lo = birkhoff_sum(d1, lo, N, cf)
    f_hi = birkhoff_sum(d1, hi, N, cf)
    if np.any(f_lo >= 0) or np.any(f_hi <= 0):
        bad = int(np.flatnonzero((f_lo >= 0) | (f_hi <= 0))[0])
        raise BisectionError(f"derivative sum does not change sign on interval {bad}")
    iters = int(math.ceil(math.log2(width.max() / (delta / 100.0)))) + 1
    for _ in range(max(iters, 1)):
        mid = 0.5 * (lo + hi)
        v = birkhoff_sum(d1, mid, N, cf)
        neg = v < 0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    zeros = 0.5 * (lo + hi)
    centers = [zeros]
    f0 = lambda y: roof.eval(y, 0) - 1.0
    for sign, inside in ((-1.0, zeros - delta > left), (1.0, zeros + delta < right)):
        pts = zeros[inside] + sign * delta
        if pts.size:
            vals = birkhoff_sum(f0, pts, N, cf)
            centers.append(pts[vals < thr])
    centers = np.mod(np.concatenate(centers), 1.0)

    measured, escapes, G = float("nan"), -1, 0
    if check:
        G = int(math.ceil(grid_factor * N ** 1.3))
        in_A = np.zeros(G, dtype=bool)
        block = max(1, _CHUNK // max(N, 1))
        for s0 in range(0, G, block):
            xs = (np.arange(s0, min(G, s0 + block)) + 0.5) / G
            in_A[s0:s0 + xs.size] = np.abs(birkhoff_sum(f0, xs, N, cf)) <= thr
        measured = float(in_A.mean())
        xs = (np.flatnonzero(in_A) + 0.5) / G
        escapes = int(np.count_nonzero(_arc_distance(xs, centers) > delta))
    return SmallSumCover(N, float(epsilon), float(thr), centers, float(delta), measured, G,
                         escapes, zeros)


def _arc_distance(xs: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Circle distance from each x to the nearest center."""
    if xs.size == 0:
        return xs
    c = np.sort(centers)
    k = np.searchsorted(c, xs)
    a = c[(k - 1) % c.size]
    b = c[k % c.size]
    return np.minimum(circle_distance(xs - a), circle_distance(xs - b))


@dataclass(frozen=True)
class GrowthScanReport:
    observable: str
    N_grid: tuple
    normalized_sup: tuple
    slope: float
    passed: bool


def bv_growth_scan(h: PiecewiseLinear, cf, N_grid: Sequence[int], x_grid,
                   slope_tol: float = 0.05) -> GrowthScanReport:
    """sup over the grid of |S_N(h)| / ln^4 N as N doubles (mean-zero h)."""
    x_grid = np.asarray(x_grid, dtype=np.float64)
    vals = []
    for N in N_grid:
        s = np.abs(h.birkhoff_sums(x_grid, int(N), cf) - N * h.mean)
        vals.append(float(s.max() / math.log(N) ** 4))
    slope = loglog_slope(N_grid, vals)
    return GrowthScanReport(h.name, tuple(int(n) for n in N_grid), tuple(vals), slope,
                            slope <= slope_tol)


@dataclass(frozen=True)
class FewTranslatesReport:
    s: int
    tuples: int
    measure_A: float
    mean: float
    se: float
    expected: float
    z_score: float
    passed: bool


def few_translates_check(base, s: int, tuples: int, rng_seed: int, sigmas: float = 5.0,
                         chunk: int = 20_000) -> FewTranslatesReport:
    """Monte Carlo mean of Leb(cap_i (A + t_i)) over uniform translates vs Leb(A)^s."""
    if not isinstance(base, IntervalUnion):
        base = base.union()
    rng = np.random.default_rng(rng_seed)
    vals = []
    for s0 in range(0, tuples, chunk):
        n = min(chunk, tuples - s0)
        vals.append(translate_intersection_measures(base, rng.random((n, s))))
    v = np.concatenate(vals)
    mean = float(v.mean())
    se = float(v.std(ddof=1) / math.sqrt(v.size))
    expected = base.measure() ** s
    z = (mean - expected) / se if se > 0 else (0.0 if mean == expected else math.inf)
    return FewTranslatesReport(int(s), int(tuples), base.measure(), mean, se, expected, z,
                               abs(z) <= sigmas)
