"""Good singularity tuples: the G1/G2/G3 conditions at finite depth."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .birkhoff import SmallSumCover, compute_AN_cover
from .diophantine import ContinuedFraction, rotate
from .errors import DomainError, LevelError
from .intervals import IntervalUnion, intersection_of_translates
from .kochergin import KocherginFlow, sample_invariant, walk
from .parallel import ordered_map
from .roof import CompositeRoof, SingularRoof


@dataclass(frozen=True)
class GcnSet:
    center: float
    level: int
    radius: float
    raw_count: int
    intervals: IntervalUnion = field(repr=False)

    @property
    def raw_measure(self) -> float:
        return self.raw_count * 2 * self.radius

    def measure(self) -> float:
        return self.intervals.measure()


def build_gcn(c: float, cf: ContinuedFraction, n: int) -> GcnSet:
    """Arcs of radius 1/(q_n ln^5 q_n) around c + k alpha, |k| <= 2 q_{n+1}."""
    if n < 3:
        raise LevelError(f"level n = {n} < 3")
    qn, qn1 = cf.q(n), cf.q(n + 1)
    if qn < 2:
        raise LevelError(f"q_{n} = {qn} too small for ln^5 q_n")
    radius = 1.0 / (qn * math.log(qn) ** 5)
    ks = np.arange(-2 * qn1, 2 * qn1 + 1)
    centers = rotate(c, ks, cf)
    return GcnSet(float(c), int(n), radius, int(ks.size), IntervalUnion.from_arcs(centers, radius))


@dataclass(frozen=True)
class G1Report:
    passed: bool
    levels: tuple
    failure: tuple | None  # (i, j, n, witness)
    gcn_measures: dict = field(default_factory=dict)


def check_G1(tup: Sequence[float], cf: ContinuedFraction, n_range: Sequence[int]) -> G1Report:
    levels = tuple(int(n) for n in n_range)
    measures = {}
    for n in levels:
        sets = [build_gcn(c, cf, n) for c in tup]
        measures[n] = sets[0].measure() if sets else 0.0
        for i, j in itertools.combinations(range(len(tup)), 2):
            hit, w = sets[i].intervals.overlaps(sets[j].intervals)
            if hit:
                return G1Report(False, levels, (i, j, n, w), measures)
    return G1Report(True, levels, None, measures)


_COVERS: dict = {}


def cached_cover(roof: SingularRoof, cf: ContinuedFraction, N: int, epsilon: float) -> SmallSumCover:
    key = (roof, float(cf.alpha), cf.depth, int(N), float(epsilon))
    if key not in _COVERS:
        _COVERS[key] = compute_AN_cover(roof, cf, N, epsilon, check=False)
    return _COVERS[key]


@dataclass(frozen=True)
class G2Report:
    passed: bool
    subset_size: int
    rows: tuple  # (N, subset, measure, bound, paper_target)


def check_G2(tup: Sequence[float], roof: SingularRoof, cf: ContinuedFraction,
             N_grid: Sequence[int], epsilon: float = 0.01, s: int | None = None,
             covers: dict | None = None) -> G2Report:
    """Exact measure of the intersection of translated A_N covers.

    The cover contains A_N, so each number is an upper bound for the
    A_N intersection measure.
    """
    k = len(tup)
    s = max(1, k - 3) if s is None else int(s)
    rows, ok = [], True
    for N in N_grid:
        cov = covers[N] if covers and N in covers else cached_cover(roof, cf, N, epsilon)
        base = cov.union()
        bound = (6 * N * cov.radius) ** s * math.log(N) ** 2
        for sub in itertools.combinations(range(k), s):
            m = intersection_of_translates(base, [tup[i] for i in sub]).measure()
            rows.append((int(N), sub, m, bound, float(N) ** -6))
            ok = ok and m <= bound
    return G2Report(ok, s, tuple(rows))


@dataclass(frozen=True)
class G3Report:
    passed: bool
    samples: int
    max_violations: int
    pass_fraction: float
    witness: tuple | None  # (theta, u, T, indices)
    window_log_power: int = 7


def g3_violations(flow: KocherginFlow, theta, u, T: float, kappa: float, ell: float = 0.5,
                  log_power: int = 7):
    """(B, k) boolean matrix of indices that break one of the two separation conditions."""
    if T <= 1.0:
        raise DomainError(f"window radius needs ln T > 0, got T = {T:g}")
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    cs = np.asarray(flow.roof.singularities)
    r = walk(flow, theta, u, np.full(theta.size, float(T)))

    def near(th, uu, fv):
        d = np.abs(np.mod(th[:, None] - cs[None, :] + 0.5, 1.0) - 0.5)
        band = ((uu >= ell) & (uu <= fv - ell))[:, None]
        return (d < kappa) & band

    bad = near(theta, u, flow.f(theta)) | near(r.theta, r.height, r.roof)
    g = flow.roof.gamma
    W = int(math.floor(2 * T ** g))
    rad = 1.0 / (2 * T ** g * math.log(T) ** log_power)
    ks = np.arange(-W, W + 1)
    base = r.theta
    win = np.zeros_like(bad)
    for j, c in enumerate(cs):
        pts = rotate(base[:, None], ks[None, :], flow.cf)
        d = np.abs(np.mod(pts - c + 0.5, 1.0) - 0.5)
        win[:, j] = np.min(d, axis=1) <= rad
    return bad | win, r


def check_G3(tup: Sequence[float], flow: KocherginFlow, cocycle_kappa: float,
             T_grid: Sequence[float], sample_count: int, rng_seed: int,
             ell: float = 0.5, log_power: int = 7) -> G3Report:
    if tuple(flow.roof.singularities) != tuple(float(np.mod(c, 1.0)) for c in tup):
        flow = flow.with_singularities(tup)
    pts = sample_invariant(flow, rng_seed, sample_count)
    worst, witness, good = 0, None, 0
    total = 0
    for T in T_grid:
        viol, _ = g3_violations(flow, pts.theta, pts.u, T, cocycle_kappa, ell, log_power)
        cnt = viol.sum(axis=1)
        total += cnt.size
        good += int(np.count_nonzero(cnt <= 3))
        i = int(np.argmax(cnt))
        if cnt[i] > worst:
            worst = int(cnt[i])
            witness = (float(pts.theta[i]), float(pts.u[i]), float(T),
                       tuple(int(x) for x in np.flatnonzero(viol[i])))
    return G3Report(worst <= 3, sample_count, worst, good / max(total, 1), witness, log_power)


@dataclass(frozen=True)
class TupleVerdict:
    tuple: tuple
    g1: G1Report
    g2: G2Report
    g3: G3Report
    depths: dict

    @property
    def overall(self) -> bool:
        return self.g1.passed and self.g2.passed and self.g3.passed

    def summary(self) -> dict:
        return {"tuple": list(self.tuple), "g1": self.g1.passed,
                "g1_failure": list(self.g1.failure[:3]) if self.g1.failure else None,
                "g1_witness": self.g1.failure[3] if self.g1.failure else None,
                "g2": self.g2.passed,
                "g2_max_measure": max((r[2] for r in self.g2.rows), default=0.0),
                "g3": self.g3.passed, "g3_max_violations": self.g3.max_violations,
                "g3_pass_fraction": self.g3.pass_fraction, "overall": self.overall,
                "depths": self.depths}


def evaluate_tuple(tup, roof: SingularRoof, cf: ContinuedFraction, depths: Sequence[int],
                   N_grid: Sequence[int], T_grid: Sequence[float], kappa: float,
                   g3_samples: int, seed: int, epsilon: float = 0.01,
                   covers: dict | None = None) -> TupleVerdict:
    tup = tuple(float(np.mod(c, 1.0)) for c in tup)
    g1 = check_G1(tup, cf, depths)
    g2 = check_G2(tup, roof, cf, N_grid, epsilon, covers=covers)
    flow = KocherginFlow(cf, CompositeRoof(roof, tup))
    if len(tup) > 1:
        sep = min(abs(((a - b) + 0.5) % 1.0 - 0.5) for a, b in itertools.combinations(tup, 2))
        kappa = min(kappa, 0.49 * sep) if sep > 0 else kappa
    g3 = check_G3(tup, flow, kappa, T_grid, g3_samples, seed)
    return TupleVerdict(tup, g1, g2, g3, {"n": list(depths), "N": list(N_grid),
                                          "T": list(T_grid), "kappa": kappa})


def _attempt(args):
    return evaluate_tuple(*args)


def search_good_tuples(roof: SingularRoof, cf: ContinuedFraction, count: int,
                       depths: Sequence[int], rng_seed: int, attempts: int,
                       N_grid: Sequence[int] = (64, 256), T_grid: Sequence[float] = (1e2, 1e3),
                       kappa: float = 0.02, g3_samples: int = 200, epsilon: float = 0.01,
                       workers: int = 1) -> list[TupleVerdict]:
    if attempts < 1:
        raise ValueError("attempts must be >= 1")
    children = np.random.SeedSequence(rng_seed).spawn(attempts + 1)
    tuples = np.random.default_rng(children[0]).random((attempts, count))
    seeds = [int(c.generate_state(1)[0]) for c in children[1:]]
    # covers are built once here and shipped to the workers
    covers = {N: cached_cover(roof, cf, N, epsilon) for N in N_grid}
    tasks = [(tuple(t), roof, cf, tuple(depths), tuple(N_grid), tuple(T_grid), kappa,
              g3_samples, sd, epsilon, covers) for t, sd in zip(tuples, seeds)]
    return ordered_map(_attempt, tasks, workers)
