"""Finite unions of arcs on the circle R/Z.

Arcs are stored as sorted, disjoint, half-open pieces [l, r) inside [0, 1];
an arc crossing 0 is cut in two.  All measures are sums of float endpoint
differences taken with ``math.fsum``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def _merge(lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Merge overlapping (or touching) pieces of [0, 1]."""
    if lo.size == 0:
        return lo, hi
    order = np.argsort(lo, kind="stable")
    lo, hi = lo[order], hi[order]
    run_hi = np.maximum.accumulate(hi)
    # a new block starts where lo exceeds the running max of previous ends
    starts = np.ones(lo.size, dtype=bool)
    starts[1:] = lo[1:] > run_hi[:-1]
    idx = np.flatnonzero(starts)
    ends = np.append(idx[1:], lo.size) - 1
    return lo[idx], run_hi[ends]


def _cut(lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cut arcs [lo, hi) (lengths <= 1, lo arbitrary) into pieces of [0, 1]."""
    length = hi - lo
    full = length >= 1.0
    a = np.mod(lo, 1.0)
    b = a + length
    wrap = (b > 1.0) & ~full
    l1 = np.where(full, 0.0, a)
    h1 = np.where(full, 1.0, np.minimum(b, 1.0))
    l2 = np.zeros(int(wrap.sum()))
    h2 = b[wrap] - 1.0
    return np.concatenate([l1, l2]), np.concatenate([h1, h2])


@dataclass(frozen=True)
class IntervalUnion:
    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def empty(cls) -> "IntervalUnion":
        return cls(np.zeros(0), np.zeros(0))

    @classmethod
    def from_pieces(cls, lo, hi) -> "IntervalUnion":
        lo = np.asarray(lo, dtype=np.float64).ravel()
        hi = np.asarray(hi, dtype=np.float64).ravel()
        keep = hi > lo
        l, h = _cut(lo[keep], hi[keep])
        keep = h > l
        l, h = _merge(l[keep], h[keep])
        return cls(l, h)

    @classmethod
    def from_arcs(cls, centers, radius) -> "IntervalUnion":
        c = np.asarray(centers, dtype=np.float64).ravel()
        r = np.broadcast_to(np.asarray(radius, dtype=np.float64), c.shape)
        return cls.from_pieces(c - r, c + r)

    @property
    def size(self) -> int:
        return int(self.lo.size)

    def measure(self) -> float:
        return math.fsum((self.hi - self.lo).tolist())

    def translate(self, t: float) -> "IntervalUnion":
        return IntervalUnion.from_pieces(self.lo + t, self.hi + t)

    def intersect(self, other: "IntervalUnion") -> "IntervalUnion":
        if self.size == 0 or other.size == 0:
            return IntervalUnion.empty()
        # for each piece of self, the pieces of other that can overlap it
        i0 = np.searchsorted(other.hi, self.lo, side="right")
        i1 = np.searchsorted(other.lo, self.hi, side="left")
        cnt = np.maximum(i1 - i0, 0)
        if cnt.sum() == 0:
            return IntervalUnion.empty()
        rows = np.repeat(np.arange(self.size), cnt)
        offs = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        cols = np.repeat(i0, cnt) + offs
        lo = np.maximum(self.lo[rows], other.lo[cols])
        hi = np.minimum(self.hi[rows], other.hi[cols])
        keep = hi > lo
        return IntervalUnion(lo[keep], hi[keep])

    def overlaps(self, other: "IntervalUnion") -> tuple[bool, float | None]:
        """Closed-set overlap test; returns a witness point when they meet."""
        if self.size == 0 or other.size == 0:
            return False, None
        i0 = np.searchsorted(other.hi, self.lo, side="left")
        i1 = np.searchsorted(other.lo, self.hi, side="right")
        hit = np.flatnonzero(i1 > i0)
        if hit.size:
            k = hit[0]
            j = i0[k]
            a = max(self.lo[k], other.lo[j])
            b = min(self.hi[k], other.hi[j])
            return True, float((a + b) / 2)
        # closed arcs also meet across 0 ~ 1
        if (self.lo[0] == 0.0 and other.hi[-1] == 1.0) or (other.lo[0] == 0.0 and self.hi[-1] == 1.0):
            return True, 0.0
        return False, None

    def contains(self, x) -> np.ndarray:
        x = np.mod(np.asarray(x, dtype=np.float64), 1.0)
        if self.size == 0:
            return np.zeros(x.shape, dtype=bool)
        k = np.searchsorted(self.lo, x, side="right") - 1
        ok = k >= 0
        kk = np.clip(k, 0, None)
        return ok & (x < self.hi[kk])


def intersection_of_translates(base: IntervalUnion, translates) -> IntervalUnion:
    out = None
    for t in translates:
        piece = base.translate(float(t))
        out = piece if out is None else out.intersect(piece)
        if out.size == 0:
            break
    return out if out is not None else IntervalUnion.empty()


def translate_intersection_measure(base, translates) -> float:
    """Exact measure of the intersection of ``base + t_i`` over the translates.

    ``base`` is an IntervalUnion or anything with a ``union()`` method (a cover).
    """
    if not isinstance(base, IntervalUnion):
        base = base.union()
    return intersection_of_translates(base, translates).measure()


def translate_intersection_measures(base: IntervalUnion, translates: np.ndarray) -> np.ndarray:
    """Batched version: one measure per row of the (B, s) translate matrix.

    Each row is handled by an endpoint sweep: the coverage count of the s
    translated copies is tracked over sorted events, and the measure is the
    total length where the count equals s.
    """
    tr = np.atleast_2d(np.asarray(translates, dtype=np.float64))
    B, s = tr.shape
    if base.size == 0:
        return np.zeros(B)
    lo = (base.lo[None, None, :] + tr[:, :, None]).reshape(B, -1)
    hi = (base.hi[None, None, :] + tr[:, :, None]).reshape(B, -1)
    a = np.mod(lo, 1.0)
    length = hi - lo
    b = a + length
    # each piece becomes two fixed-shape pieces: [a, min(b,1)) and [0, max(b-1,0))
    starts = np.concatenate([a, np.zeros_like(a)], axis=1)
    ends = np.concatenate([np.minimum(b, 1.0), np.maximum(b - 1.0, 0.0)], axis=1)
    pos = np.concatenate([starts, ends], axis=1)
    delta = np.concatenate([np.ones_like(starts), -np.ones_like(ends)], axis=1)
    # empty pieces contribute +1 and -1 at the same position: harmless once
    # ends sort before starts at equal positions
    order = np.lexsort((delta, pos), axis=-1)
    pos = np.take_along_axis(pos, order, axis=1)
    delta = np.take_along_axis(delta, order, axis=1)
    cover = np.cumsum(delta, axis=1)
    seg = np.diff(pos, axis=1)
    full = cover[:, :-1] >= s
    return np.sum(np.where(full, seg, 0.0), axis=1)
