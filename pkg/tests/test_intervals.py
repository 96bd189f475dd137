import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kochlab.intervals import (IntervalUnion, intersection_of_translates,
                               translate_intersection_measure, translate_intersection_measures)

GRID = (np.arange(200_000) + 0.5) / 200_000


def grid_measure(mask):
    return mask.mean()


arcs = st.lists(st.tuples(st.floats(0, 1, exclude_max=True), st.floats(0.0, 0.3)),
                min_size=1, max_size=6)


def union_of(arc_list):
    lo = np.array([a for a, _ in arc_list])
    hi = lo + np.array([w for _, w in arc_list])
    return IntervalUnion.from_pieces(lo, hi)


@given(arcs)
@settings(max_examples=60, deadline=None)
def test_measure_matches_grid(arc_list):
    u = union_of(arc_list)
    assert u.measure() == pytest.approx(grid_measure(u.contains(GRID)), abs=2e-5 * (u.size + 1))
    assert np.all(np.diff(u.lo) > 0) and np.all(u.hi > u.lo)
    assert np.all(u.lo[1:] > u.hi[:-1])


@given(arcs, arcs)
@settings(max_examples=60, deadline=None)
def test_intersection_matches_grid(a, b):
    u, v = union_of(a), union_of(b)
    w = u.intersect(v)
    ref = grid_measure(u.contains(GRID) & v.contains(GRID))
    assert w.measure() == pytest.approx(ref, abs=2e-5 * (u.size + v.size + 1))


@given(arcs, st.lists(st.floats(0, 1), min_size=1, max_size=3))
@settings(max_examples=60, deadline=None)
def test_batched_measure_matches_single(a, ts):
    u = union_of(a)
    single = translate_intersection_measure(u, ts)
    batched = translate_intersection_measures(u, np.array([ts]))[0]
    assert batched == pytest.approx(single, abs=1e-12)


def test_identical_and_disjoint_translates():
    A = IntervalUnion.from_pieces([0.0], [0.1])
    assert translate_intersection_measure(A, (0.0, 0.0)) == pytest.approx(0.1)
    assert translate_intersection_measure(A, (0.0, 0.5)) == 0.0


def test_wrapping_arc_cut_at_zero():
    u = IntervalUnion.from_arcs([0.0], 0.05)
    assert u.size == 2 and u.measure() == pytest.approx(0.1)
    assert bool(u.contains(0.99)) and bool(u.contains(0.01)) and not bool(u.contains(0.5))


def test_full_circle():
    u = IntervalUnion.from_arcs([0.3], 0.7)
    assert u.measure() == 1.0


def test_overlaps_closed_endpoints():
    a = IntervalUnion.from_pieces([0.1], [0.2])
    b = IntervalUnion.from_pieces([0.2], [0.3])
    c = IntervalUnion.from_pieces([0.25], [0.3])
    assert a.overlaps(b)[0]
    assert not a.overlaps(c)[0]


def test_intersection_of_no_translates_is_empty():
    assert intersection_of_translates(IntervalUnion.from_pieces([0], [0.5]), []).measure() == 0.0
