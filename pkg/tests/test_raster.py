import pickle

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from reiflab.raster import GridTooLarge, RunGrid, normalize_runs, xor_row_pairs

masks = st.tuples(st.integers(1, 20), st.integers(1, 20)).flatmap(lambda s: arrays(np.bool_, s))


def same_shape_pair():
    return st.tuples(st.integers(1, 15), st.integers(1, 15)).flatmap(
        lambda s: st.tuples(arrays(np.bool_, s), arrays(np.bool_, s))
    )


@given(masks)
def test_dense_round_trip(m):
    g = RunGrid.from_dense(m)
    assert np.array_equal(g.to_dense(), m)
    assert g.count() == m.sum()
    assert g.is_empty() == (not m.any())
    assert g.is_full() == m.all()
    assert pickle.loads(pickle.dumps(g)) == g


@given(masks)
def test_complement_involution(m):
    g = RunGrid.from_dense(m)
    assert np.array_equal(g.complement().to_dense(), ~m)
    assert g.complement().complement() == g


@given(same_shape_pair())
def test_set_operations(pair):
    a, b = pair
    A, B = RunGrid.from_dense(a), RunGrid.from_dense(b)
    assert np.array_equal(A.union(B).to_dense(), a | b)
    assert np.array_equal(A.intersection(B).to_dense(), a & b)
    assert np.array_equal(A.difference(B).to_dense(), a & ~b)
    assert A.intersection_count(B) == (a & b).sum()
    assert A.xor_count(B) == (a ^ b).sum()


@given(masks, st.data())
def test_queries(m, data):
    g = RunGrid.from_dense(m)
    H, W = m.shape
    i = np.array(data.draw(st.lists(st.integers(-2, H + 1), min_size=1, max_size=20)))
    j = np.array(data.draw(st.lists(st.integers(-2, W + 1), min_size=len(i), max_size=len(i))))
    inside = (i >= 0) & (i < H) & (j >= 0) & (j < W)
    expect = np.zeros(len(i), bool)
    expect[inside] = m[i[inside], j[inside]]
    assert np.array_equal(g.contains(i, j), expect)
    rows = np.clip(i, 0, H - 1)
    ja = np.clip(j, 0, W)
    jb = np.clip(j + 3, 0, W)
    got = g.count_range(rows, np.minimum(ja, jb), jb)
    ref = [m[r, a:b].sum() for r, a, b in zip(rows, np.minimum(ja, jb), jb)]
    assert np.array_equal(got, ref)


@given(masks)
def test_row_extremes(m):
    g = RunGrid.from_dense(m)
    rows, lo, hi = g.row_extremes()
    ref = np.flatnonzero(m.any(axis=1))
    assert np.array_equal(rows, ref)
    for r, a, b in zip(rows, lo, hi):
        idx = np.flatnonzero(m[r])
        assert a == idx[0] and b == idx[-1] + 1


@given(masks)
def test_xor_row_pairs(m):
    g = RunGrid.from_dense(m)
    H, W = m.shape
    pi, pj = xor_row_pairs(g, 0, H - 1)
    ref = np.argwhere(m[:-1] != m[1:]) if H > 1 else np.zeros((0, 2), int)
    assert np.array_equal(np.column_stack([pi, pj]), ref.reshape(-1, 2))


@given(masks)
def test_select_runs_partition(m):
    g = RunGrid.from_dense(m)
    keep = np.arange(g.n_runs) % 2 == 0
    a, b = g.select_runs(keep), g.select_runs(~keep)
    assert a.intersection_count(b) == 0
    assert a.union(b) == g


def test_normalize_merges_overlaps():
    row_ptr, s, e = normalize_runs(2, 10, [0, 0, 0, 1], [0, 2, 7, 3], [3, 5, 9, 3])
    assert list(row_ptr) == [0, 2, 2]
    assert list(zip(s, e)) == [(0, 5), (7, 9)]


def test_invalid_runs_rejected():
    with pytest.raises(ValueError):
        RunGrid(5, 1, [0, 2], [0, 2], [3, 4])  # overlapping
    with pytest.raises(ValueError):
        RunGrid(5, 1, [0, 1], [3], [7])  # past the right edge


def test_dense_refusal_on_huge_grid():
    g = RunGrid.empty(100_000, 100_000)
    with pytest.raises(GridTooLarge):
        g.to_dense()
