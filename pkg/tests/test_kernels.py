import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import ndimage

from reiflab import kernels
from reiflab.kernels import compiled_impl, python_impl
from reiflab.raster import RunGrid

needs_ext = pytest.mark.skipif(compiled_impl is None, reason="compiled extension not built")
IMPLS = [python_impl] + ([compiled_impl] if compiled_impl is not None else [])

vals = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def _gap_oracle(t, o, lo, hi, n=20001):
    # sup over a dense grid of s in [lo, hi] of min_i sqrt((s - t_i)^2 + o_i^2)
    s = np.linspace(lo, hi, n)
    return float(np.max(np.min(np.hypot(s[:, None] - t[None, :], o[None, :]), axis=1)))


@pytest.mark.parametrize("impl", IMPLS, ids=lambda m: m.IMPLEMENTATION)
def test_segment_gap_against_dense_scan(impl):
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = rng.integers(1, 30)
        t = np.sort(rng.uniform(-1, 1, n))
        o = rng.uniform(-0.2, 0.2, n)
        got = impl.segment_gap(t, o, -1.0, 1.0)
        # the dense scan misses the maximum by at most half a grid step
        assert got >= _gap_oracle(t, o, -1, 1) - 1e-12
        assert got <= _gap_oracle(t, o, -1, 1) + 1e-4


@pytest.mark.parametrize("impl", IMPLS, ids=lambda m: m.IMPLEMENTATION)
def test_segment_gap_edge_cases(impl):
    assert impl.segment_gap(np.zeros(0), np.zeros(0), -1.0, 1.0) == math.inf
    assert impl.segment_gap(np.array([0.0]), np.array([0.0]), 1.0, -1.0) == 0.0
    assert impl.segment_gap(np.array([0.0]), np.array([0.0]), -1.0, 1.0) == 1.0


@needs_ext
@given(arrays(np.float64, st.tuples(st.integers(1, 60), st.just(2)), elements=vals), st.floats(0, math.pi))
def test_plane_deviation_implementations_agree(rel, theta):
    a = compiled_impl.plane_deviation(rel, theta, -3.0, 3.0)
    b = python_impl.plane_deviation(rel, theta, -3.0, 3.0)
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


@needs_ext
def test_deviation_sweep_implementations_agree():
    rng = np.random.default_rng(5)
    rel = rng.normal(size=(500, 2)) * [1, 0.05]
    th = np.linspace(0, np.pi, 720, endpoint=False)
    lo = -rng.uniform(0.5, 2, 720)
    hi = rng.uniform(0.5, 2, 720)
    a = compiled_impl.deviation_sweep(rel, th, lo, hi)
    b = python_impl.deviation_sweep(rel, th, lo, hi)
    assert np.max(np.abs(a - b)) <= 1e-12


@needs_ext
def test_directed_hausdorff_implementations_agree():
    rng = np.random.default_rng(6)
    for n, m in [(1, 1), (50, 70), (700, 300)]:
        A = rng.normal(size=(n, 2))
        B = rng.normal(size=(m, 2))
        a = compiled_impl.directed_hausdorff(A, B)
        b = python_impl.directed_hausdorff(A, B)
        assert abs(a[0] - b[0]) <= 1e-12
        assert a[1:] == b[1:]


def _label_oracle(mask):
    lab, n = ndimage.label(mask)  # 4-connectivity by default
    return lab, n


@pytest.mark.parametrize("impl", IMPLS, ids=lambda m: m.IMPLEMENTATION)
@given(arrays(np.bool_, st.tuples(st.integers(1, 25), st.integers(1, 25))))
def test_label_runs_matches_flood_fill(impl, mask):
    g = RunGrid.from_dense(mask)
    labels, n = impl.label_runs(g.row_ptr, g.starts, g.ends)
    _, n_ref = _label_oracle(mask)
    assert n == n_ref
    out = np.full(mask.shape, -1)
    rows = g.run_rows()
    for r, s, e, lb in zip(rows, g.starts, g.ends, labels):
        out[r, s:e] = lb
    ref, _ = _label_oracle(mask)
    # same partition: a bijection between label sets
    pairs = {(a, b) for a, b in zip(out[mask], ref[mask])}
    assert len(pairs) == n
    # labels in order of first appearance (row-major)
    first = [out[mask][np.flatnonzero(out[mask] == k)[0]] for k in range(n)]
    seen = list(dict.fromkeys(out[mask].tolist()))
    assert seen == list(range(n)) and first == list(range(n))


@pytest.mark.parametrize("impl", IMPLS, ids=lambda m: m.IMPLEMENTATION)
def test_hull_sorted(impl):
    rng = np.random.default_rng(9)
    P = rng.uniform(-1, 1, (400, 2))
    P = np.unique(np.vstack([P, [[-2, -2], [2, -2], [2, 2], [-2, 2], [0, -2]]]), axis=0)
    idx = impl.hull_sorted(P[:, 0].copy(), P[:, 1].copy())
    H = P[idx]
    assert sorted(map(tuple, H)) == sorted([(-2.0, -2.0), (2.0, -2.0), (2.0, 2.0), (-2.0, 2.0)])
    # counter-clockwise
    area = 0.5 * np.sum(H[:, 0] * np.roll(H[:, 1], -1) - np.roll(H[:, 0], -1) * H[:, 1])
    assert area == pytest.approx(16.0)


@needs_ext
def test_hull_implementations_agree():
    rng = np.random.default_rng(10)
    P = np.unique(rng.normal(size=(3000, 2)), axis=0)
    a = compiled_impl.hull_sorted(P[:, 0].copy(), P[:, 1].copy())
    b = python_impl.hull_sorted(P[:, 0].copy(), P[:, 1].copy())
    assert np.array_equal(a, b)


def test_selector_reports_implementation():
    assert kernels.IMPLEMENTATION in ("cython", "python")
    if compiled_impl is not None:
        assert kernels.IMPLEMENTATION == "cython"
