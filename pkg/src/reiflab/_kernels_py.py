"""Pure-Python/numpy versions of the hot kernels.

Every function here has a twin in ``_kernels.pyx`` with the same signature and
the same arithmetic order, so the two agree to rounding.
"""
import math

import numpy as np

IMPLEMENTATION = "python"


def _brk(t, o2, i, j):
    # abscissa where line j starts to undercut line i on the lower envelope
    return 0.5 * (t[i] + t[j]) + (o2[j] - o2[i]) / (2.0 * (t[j] - t[i]))


def segment_gap(t, o, lo, hi):
    """sup over u in [lo, hi] of min_i sqrt((u - t_i)^2 + o_i^2).

    ``t`` must be sorted ascending. Returns 0.0 for an empty segment or an
    empty point set is treated as +inf distance (returns inf).
    """
    n = len(t)
    if lo > hi:
        return 0.0
    if n == 0:
        return math.inf
    t = [float(v) for v in t]
    o2 = [float(v) * float(v) for v in o]
    stack = []
    for i in range(n):
        if stack and t[stack[-1]] == t[i]:
            if o2[stack[-1]] <= o2[i]:
                continue
            stack.pop()
        while len(stack) >= 2 and _brk(t, o2, stack[-2], i) <= _brk(t, o2, stack[-2], stack[-1]):
            stack.pop()
        stack.append(i)
    top = len(stack)
    best = -1.0
    for m in range(top):
        left = -math.inf if m == 0 else _brk(t, o2, stack[m - 1], stack[m])
        right = math.inf if m == top - 1 else _brk(t, o2, stack[m], stack[m + 1])
        a = left if left > lo else lo
        b = right if right < hi else hi
        if a > b:
            continue
        k = stack[m]
        da = (a - t[k]) * (a - t[k])
        db = (b - t[k]) * (b - t[k])
        v = (da if da > db else db) + o2[k]
        if v > best:
            best = v
    if best < 0.0:
        return 0.0
    return math.sqrt(best)


def plane_deviation(rel, theta, lo, hi):
    """Two-sided Hausdorff distance between points ``rel`` and the segment
    {u (cos theta, sin theta) : lo <= u <= hi}."""
    rel = np.ascontiguousarray(rel, dtype=np.float64)
    c = math.cos(theta)
    s = math.sin(theta)
    x = rel[:, 0]
    y = rel[:, 1]
    t = x * c + y * s
    o = y * c - x * s
    e = np.maximum(np.maximum(lo - t, t - hi), 0.0)
    one = float(np.sqrt(np.max(o * o + e * e))) if len(t) else 0.0
    order = np.argsort(t, kind="stable")
    gap = segment_gap(t[order], o[order], lo, hi)
    return one if one > gap else gap


def deviation_sweep(rel, thetas, lo, hi):
    thetas = np.asarray(thetas, dtype=np.float64)
    lo = np.broadcast_to(np.asarray(lo, dtype=np.float64), thetas.shape)
    hi = np.broadcast_to(np.asarray(hi, dtype=np.float64), thetas.shape)
    out = np.empty(len(thetas))
    for k in range(len(thetas)):
        out[k] = plane_deviation(rel, float(thetas[k]), float(lo[k]), float(hi[k]))
    return out


def directed_hausdorff(A, B):
    """Return (sup_a min_b |a-b|, index of a, index of b)."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    B = np.ascontiguousarray(B, dtype=np.float64)
    if len(A) == 0:
        return 0.0, -1, -1
    if len(B) == 0:
        return math.inf, 0, -1
    cmax = -1.0
    ia = 0
    ib = 0
    block = max(1, 2_000_000 // max(len(B), 1))
    for s in range(0, len(A), block):
        a = A[s:s + block]
        d2 = np.zeros((len(a), len(B)))
        for k in range(A.shape[1]):
            diff = a[:, k:k + 1] - B[None, :, k]
            d2 += diff * diff
        jm = np.argmin(d2, axis=1)
        cm = d2[np.arange(len(a)), jm]
        r = int(np.argmax(cm))
        if cm[r] > cmax:
            cmax = float(cm[r])
            ia = s + r
            ib = int(jm[r])
    return math.sqrt(cmax), ia, ib


def label_runs(row_ptr, starts, ends):
    """4-connected component labels of per-row runs [start, end).

    Labels are numbered in order of first appearance in run order.
    """
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    row_ptr = np.asarray(row_ptr, dtype=np.int64)
    starts = np.asarray(starts, dtype=np.int64)
    ends = np.asarray(ends, dtype=np.int64)
    n = len(starts)
    if n == 0:
        return np.zeros(0, dtype=np.int64), 0
    H = len(row_ptr) - 1
    counts = np.diff(row_ptr)
    rows = np.repeat(np.arange(H, dtype=np.int64), counts)
    W = int(max(ends.max(), 1)) + 1
    key_s = rows * W + starts
    key_e = rows * W + ends
    # for run a in row i, overlapping runs b in row i+1 satisfy
    # start_b < end_a and end_b > start_a
    nxt = rows + 1
    lo = np.searchsorted(key_e, nxt * W + starts, side="right")
    hi = np.searchsorted(key_s, nxt * W + ends, side="left")
    cnt = np.maximum(hi - lo, 0)
    src = np.repeat(np.arange(n), cnt)
    first = np.repeat(lo - np.cumsum(cnt) + cnt, cnt)
    dst = np.arange(len(src)) + first
    g = coo_matrix((np.ones(len(src), dtype=np.int8), (src, dst)), shape=(n, n))
    _, lab = connected_components(g, directed=False)
    _, first_idx, inv = np.unique(lab, return_index=True, return_inverse=True)
    order = np.argsort(first_idx, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return rank[inv].astype(np.int64), int(len(order))


def _cross(ox, oy, ax, ay, bx, by):
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


def hull_sorted(px, py):
    """Convex hull (counter-clockwise, collinear points dropped) of points
    already sorted lexicographically. Returns vertex indices."""
    n = len(px)
    px = [float(v) for v in px]
    py = [float(v) for v in py]
    if n < 3:
        return np.arange(n, dtype=np.int64)
    lower = []
    for i in range(n):
        while len(lower) >= 2 and _cross(px[lower[-2]], py[lower[-2]], px[lower[-1]], py[lower[-1]], px[i], py[i]) <= 0:
            lower.pop()
        lower.append(i)
    upper = []
    for i in range(n - 1, -1, -1):
        while len(upper) >= 2 and _cross(px[upper[-2]], py[upper[-2]], px[upper[-1]], py[upper[-1]], px[i], py[i]) <= 0:
            upper.pop()
        upper.append(i)
    return np.array(lower[:-1] + upper[:-1], dtype=np.int64)
