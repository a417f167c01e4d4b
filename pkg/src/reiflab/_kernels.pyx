# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot kernels (see _kernels_py.py for the reference)."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, cos, sin, INFINITY

cnp.import_array()

IMPLEMENTATION = "cython"


cdef inline double _brk(const double* t, const double* o2, Py_ssize_t i, Py_ssize_t j) noexcept nogil:
    return 0.5 * (t[i] + t[j]) + (o2[j] - o2[i]) / (2.0 * (t[j] - t[i]))


cdef double _gap(const double* t, const double* o2, Py_ssize_t n, double lo, double hi,
                 Py_ssize_t* stack) noexcept nogil:
    cdef Py_ssize_t i, m, k, top = 0
    cdef double left, right, a, b, da, db, v, best = -1.0
    if lo > hi:
        return 0.0
    if n == 0:
        return INFINITY
    for i in range(n):
        if top > 0 and t[stack[top - 1]] == t[i]:
            if o2[stack[top - 1]] <= o2[i]:
                continue
            top -= 1
        while top >= 2 and _brk(t, o2, stack[top - 2], i) <= _brk(t, o2, stack[top - 2], stack[top - 1]):
            top -= 1
        stack[top] = i
        top += 1
    for m in range(top):
        if m == 0:
            left = -INFINITY
        else:
            left = _brk(t, o2, stack[m - 1], stack[m])
        if m == top - 1:
            right = INFINITY
        else:
            right = _brk(t, o2, stack[m], stack[m + 1])
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
    return sqrt(best)


def segment_gap(t, o, double lo, double hi):
    cdef const double[::1] tv = np.ascontiguousarray(t, dtype=np.float64)
    cdef const double[::1] ov = np.ascontiguousarray(o, dtype=np.float64)
    cdef Py_ssize_t n = tv.shape[0], i
    if lo > hi:
        return 0.0
    if n == 0:
        return INFINITY
    cdef double[::1] o2 = np.empty(n)
    cdef Py_ssize_t[::1] stack = np.empty(n, dtype=np.intp)
    for i in range(n):
        o2[i] = ov[i] * ov[i]
    return _gap(&tv[0], &o2[0], n, lo, hi, &stack[0])


cdef double _deviation(const double[:, ::1] rel, double theta, double lo, double hi,
                       double[::1] t, double[::1] o, double[::1] ts, double[::1] o2s,
                       Py_ssize_t[::1] stack):
    cdef Py_ssize_t n = rel.shape[0], i, k
    cdef double c = cos(theta), s = sin(theta), x, y, e, v, one = 0.0, gap
    if n == 0:
        return 0.0
    for i in range(n):
        x = rel[i, 0]
        y = rel[i, 1]
        t[i] = x * c + y * s
        o[i] = y * c - x * s
        e = lo - t[i]
        if t[i] - hi > e:
            e = t[i] - hi
        if e < 0.0:
            e = 0.0
        v = o[i] * o[i] + e * e
        if v > one:
            one = v
    one = sqrt(one)
    cdef cnp.intp_t[::1] order = np.argsort(np.asarray(t), kind="stable")
    for i in range(n):
        k = order[i]
        ts[i] = t[k]
        o2s[i] = o[k] * o[k]
    gap = _gap(&ts[0], &o2s[0], n, lo, hi, &stack[0])
    return one if one > gap else gap


def plane_deviation(rel, double theta, double lo, double hi):
    cdef const double[:, ::1] r = np.ascontiguousarray(rel, dtype=np.float64)
    cdef Py_ssize_t n = r.shape[0]
    if n == 0:
        return segment_gap(np.zeros(0), np.zeros(0), lo, hi)
    return _deviation(r, theta, lo, hi, np.empty(n), np.empty(n), np.empty(n), np.empty(n),
                      np.empty(n, dtype=np.intp))


def deviation_sweep(rel, thetas, lo, hi):
    cdef const double[:, ::1] r = np.ascontiguousarray(rel, dtype=np.float64)
    th_arr = np.ascontiguousarray(thetas, dtype=np.float64)
    cdef const double[::1] th = th_arr
    cdef const double[::1] lov = np.ascontiguousarray(np.broadcast_to(np.asarray(lo, dtype=np.float64), th_arr.shape))
    cdef const double[::1] hiv = np.ascontiguousarray(np.broadcast_to(np.asarray(hi, dtype=np.float64), th_arr.shape))
    cdef Py_ssize_t n = r.shape[0], k
    out = np.empty(th.shape[0])
    cdef double[::1] ov = out
    if n == 0:
        for k in range(th.shape[0]):
            ov[k] = segment_gap(np.zeros(0), np.zeros(0), lov[k], hiv[k])
        return out
    cdef double[::1] t = np.empty(n), o = np.empty(n), ts = np.empty(n), o2s = np.empty(n)
    cdef Py_ssize_t[::1] stack = np.empty(n, dtype=np.intp)
    for k in range(th.shape[0]):
        ov[k] = _deviation(r, th[k], lov[k], hiv[k], t, o, ts, o2s, stack)
    return out


def directed_hausdorff(A, B):
    cdef const double[:, ::1] a = np.ascontiguousarray(A, dtype=np.float64)
    cdef const double[:, ::1] b = np.ascontiguousarray(B, dtype=np.float64)
    cdef Py_ssize_t na = a.shape[0], nb = b.shape[0], dim = a.shape[1], i, j, k, jmin
    cdef double cmax = -1.0, cmin, d2, diff
    cdef Py_ssize_t ia = 0, ib = 0
    cdef bint broke
    if na == 0:
        return 0.0, -1, -1
    if nb == 0:
        return INFINITY, 0, -1
    with nogil:
        for i in range(na):
            cmin = INFINITY
            jmin = 0
            broke = False
            for j in range(nb):
                d2 = 0.0
                for k in range(dim):
                    diff = a[i, k] - b[j, k]
                    d2 = d2 + diff * diff
                if d2 < cmin:
                    cmin = d2
                    jmin = j
                    if cmin < cmax:
                        broke = True
                        break
            if not broke and cmin > cmax:
                cmax = cmin
                ia = i
                ib = jmin
    return sqrt(cmax), ia, ib


cdef inline Py_ssize_t _find(Py_ssize_t* parent, Py_ssize_t x) noexcept nogil:
    cdef Py_ssize_t r = x, nx
    while parent[r] != r:
        r = parent[r]
    while parent[x] != r:
        nx = parent[x]
        parent[x] = r
        x = nx
    return r


def label_runs(row_ptr, starts, ends):
    cdef const cnp.int64_t[::1] rp = np.ascontiguousarray(row_ptr, dtype=np.int64)
    cdef const cnp.int64_t[::1] s = np.ascontiguousarray(starts, dtype=np.int64)
    cdef const cnp.int64_t[::1] e = np.ascontiguousarray(ends, dtype=np.int64)
    cdef Py_ssize_t n = s.shape[0], H = rp.shape[0] - 1, i, a, a_end, b, b_end, ra, rb, nl = 0
    if n == 0:
        return np.zeros(0, dtype=np.int64), 0
    cdef Py_ssize_t[::1] parent = np.arange(n, dtype=np.intp)
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] lab = out
    cdef cnp.int64_t[::1] newid = np.full(n, -1, dtype=np.int64)
    with nogil:
        for i in range(H - 1):
            a = rp[i]
            a_end = rp[i + 1]
            b = rp[i + 1]
            b_end = rp[i + 2]
            while a < a_end and b < b_end:
                if s[a] < e[b] and s[b] < e[a]:
                    ra = _find(&parent[0], a)
                    rb = _find(&parent[0], b)
                    if ra != rb:
                        if ra < rb:
                            parent[rb] = ra
                        else:
                            parent[ra] = rb
                if e[a] < e[b]:
                    a += 1
                else:
                    b += 1
        for i in range(n):
            ra = _find(&parent[0], i)
            if newid[ra] < 0:
                newid[ra] = nl
                nl += 1
            lab[i] = newid[ra]
    return out, nl


cdef inline double _cross(double ox, double oy, double ax, double ay, double bx, double by) noexcept nogil:
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


def hull_sorted(px, py):
    cdef const double[::1] x = np.ascontiguousarray(px, dtype=np.float64)
    cdef const double[::1] y = np.ascontiguousarray(py, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], i, kl = 0, ku = 0
    if n < 3:
        return np.arange(n, dtype=np.int64)
    lower = np.empty(n, dtype=np.int64)
    upper = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] lw = lower
    cdef cnp.int64_t[::1] up = upper
    with nogil:
        for i in range(n):
            while kl >= 2 and _cross(x[lw[kl - 2]], y[lw[kl - 2]], x[lw[kl - 1]], y[lw[kl - 1]], x[i], y[i]) <= 0:
                kl -= 1
            lw[kl] = i
            kl += 1
        for i in range(n - 1, -1, -1):
            while ku >= 2 and _cross(x[up[ku - 2]], y[up[ku - 2]], x[up[ku - 1]], y[up[ku - 1]], x[i], y[i]) <= 0:
                ku -= 1
            up[ku] = i
            ku += 1
    return np.concatenate([lower[:kl - 1], upper[:ku - 1]])
