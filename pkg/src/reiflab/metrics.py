"""Distances between domains, symmetric differences, radii and the
inequalities relating them.

Sets and complements are compared through their cell centers with an exact
Euclidean distance transform; boundaries through their boundary samples.
Everything is measured on the shared grid, so complements are clipped to
the bounding box.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy import ndimage

from . import kernels
from ._util import CheckResult, jsonable
from .domains import Domain, DomainError
from .geometry import hausdorff_witness
from .raster import GridTooLarge

MODES = ("sets", "complements", "boundaries")
DENSE_CELLS = 16_000_000  # largest grid handled by a dense distance transform
COARSE_BLOCKS = 2048  # blocks per side for the coarse inner-radius search


class MetricsError(ValueError):
    pass


def _check_pair(X: Domain, Y: Domain):
    if X.bbox != Y.bbox or X.resolution != Y.resolution or X.grid.shape != Y.grid.shape:
        raise MetricsError("mismatched grids")


# ---------------------------------------------------------------------------
# distances


@dataclass
class DistanceReport:
    mode: str
    value: float
    witness_pair: tuple
    clipped: bool
    witness_interior: bool  # both witnesses at least 2 cells from the bbox edge

    def to_dict(self):
        return jsonable(
            {
                "mode": self.mode,
                "value": self.value,
                "witness_pair": [list(self.witness_pair[0]), list(self.witness_pair[1])],
                "clipped": self.clipped,
                "witness_interior": self.witness_interior,
            }
        )


def _directed_cells(A: NDArray[np.bool_], B: NDArray[np.bool_], h: float):
    """sup over A-cells of the distance to the nearest B-cell, with witness cells."""
    dist, idx = ndimage.distance_transform_edt(~B, return_indices=True)
    vals = np.where(A, dist, -1.0)
    k = int(np.argmax(vals))
    i, j = np.unravel_index(k, A.shape)
    return float(dist[i, j]) * h, (int(i), int(j)), (int(idx[0][i, j]), int(idx[1][i, j]))


def _interior(d: Domain, p) -> bool:
    h = d.resolution
    x0, y0, x1, y1 = d.bbox
    m = 2 * h
    return bool(x0 + m <= p[0] <= x1 - m and y0 + m <= p[1] <= y1 - m)


def domain_distance(X: Domain, Y: Domain, mode: str = "sets") -> DistanceReport:
    """Hausdorff distance between X and Y as sets, complements or boundaries."""
    _check_pair(X, Y)
    if mode not in MODES:
        raise MetricsError(f"unknown mode {mode!r}")
    if mode == "boundaries":
        for d in (X, Y):
            if d.is_constant():
                raise MetricsError("empty side: domain has no boundary")
        val, (p, q) = hausdorff_witness(X.boundary_samples(), Y.boundary_samples(), method="kdtree")
        return DistanceReport(mode, float(val), (p.copy(), q.copy()), False, _interior(X, p) and _interior(X, q))
    if X.cell_count > DENSE_CELLS:
        raise GridTooLarge(f"{X.cell_count} cells; dense distance transform refused")
    A = X.occupancy()
    B = Y.occupancy()
    if mode == "complements":
        A, B = ~A, ~B
    if not A.any() or not B.any():
        raise MetricsError("empty side")
    h = X.resolution
    d1, a1, b1 = _directed_cells(A, B, h)
    d2, a2, b2 = _directed_cells(B, A, h)
    if d1 >= d2:
        val, (ci, cj) = d1, (a1, b1)
    else:
        val, (cj, ci) = d2, (a2, b2)
    p = np.array([X.col_x(ci[1]), X.row_y(ci[0])], dtype=float)
    q = np.array([X.col_x(cj[1]), X.row_y(cj[0])], dtype=float)
    return DistanceReport(mode, val, (p, q), mode == "complements", _interior(X, p) and _interior(X, q))


def symmetric_difference_measure(X: Domain, Y: Domain) -> float:
    """|X Δ Y| as (number of differing cells) * resolution^2."""
    _check_pair(X, Y)
    return X.grid.xor_count(Y.grid) * X.resolution**2


# ---------------------------------------------------------------------------
# radii


@dataclass
class RadiiReport:
    rad: float
    big_rad: float
    diam: float
    centers: dict
    tolerance: float
    clipped: bool = False

    @property
    def ordered(self) -> bool:
        t = self.tolerance
        return self.rad <= self.big_rad + t and self.big_rad <= self.diam + t

    def to_dict(self):
        return jsonable({**self.__dict__, "ordered": self.ordered})


def _inside_hull_points(d: Domain):
    """Convex hull vertices (counter-clockwise) of the inside cell centers."""
    rows, s, e = d.grid.row_extremes()
    px = np.concatenate([d.col_x(s), d.col_x(e - 1)])
    py = np.concatenate([d.row_y(rows), d.row_y(rows)])
    # Akl-Toussaint: drop points strictly inside the octagon of extremes
    if len(px) > 64:
        keys = (px, py, px + py, px - py)
        ext = []
        for k in keys:
            ext += [int(np.argmin(k)), int(np.argmax(k))]
        E = np.column_stack([px[ext], py[ext]])
        c = E.mean(axis=0)
        order = np.argsort(np.arctan2(E[:, 1] - c[1], E[:, 0] - c[0]))
        E = E[order]
        E = E[np.concatenate([[True], np.any(np.diff(E, axis=0) != 0, axis=1)])]
        if len(E) >= 3:
            strictly = np.ones(len(px), dtype=bool)
            for a, b in zip(E, np.roll(E, -1, axis=0)):
                strictly &= (b[0] - a[0]) * (py - a[1]) - (b[1] - a[1]) * (px - a[0]) > 0
            px, py = px[~strictly], py[~strictly]
    P = np.unique(np.column_stack([px, py]), axis=0)  # lexicographic by (x, y)
    idx = kernels.hull_sorted(P[:, 0].copy(), P[:, 1].copy())
    return P[idx]


def _diameter(H: NDArray) -> tuple[float, tuple]:
    """Rotating calipers over a counter-clockwise convex polygon."""
    n = len(H)
    if n == 1:
        return 0.0, (H[0], H[0])
    if n == 2:
        return float(np.linalg.norm(H[1] - H[0])), (H[0], H[1])

    def area2(a, b, c):
        return abs((H[b][0] - H[a][0]) * (H[c][1] - H[a][1]) - (H[b][1] - H[a][1]) * (H[c][0] - H[a][0]))

    best, pair = 0.0, (0, 0)
    j = 1
    for i in range(n):
        i2 = (i + 1) % n
        while area2(i, i2, (j + 1) % n) > area2(i, i2, j):
            j = (j + 1) % n
        for a in (i, i2):
            dd = float(np.hypot(*(H[a] - H[j])))
            if dd > best:
                best, pair = dd, (a, j)
    return best, (H[pair[0]], H[pair[1]])


def _circle2(a, b):
    c = (a + b) / 2
    return c, float(np.linalg.norm(a - c))


def _circle3(a, b, c):
    ax, ay = a
    bx, by = b
    cx, cy = c
    dd = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if abs(dd) < 1e-300:
        # collinear: the widest pair
        cands = [_circle2(a, b), _circle2(a, c), _circle2(b, c)]
        return max(cands, key=lambda t: t[1])
    ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay) + (cx * cx + cy * cy) * (ay - by)) / dd
    uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx) + (cx * cx + cy * cy) * (bx - ax)) / dd
    u = np.array([ux, uy])
    return u, float(max(np.linalg.norm(a - u), np.linalg.norm(b - u), np.linalg.norm(c - u)))


def min_enclosing_circle(P: NDArray) -> tuple[NDArray, float]:
    """Smallest circle containing the points (Welzl, iterative, fixed shuffle)."""
    P = np.asarray(P, dtype=float)
    P = P[np.random.default_rng(0).permutation(len(P))]
    tol = 1e-12

    def inside(c, r, p):
        return np.hypot(*(p - c)) <= r * (1 + tol) + tol

    c, r = P[0].copy(), 0.0
    for i in range(1, len(P)):
        if inside(c, r, P[i]):
            continue
        c, r = P[i].copy(), 0.0
        for j in range(i):
            if inside(c, r, P[j]):
                continue
            c, r = _circle2(P[i], P[j])
            for k in range(j):
                if not inside(c, r, P[k]):
                    c, r = _circle3(P[i], P[j], P[k])
    return c, r


def _farthest(C: NDArray, H: NDArray, budget: int = 50_000_000) -> NDArray:
    """max_v |c - v| for each row c of C."""
    out = np.empty(len(C))
    step = max(1, budget // max(1, len(H)))
    for s in range(0, len(C), step):
        c = C[s:s + step]
        d2 = (c[:, None, 0] - H[None, :, 0]) ** 2 + (c[:, None, 1] - H[None, :, 1]) ** 2
        out[s:s + step] = np.sqrt(d2.max(axis=1))
    return out


def _coarse_full_blocks(d: Domain, f: int):
    """Boolean (rows, cols) of f x f cell blocks that are entirely inside."""
    g = d.grid
    Hc = -(-g.height // f)
    Wc = -(-g.width // f)
    cov = np.zeros((Hc, Wc + 1), dtype=np.int64)
    rows_all = g.run_rows()
    for s0 in range(0, g.n_runs, 2_000_000):
        r = rows_all[s0:s0 + 2_000_000] // f
        s = g.starts[s0:s0 + 2_000_000]
        e = g.ends[s0:s0 + 2_000_000]
        bs = s // f
        be = (e - 1) // f
        one = bs == be
        np.add.at(cov, (r[one], bs[one]), (e - s)[one])
        r, s, e, bs, be = r[~one], s[~one], e[~one], bs[~one], be[~one]
        np.add.at(cov, (r, bs), (bs + 1) * f - s)
        np.add.at(cov, (r, be), e - be * f)
        # whole blocks strictly between: difference array along columns
        mid = np.zeros_like(cov)
        np.add.at(mid, (r, bs + 1), f)
        np.add.at(mid, (r, be), -f)
        cov += np.cumsum(mid, axis=1)
    cov = cov[:, :Wc]
    bh = np.minimum(f, g.height - np.arange(Hc) * f)
    bw = np.minimum(f, g.width - np.arange(Wc) * f)
    return cov == bh[:, None] * bw[None, :]


def _inner_radius(d: Domain, clip_ok: bool = True):
    """(rad, center, tolerance)."""
    h = d.resolution
    if d.grid.is_empty():
        raise MetricsError("empty domain")
    if d.cell_count <= DENSE_CELLS:
        dist = ndimage.distance_transform_edt(d.occupancy()) * h
        k = int(np.argmax(dist))
        i, j = np.unravel_index(k, dist.shape)
        c = np.array([d.col_x(j), d.row_y(i)], dtype=float)
        if d.grid.is_full():
            return math.inf, c, h * math.sqrt(2)
        return float(dist[i, j]) - h / 2, c, h * math.sqrt(2)
    f = int(math.ceil(max(d.width, d.height) / COARSE_BLOCKS))
    full = _coarse_full_blocks(d, f)
    if not full.any():
        raise GridTooLarge("domain too thin for the coarse inner-radius search")
    cd = ndimage.distance_transform_edt(full)
    order = np.argsort(cd.ravel(), kind="stable")[::-1][:3]
    best, bc = -1.0, None
    for k in order:
        bi, bj = np.unravel_index(int(k), cd.shape)
        i = min(bi * f + f // 2, d.height - 1)
        j = min(bj * f + f // 2, d.width - 1)
        c = np.array([d.col_x(j), d.row_y(i)], dtype=float)
        v = d.outside_cell_distance(c)
        if v > best:
            best, bc = v, c
    return best - h / 2, bc, f * h * math.sqrt(2)


def radii(d: Domain) -> RadiiReport:
    """Inner radius, outer radius (center in the closure) and diameter."""
    if d.grid.is_empty():
        raise MetricsError("empty domain")
    if d.touches_bbox():
        raise MetricsError("unbounded at this clip")
    h = d.resolution
    rad, c_in, tol = _inner_radius(d)
    H = _inside_hull_points(d)
    diam, pair = _diameter(H)
    diam += h
    m, rho = min_enclosing_circle(H)
    # Rad minimises the convex function x -> max_v |x - v| over the closure;
    # near the enclosing-circle center if it is inside, else on the boundary
    cands = []
    i, j = d.cell_of(m)
    di, dj = np.meshgrid(np.arange(-2, 3), np.arange(-2, 3), indexing="ij")
    ci, cj = (i[0] + di).ravel(), (j[0] + dj).ravel()
    ok = d.grid.contains(ci, cj)
    if ok.any():
        cands.append(np.column_stack([d.col_x(cj[ok]), d.row_y(ci[ok])]))
    if not d.inside(m)[0]:
        B, _ = d.boundary_subsample(200_000)
        cands.append(B)
    C = np.vstack(cands)
    f = _farthest(C, H)
    k = int(np.argmin(f))
    big_rad = float(f[k]) + h / 2
    return RadiiReport(
        rad=float(rad),
        big_rad=big_rad,
        diam=float(diam),
        centers={"inner": c_in, "outer": C[k], "enclosing_circle": m, "diameter_pair": [pair[0], pair[1]]},
        tolerance=max(tol, h * math.sqrt(2)),
    )


# ---------------------------------------------------------------------------
# inequality checks


def check_inner_radius_bound(d: Domain, r0: float) -> CheckResult:
    """rad >= r0/4 - res*sqrt(2). Clipped domains are measured on the clip."""
    rad, c, tol = _inner_radius(d)
    margin = d.resolution * math.sqrt(2)
    rhs = r0 / 4
    ok = rad >= rhs - margin
    return CheckResult("inner_radius", "pass" if ok else "fail", rad, rhs, margin, center=c, clipped=d.touches_bbox(), tolerance=tol)


def _certified(d: Domain, eps: float, r0: float, **kw) -> tuple[bool, str]:
    from .flatness import FlatnessError, certify

    try:
        res = certify(d, eps, r0, **kw)
    except (FlatnessError, DomainError) as exc:
        return False, str(exc)
    if res.certified:
        return True, ""
    return False, f"{d.label or 'domain'} not certified ({res.reason})"


def _precondition(X, Y, eps, r0, certified, kw):
    if certified is not None:
        return (True, "") if certified else (False, "not certified")
    for d in (X, Y):
        ok, why = _certified(d, eps, r0, **kw)
        if not ok:
            return False, why
    return True, ""


def check_boundary_vs_sets(
    X: Domain, Y: Domain, eps: float, r0: float, *, certified: bool | None = None, **certify_kw
) -> CheckResult:
    """d_H(bX, bY) <= 4/(1 - 2 eps) min(d_H(X, Y), d_H(X^c, Y^c)).

    With ``certified=None`` both domains are certified at (eps, r0) first;
    pass True/False to skip that step. The hypothesis d_H(bX, bY) <= 2 r0
    is checked before the bound.
    """
    _check_pair(X, Y)
    name = "boundary_vs_sets"
    ok, why = _precondition(X, Y, eps, r0, certified, certify_kw)
    if not ok:
        return CheckResult(name, "inapplicable", reason=why)
    if X == Y:
        return CheckResult(name, "pass", 0.0, 0.0, 0.0, sets=0.0, complements=0.0)
    dB = domain_distance(X, Y, "boundaries").value
    if dB > 2 * r0:
        return CheckResult(name, "inapplicable", dB, 2 * r0, reason="hypothesis not met")
    ds = domain_distance(X, Y, "sets").value
    dc = domain_distance(X, Y, "complements").value
    C = 4 / (1 - 2 * eps)
    rhs = C * min(ds, dc)
    margin = X.resolution * math.sqrt(2) * (1 + C)
    status = "pass" if dB <= rhs + margin else "fail"
    ratio = dB / min(ds, dc) if min(ds, dc) > 0 else math.inf
    return CheckResult(name, status, dB, rhs, margin, sets=ds, complements=dc, achieved_ratio=ratio)


def check_measure_bounds(
    X: Domain, Y: Domain, eps: float, r0: float, *, certified: bool | None = None, **certify_kw
) -> CheckResult:
    """d_H(X, Y) and d_H(X^c, Y^c) <= 8/(1 - 2 eps) (|X Δ Y| / omega_2)^(1/2).

    Each branch is asserted only when its distance is at most 4 r0.
    """
    _check_pair(X, Y)
    name = "measure_bounds"
    ok, why = _precondition(X, Y, eps, r0, certified, certify_kw)
    if not ok:
        return CheckResult(name, "inapplicable", reason=why)
    omega, _ = unit_ball_volume(2)
    m = symmetric_difference_measure(X, Y)
    rhs = 8 / (1 - 2 * eps) * math.sqrt(m / omega)
    margin = 2 * X.resolution * math.sqrt(2)
    if m == 0:
        return CheckResult(name, "pass", 0.0, 0.0, margin, symdiff=0.0, branches={})
    branches = {}
    for mode in ("sets", "complements"):
        v = domain_distance(X, Y, mode).value
        if v > 4 * r0:
            branches[mode] = {"status": "inapplicable", "lhs": v}
        else:
            branches[mode] = {"status": "pass" if v <= rhs + margin else "fail", "lhs": v}
    sts = [b["status"] for b in branches.values()]
    if "fail" in sts:
        status = "fail"
    elif "pass" in sts:
        status = "pass"
    else:
        status = "inapplicable"
    lhs = max(b["lhs"] for b in branches.values())
    return CheckResult(name, status, lhs, rhs, margin, symdiff=m, branches=branches)


def unit_ball_volume(N: int) -> tuple[float, bool]:
    """omega_N and whether omega_N >= omega_{N-1} / 2^(N-1)."""
    if not 1 <= N <= 20:
        raise MetricsError("N must lie in 1..20")
    w = [1.0, 2.0]
    for n in range(2, N + 1):
        w.append(w[n - 2] * 2 * math.pi / n)
    return w[N], w[N] >= w[N - 1] / 2 ** (N - 1)


__all__ = [
    "MetricsError",
    "DistanceReport",
    "RadiiReport",
    "domain_distance",
    "symmetric_difference_measure",
    "radii",
    "min_enclosing_circle",
    "check_inner_radius_bound",
    "check_boundary_vs_sets",
    "check_measure_bounds",
    "unit_ball_volume",
]
