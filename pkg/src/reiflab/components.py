"""Connected components of a raster domain and the bounds on their number
and mutual distance for flat domains.

Components use 4-connectivity of inside cells, so two cells touching only at
a corner belong to different components.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from ._util import CheckResult, jsonable
from .domains import Domain, DomainError
from .metrics import unit_ball_volume


@dataclass
class ComponentReport:
    n: int
    components: list  # Domain per component, largest first
    areas: list
    min_pairwise_separation: float
    closest_pair: tuple | None  # witness points (p in U_i, q in U_j)
    bound_value: float | None  # 20^N / omega_N * |Omega| / r0^N when r0 is known
    clipped: bool

    def to_dict(self):
        return jsonable(
            {
                "n": self.n,
                "areas": self.areas,
                "labels": [c.label for c in self.components],
                "min_pairwise_separation": self.min_pairwise_separation,
                "closest_pair": None if self.closest_pair is None else [list(p) for p in self.closest_pair],
                "bound_value": self.bound_value,
                "clipped": self.clipped,
            }
        )


def count_bound(area: float, r0: float, N: int = 2) -> float:
    omega, _ = unit_ball_volume(N)
    return 20.0**N / omega * area / r0**N


def _cell_bbox(d: Domain, comp: Domain):
    g = comp.grid
    rows, s, e = g.row_extremes()
    h = d.resolution
    return (d.x0 + s.min() * h, d.y0 + rows.min() * h, d.x0 + e.max() * h, d.y0 + (rows.max() + 1) * h)


def _box_gap(a, b) -> float:
    dx = max(0.0, max(a[0], b[0]) - min(a[2], b[2]))
    dy = max(0.0, max(a[1], b[1]) - min(a[3], b[3]))
    return math.hypot(dx, dy)


def _pair_distance(A: Domain, B: Domain, ba, bb, upper: float):
    """Min distance between boundary samples of A and B, or None if >= upper."""
    h = A.resolution
    D = max(_box_gap(ba, bb), 4 * h)
    while True:
        PA = A.boundary_in_box(bb[0] - D, bb[1] - D, bb[2] + D, bb[3] + D)
        PB = B.boundary_in_box(ba[0] - D, ba[1] - D, ba[2] + D, ba[3] + D)
        if len(PA) and len(PB):
            dist, idx = cKDTree(PB).query(PA, k=1)
            k = int(np.argmin(dist))
            if dist[k] <= D:
                return float(dist[k]), (PA[k].copy(), PB[idx[k]].copy())
        if D >= upper:
            return None
        D *= 2


def components(d: Domain, r0: float | None = None) -> ComponentReport:
    """4-connected components, sorted by area (descending), ties by first cell."""
    g = d.grid
    if g.is_empty():
        raise DomainError("empty occupancy")
    labels, n = kernels.label_runs(g.row_ptr, g.starts, g.ends)
    labels = np.asarray(labels, dtype=np.int64)
    cells = np.bincount(labels, weights=g.ends - g.starts, minlength=n).astype(np.int64)
    # labels follow first appearance in row-major order, i.e. the min cell
    order = sorted(range(n), key=lambda k: (-cells[k], k))
    comps = []
    for rank, k in enumerate(order):
        comps.append(d.with_grid(g.select_runs(labels == k), label=f"{d.label}#{rank}"))
    areas = [float(cells[k]) * d.resolution**2 for k in order]
    sep, pair = math.inf, None
    if n >= 2:
        boxes = [_cell_bbox(d, c) for c in comps]
        x0, y0, x1, y1 = d.bbox
        span = math.hypot(x1 - x0, y1 - y0)
        pairs = sorted(((_box_gap(boxes[i], boxes[j]), i, j) for i in range(n) for j in range(i + 1, n)))
        for gap, i, j in pairs:
            if gap >= sep:
                break
            res = _pair_distance(comps[i], comps[j], boxes[i], boxes[j], min(sep, span))
            if res is not None and res[0] < sep:
                sep, pair = res
    return ComponentReport(
        n=n,
        components=comps,
        areas=areas,
        min_pairwise_separation=sep,
        closest_pair=pair,
        bound_value=None if r0 is None else count_bound(d.area(), r0),
        clipped=d.touches_bbox(),
    )


def check_count_bound(d: Domain, r0: float, report: ComponentReport | None = None) -> CheckResult:
    """n <= (20^N / omega_N) |Omega| / r0^N; not asserted for clipped domains."""
    rep = report if report is not None else components(d, r0)
    bound = count_bound(d.area(), r0)
    if rep.clipped:
        return CheckResult("count", "clipped", rep.n, bound, reason="clipped, bound not asserted")
    return CheckResult("count", "pass" if rep.n <= bound else "fail", rep.n, bound)


def check_separation_bound(d: Domain, r0: float, report: ComponentReport | None = None) -> CheckResult:
    """Distinct components are more than r0/70 apart (less res*sqrt(2))."""
    rep = report if report is not None else components(d, r0)
    if rep.n < 2:
        return CheckResult("separation", "vacuous", None, r0 / 70, n=rep.n)
    margin = d.resolution * math.sqrt(2)
    ok = rep.min_pairwise_separation > r0 / 70 - margin
    return CheckResult(
        "separation", "pass" if ok else "fail", rep.min_pairwise_separation, r0 / 70, margin, witness=rep.closest_pair, n=rep.n
    )


__all__ = ["ComponentReport", "components", "count_bound", "check_count_bound", "check_separation_bound"]
