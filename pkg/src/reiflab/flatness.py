"""Reifenberg flatness of raster domains.

For a boundary point x and a scale r the best line through x minimizes

    eps(x, r) = d_H(dOmega ∩ B(x, r), P ∩ B(x, r)) / r

over lines P containing x. The deviation for a fixed line is computed
exactly (no sampling of P): the sample-to-line side is a max of offsets and
the line-to-sample side is the maximum of a lower envelope of parabolas.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import minimize
from scipy.spatial import ConvexHull, QhullError

from . import kernels
from ._util import jsonable
from .domains import Domain, _Grid
from .geometry import Hyperplane, angle_cosine, as_point, as_point_set, plane_ball_hausdorff

MIN_CELLS = 10  # smallest admissible scale, in cells
N_COARSE = 720
ANGLE_TOL = 1e-7
MAX_BRACKETS = 6
GOLDEN = (math.sqrt(5) - 1) / 2


class FlatnessError(ValueError):
    pass


@dataclass
class FlatnessSample:
    """Best line through x at scale r.

    ``orientation`` is +1 when the inside of the domain lies on the
    +normal side, -1 for the other side, 0 when not yet determined.
    """

    x: NDArray[np.float64]
    r: float
    plane: Hyperplane
    epsilon: float
    orientation: int = 0
    n_points: int = 0
    clipped: bool = False

    @property
    def theta(self) -> float:
        u = self.plane.direction()
        return float(math.atan2(u[1], u[0]) % math.pi)

    @property
    def inward_normal(self) -> NDArray[np.float64]:
        if self.orientation == 0:
            raise FlatnessError("cannot orient normal")
        return self.orientation * self.plane.normal

    def to_dict(self):
        return {
            "x": self.x,
            "r": self.r,
            "plane": {"base": self.plane.base, "normal": self.plane.normal},
            "epsilon": self.epsilon,
            "orientation": self.orientation,
            "n_points": self.n_points,
            "clipped": self.clipped,
        }


@dataclass
class SeparationResult:
    """Outcome of the two-sided occupancy test at one (x, r)."""

    ok: bool
    sample: FlatnessSample
    eps: float
    plus: str  # "inside" | "outside" | "mixed"
    minus: str
    reason: str = ""
    witness: list | None = None  # offending cell centers
    n_cells: tuple = (0, 0)

    def to_dict(self):
        return jsonable(
            {
                "ok": self.ok,
                "eps": self.eps,
                "plus": self.plus,
                "minus": self.minus,
                "reason": self.reason,
                "witness": self.witness,
                "n_cells": self.n_cells,
                "sample": self.sample,
            }
        )


# ---------------------------------------------------------------------------
# best line through x


def _line_box_range(x, thetas, box, r):
    """Parameter range [lo, hi] of {x + t u(theta)} inside box and |t| <= r."""
    c = np.cos(thetas)
    s = np.sin(thetas)
    lo = np.full(len(thetas), -float(r))
    hi = np.full(len(thetas), float(r))
    bx0, by0, bx1, by1 = box
    for comp, a, b, p in ((c, bx0, bx1, x[0]), (s, by0, by1, x[1])):
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (a - p) / comp
            t2 = (b - p) / comp
        nz = np.abs(comp) > 1e-15
        lo = np.where(nz, np.maximum(lo, np.minimum(t1, t2)), lo)
        hi = np.where(nz, np.minimum(hi, np.maximum(t1, t2)), hi)
    lo = np.minimum(lo, 0.0)
    hi = np.maximum(hi, 0.0)
    return lo, hi


def _support_points(rel):
    """Points whose convex hull equals that of rel (for offset lower bounds)."""
    if len(rel) <= 8:
        return rel
    try:
        return rel[ConvexHull(rel).vertices]
    except QhullError:
        idx = {int(np.argmin(rel[:, 0])), int(np.argmax(rel[:, 0])), int(np.argmin(rel[:, 1])), int(np.argmax(rel[:, 1]))}
        return rel[sorted(idx)]


class _LineObjective:
    """eps(theta) for a fixed boundary slice; caches evaluations."""

    def __init__(self, rel, x, r, box):
        self.rel = np.ascontiguousarray(rel)
        self.x = x
        self.r = float(r)
        self.box = box
        self.cache: dict[float, float] = {}

    def ranges(self, thetas):
        if self.box is None:
            return np.full(len(thetas), -self.r), np.full(len(thetas), self.r)
        return _line_box_range(self.x, thetas, self.box, self.r)

    def __call__(self, theta: float) -> float:
        v = self.cache.get(theta)
        if v is None:
            lo, hi = self.ranges(np.array([theta]))
            v = kernels.plane_deviation(self.rel, theta, float(lo[0]), float(hi[0])) / self.r
            self.cache[theta] = v
        return v

    def many(self, thetas):
        lo, hi = self.ranges(thetas)
        vals = kernels.deviation_sweep(self.rel, thetas, lo, hi) / self.r
        for t, v in zip(thetas, vals):
            self.cache[float(t)] = float(v)
        return vals


def _golden(f, a, b, tol):
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def minimize_line(rel, x, r, box=None, n_coarse=N_COARSE, tol=ANGLE_TOL):
    """Angle theta in [0, pi) minimizing the deviation of the line x + R u(theta).

    Returns (theta, eps). Coarse angles whose offset lower bound already
    exceeds the running best plus the Lipschitz slack are skipped.
    """
    obj = _LineObjective(rel, x, r, box)
    thetas = np.arange(n_coarse) * (math.pi / n_coarse)
    V = _support_points(obj.rel)
    c, s = np.cos(thetas), np.sin(thetas)
    lb = np.max(np.abs(np.outer(V[:, 1], c) - np.outer(V[:, 0], s)), axis=0) / r
    step = math.pi / n_coarse
    # the deviation is r-Lipschitz in theta (points move by at most r*dtheta)
    slack = step * (1.0 + 1e-9) + 1e-15
    vals = np.full(n_coarse, np.inf)
    best = np.inf
    for k in np.argsort(lb, kind="stable"):
        if lb[k] > best + slack:
            break
        vals[k] = obj(float(thetas[k]))
        best = min(best, vals[k])
    cand = []
    for k in np.flatnonzero(np.isfinite(vals)):
        v = vals[k]
        if v <= best + slack and v <= vals[(k - 1) % n_coarse] and v <= vals[(k + 1) % n_coarse]:
            cand.append((v, k))
    cand.sort()
    best_t, best_v = float(thetas[int(np.argmin(vals))]), float(np.min(vals))
    for v, k in cand[:MAX_BRACKETS]:
        if best_v == 0.0:
            break
        a = float(thetas[k]) - step
        b = float(thetas[k]) + step
        t, fv = _golden(lambda t: obj(t % math.pi), a, b, tol)
        if fv < best_v:
            best_t, best_v = t % math.pi, fv
    return best_t, best_v


def best_hyperplane(d: Domain, x, r: float, *, n_coarse: int = N_COARSE, tol: float = ANGLE_TOL) -> FlatnessSample:
    """Line through ``x`` minimizing the normalized two-sided Hausdorff
    deviation from the boundary samples in B(x, r)."""
    x = as_point(x)
    h = d.resolution
    if r < MIN_CELLS * h * (1 - 1e-12):
        raise FlatnessError(f"scale under-resolved: r={r:g} < {MIN_CELLS}*resolution")
    S = d.boundary_in_ball(x, r)
    if len(S) == 0:
        raise FlatnessError("empty slice")
    rel = S - x
    if np.min(np.hypot(rel[:, 0], rel[:, 1])) > h * math.sqrt(2) * (1 + 1e-9):
        raise FlatnessError("x is not within one cell diagonal of the boundary")
    box = d.cell_centers_box()
    clipped = bool(x[0] - r < box[0] or x[0] + r > box[2] or x[1] - r < box[1] or x[1] + r > box[3])
    theta, eps = minimize_line(rel, x, r, box if clipped else None, n_coarse, tol)
    return FlatnessSample(x, float(r), Hyperplane.from_angle(x, theta), float(eps), 0, len(S), clipped)


def line_deviation(d: Domain, x, r: float, theta: float) -> float:
    """eps for the given line through x (used to audit the optimizer)."""
    x = as_point(x)
    S = d.boundary_in_ball(x, r)
    if len(S) == 0:
        raise FlatnessError("empty slice")
    box = d.cell_centers_box()
    lo, hi = _line_box_range(x, np.array([theta]), box, r)
    return kernels.plane_deviation(S - x, theta, float(lo[0]), float(hi[0])) / r


def best_hyperplane_points(points, x, r: float) -> tuple[Hyperplane, float]:
    """Best hyperplane through x for an arbitrary point set in R^2 or R^3."""
    P = as_point_set(points)
    x = as_point(x)
    sel = P[np.linalg.norm(P - x, axis=1) <= r]
    if len(sel) == 0:
        raise FlatnessError("empty slice")
    if P.shape[1] == 2:
        theta, eps = minimize_line(sel - x, x, r)
        return Hyperplane.from_angle(x, theta), eps
    # N = 3: start from the least-variance direction of the slice
    rel = sel - x
    n0 = np.linalg.svd(rel - rel.mean(axis=0), full_matrices=False)[2][-1]

    def sph(a):
        return np.array([math.sin(a[0]) * math.cos(a[1]), math.sin(a[0]) * math.sin(a[1]), math.cos(a[0])])

    def f(a):
        return plane_ball_hausdorff(sel, Hyperplane(x, sph(a)), r) / r

    a0 = np.array([math.acos(np.clip(n0[2], -1, 1)), math.atan2(n0[1], n0[0])])
    res = minimize(f, a0, method="Nelder-Mead", options={"xatol": 1e-5, "fatol": 1e-7})
    best = min([(f(a0), a0), (float(res.fun), res.x)], key=lambda t: t[0])
    return Hyperplane(x, sph(best[1])), float(best[0])


# ---------------------------------------------------------------------------
# separation


def _side_cells(d: Domain, x, r, normal, slab):
    """Row-wise column ranges of the two caps of B(x, r - h) beyond the slab."""
    h = d.resolution
    g = _Grid(d.bbox, h)
    rad = r - h
    rows = g.rows_between(x[1] - rad, x[1] + rad)
    dy = d.row_y(rows) - x[1]
    w = np.sqrt(np.maximum(rad * rad - dy * dy, 0.0))
    ca, cb = x[0] - w, x[0] + w
    nx, ny = float(normal[0]), float(normal[1])
    out = {}
    for sign in (1, -1):
        # sign * ((cx - x0) nx + dy ny) > slab
        if abs(nx) < 1e-15:
            ok = sign * dy * ny > slab
            a = np.where(ok, ca, np.inf)
            b = np.where(ok, cb, -np.inf)
        else:
            thr = x[0] + (sign * slab - dy * ny) / nx
            if sign * nx > 0:
                a, b = np.maximum(ca, thr), cb
            else:
                a, b = ca, np.minimum(cb, thr)
        ja, jb = g.open_cols(a, b)
        jb = np.maximum(jb, ja)
        out[sign] = (rows, ja, jb)
    return out


def _classify(d: Domain, rows, ja, jb):
    total = jb - ja
    ins = d.grid.count_range(rows, ja, jb)
    T = int(total.sum())
    I = int(ins.sum())
    if T == 0:
        return "empty", None, T
    if I == T:
        return "inside", None, T
    if I == 0:
        return "outside", None, T
    # a row with both kinds of cells; report one minority cell
    majority_in = I * 2 >= T
    k = int(np.flatnonzero((ins > 0) & (ins < total))[0]) if np.any((ins > 0) & (ins < total)) else int(np.flatnonzero(ins != (total if majority_in else 0))[0])
    cols = np.arange(ja[k], jb[k])
    occ = d.grid.contains(np.full(len(cols), rows[k]), cols)
    j = int(cols[np.flatnonzero(occ != majority_in)[0]])
    return "mixed", [float(d.col_x(j)), float(d.row_y(rows[k]))], T


def separation_check(d: Domain, s: FlatnessSample, eps: float | None = None) -> SeparationResult:
    """Test condition ii) at (s.x, s.r) with the line of ``s``.

    The region B(x, r) ∩ {dist(., P) >= 2 eps r} is eroded by one cell
    (radius r - h, slab half-width 2 eps r + h) and every cell in it is
    checked. On success the returned sample carries the orientation.
    """
    eps = s.epsilon if eps is None else float(eps)
    h = d.resolution
    slab = 2 * eps * s.r + h
    sides = _side_cells(d, s.x, s.r, s.plane.normal, slab)
    plus, wp, tp = _classify(d, *sides[1])
    minus, wm, tm = _classify(d, *sides[-1])
    if plus == "empty" or minus == "empty":
        raise FlatnessError("degenerate slab")
    out = FlatnessSample(s.x, s.r, s.plane, s.epsilon, 0, s.n_points, s.clipped)
    if {plus, minus} == {"inside", "outside"}:
        out.orientation = 1 if plus == "inside" else -1
        return SeparationResult(True, out, eps, plus, minus, n_cells=(tp, tm))
    if "mixed" in (plus, minus):
        reason = "mixed occupancy"
        witness = [w for w in (wp, wm) if w is not None]
    else:
        reason = f"both sides {plus}"
        witness = None
    return SeparationResult(False, out, eps, plus, minus, reason, witness, (tp, tm))


def oriented_sample(d: Domain, x, r: float, eps: float | None = None) -> FlatnessSample:
    """best_hyperplane followed by separation_check; raises if it cannot orient."""
    s = best_hyperplane(d, x, r)
    res = separation_check(d, s, eps)
    if not res.ok:
        raise FlatnessError(f"cannot orient normal: {res.reason}")
    return res.sample


# ---------------------------------------------------------------------------
# profiles and certificates


def scale_grid(r0: float, n_scales: int, resolution: float) -> list[float]:
    if n_scales < 1:
        raise FlatnessError("n_scales must be >= 1")
    floor = MIN_CELLS * resolution
    if r0 < floor * (1 - 1e-12):
        raise FlatnessError(f"r0 under-resolved: r0={r0:g} < {MIN_CELLS}*resolution")
    out: list[float] = []
    for k in range(n_scales):
        r = max(r0 * 2.0**-k, floor)
        if not out or r < out[-1]:
            out.append(r)
    return out


@dataclass
class FlatnessReport:
    r0: float
    scale_grid: list
    samples: list  # FlatnessSample per (point, scale)
    separation: list  # bool per sample (None when the slab was degenerate)
    sup_epsilon: float
    separation_ok: bool
    worst: tuple  # (x, r) attaining sup_epsilon
    n_boundary: int
    subsampled: bool
    clipped: bool
    resolution: float
    first_separation_failure: dict | None = None

    @property
    def margin(self) -> float:
        return 2 * self.resolution / min(self.scale_grid)

    def to_dict(self, with_samples: bool = False):
        out = {
            "r0": self.r0,
            "scale_grid": self.scale_grid,
            "sup_epsilon": self.sup_epsilon,
            "margin": self.margin,
            "separation_ok": self.separation_ok,
            "worst": {"x": self.worst[0], "r": self.worst[1]},
            "n_points": len(self.samples) // max(len(self.scale_grid), 1),
            "n_boundary": self.n_boundary,
            "subsampled": self.subsampled,
            "clipped": self.clipped,
            "resolution": self.resolution,
            "first_separation_failure": self.first_separation_failure,
        }
        if with_samples:
            out["samples"] = self.samples
            out["separation"] = self.separation
        return jsonable(out)


def _eval_point(d: Domain, x, scales):
    out = []
    for r in scales:
        s = best_hyperplane(d, x, r)
        try:
            sep = separation_check(d, s, s.epsilon + 2 * d.resolution / r)
            out.append((sep.sample if sep.ok else s, sep.ok, None if sep.ok else sep.to_dict()))
        except FlatnessError:
            out.append((s, None, None))
    return out


def _eval_chunk(args):
    d, pts, scales = args
    return [_eval_point(d, x, scales) for x in pts]


def profile_points(d: Domain, max_points: int):
    if d.is_constant():
        raise FlatnessError("no boundary")
    pts, n = d.boundary_subsample(max_points)
    return pts, n, n > len(pts)


def flatness_profile(d: Domain, r0: float, n_scales: int = 2, *, max_points: int = 1000, jobs: int = 1) -> FlatnessReport:
    """Evaluate best lines and separation over boundary points and scales.

    Scales are r0 * 2^-k (k < n_scales), never below 10 cells. All boundary
    samples are used if there are at most ``max_points``; otherwise an evenly
    spaced subsample in canonical order (flagged as ``subsampled``).
    """
    scales = scale_grid(r0, n_scales, d.resolution)
    pts, n_boundary, sub = profile_points(d, max(max_points, 1))
    if jobs > 1 and len(pts) > 1:
        chunks = np.array_split(np.arange(len(pts)), jobs * 4)
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(_eval_chunk, [(d, pts[c], scales) for c in chunks if len(c)]))
        results = [r for part in parts for r in part]
    else:
        results = [_eval_point(d, x, scales) for x in pts]
    samples, seps = [], []
    first_fail = None
    for per in results:
        for s, ok, info in per:
            samples.append(s)
            seps.append(ok)
            if ok is False and first_fail is None:
                first_fail = info
    eps_arr = np.array([s.epsilon for s in samples])
    k = int(np.argmax(eps_arr))
    return FlatnessReport(
        r0=float(r0),
        scale_grid=scales,
        samples=samples,
        separation=seps,
        sup_epsilon=float(eps_arr[k]),
        separation_ok=all(v is not False for v in seps),
        worst=(samples[k].x, samples[k].r),
        n_boundary=n_boundary,
        subsampled=sub,
        clipped=any(s.clipped for s in samples),
        resolution=d.resolution,
        first_separation_failure=first_fail,
    )


@dataclass
class Certificate:
    eps: float
    r0: float
    sup_epsilon: float
    margin: float
    scale_grid: list
    n_points: int
    subsampled: bool
    clipped: bool
    separation_r0: bool
    separation_all_scales: list  # (r, ok) per scale
    degenerate_slabs: int = 0
    certified: bool = field(default=True, init=False)

    def to_dict(self):
        return jsonable({"status": "certified", **{k: v for k, v in self.__dict__.items()}})


@dataclass
class Violation:
    eps: float
    r0: float
    reason: str  # "flatness" | "separation"
    sup_epsilon: float
    margin: float
    worst: dict
    witness: dict | None = None
    certified: bool = field(default=False, init=False)

    def to_dict(self):
        return jsonable({"status": "violation", **{k: v for k, v in self.__dict__.items()}})


def certify(d: Domain, eps: float, r0: float, n_scales: int = 2, *, max_points: int = 1000, jobs: int = 1, report: FlatnessReport | None = None):
    """Certificate if the profile shows (eps, r0)-flatness, else a Violation.

    Condition i) needs sup_epsilon + 2 res / r_min <= eps over the scale
    grid; condition ii) is checked at r0 with the target eps using the best
    line at r0 of every profiled point.
    """
    if not 0 < eps < 0.5:
        raise FlatnessError("eps must lie in (0, 1/2)")
    if report is None:
        report = flatness_profile(d, r0, n_scales, max_points=max_points, jobs=jobs)
    margin = report.margin
    ns = len(report.scale_grid)
    worst_i = int(np.argmax([s.epsilon for s in report.samples]))
    worst = report.samples[worst_i].to_dict()
    if report.sup_epsilon + margin > eps:
        return Violation(eps, r0, "flatness", report.sup_epsilon, margin, jsonable(worst))
    degenerate = 0
    for idx in range(0, len(report.samples), ns):
        s = report.samples[idx]  # scale r0 comes first
        try:
            sep = separation_check(d, s, eps)
        except FlatnessError:
            degenerate += 1
            continue
        if not sep.ok:
            return Violation(eps, r0, "separation", report.sup_epsilon, margin, jsonable(s.to_dict()), sep.to_dict())
    per_scale = []
    for k, r in enumerate(report.scale_grid):
        flags = report.separation[k::ns]
        per_scale.append((r, all(f is not False for f in flags)))
    return Certificate(
        eps=float(eps),
        r0=float(r0),
        sup_epsilon=report.sup_epsilon,
        margin=margin,
        scale_grid=report.scale_grid,
        n_points=len(report.samples) // ns,
        subsampled=report.subsampled,
        clipped=report.clipped,
        separation_r0=True,
        separation_all_scales=per_scale,
        degenerate_slabs=degenerate,
    )


# ---------------------------------------------------------------------------
# inequality checks


@dataclass
class AngleCheck:
    x: NDArray[np.float64]
    r: float
    M: float
    eps: float
    cos: float
    bound: float
    margin: float
    passed: bool

    def to_dict(self):
        return jsonable(self.__dict__)


def normal_angle_check(d: Domain, x, r: float, M: float, eps: float) -> AngleCheck:
    """|<nu_r, nu_Mr>| >= 1 - (M + 1) eps, with eps widened by 2 res / r."""
    if M < 1:
        raise FlatnessError("M must be >= 1")
    s1 = best_hyperplane(d, x, r)
    s2 = best_hyperplane(d, x, M * r)
    c = abs(angle_cosine(s1.plane.normal, s2.plane.normal))
    bound = 1 - (M + 1) * eps
    margin = (M + 1) * 2 * d.resolution / r
    return AngleCheck(as_point(x), float(r), float(M), float(eps), c, bound, margin, bool(c >= bound - margin))


def admissible_step(eps: float) -> float:
    """Largest ratio M for which separation propagates one step down."""
    return (1 - eps) / (3 * eps)


@dataclass
class PropagationReport:
    eps: float
    r0: float
    M_bound: float
    scales: list
    passed: list  # per scale
    n_points: int
    failures: list  # (r, x, reason) examples

    @property
    def ok(self) -> bool:
        return all(self.passed)

    def to_dict(self):
        return jsonable({**self.__dict__, "ok": self.ok})


def separation_propagation_check(d: Domain, r0: float, eps: float, *, max_points: int = 200, n_scales: int | None = None) -> PropagationReport:
    """Separation with the target eps at every dyadic scale down to 10 cells."""
    if n_scales is None:
        n_scales = max(1, int(math.floor(math.log2(r0 / (MIN_CELLS * d.resolution)))) + 1)
    scales = scale_grid(r0, n_scales, d.resolution)
    pts, _, _ = profile_points(d, max_points)
    passed, failures = [], []
    for r in scales:
        ok_r = True
        for x in pts:
            s = best_hyperplane(d, x, r)
            try:
                res = separation_check(d, s, eps + 2 * d.resolution / r)
            except FlatnessError:
                continue
            if not res.ok:
                ok_r = False
                if len(failures) < 10:
                    failures.append((r, x.tolist(), res.reason))
                break
        passed.append(ok_r)
    return PropagationReport(float(eps), float(r0), admissible_step(eps), scales, passed, len(pts), failures)
