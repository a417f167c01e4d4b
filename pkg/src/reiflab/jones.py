"""Curves joining interior points of a flat domain.

Y(x0, rho) = x0 + rho * nu is the point at distance rho from the boundary
point x0 along the inward normal of the best line at scale rho. Chains of
such points at dyadic scales connect an interior point to the scale r, and
two chains plus a bridge connect two nearby interior points. The
verification side measures the length ratio and the cigar quotient

    d(z, Omega^c) * d(x, y) / (d(z, x) * d(z, y))

along a dense sample of the curve.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from ._util import jsonable
from .domains import Domain
from .flatness import MIN_CELLS, FlatnessError, oriented_sample
from .geometry import as_point

CHAIN_CIGAR = 29 / 240
JONES_DELTA = 1 / 450


class JonesError(ValueError):
    pass


@dataclass
class Polyline:
    vertices: NDArray[np.float64]
    cumlen: NDArray[np.float64] = field(init=False, repr=False)

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if len(v) == 0:
            raise JonesError("a polyline needs at least one vertex")
        self.vertices = v
        seg = np.linalg.norm(np.diff(v, axis=0), axis=1) if len(v) > 1 else np.zeros(0)
        self.cumlen = np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def length(self) -> float:
        return float(self.cumlen[-1])

    @property
    def start(self):
        return self.vertices[0]

    @property
    def end(self):
        return self.vertices[-1]

    def reversed(self) -> "Polyline":
        return Polyline(self.vertices[::-1].copy())

    def concat(self, other: "Polyline") -> "Polyline":
        return Polyline(np.vstack([self.vertices, other.vertices]))

    def sample(self, step: float) -> NDArray[np.float64]:
        """Points along the curve with spacing at most ``step`` on every edge.

        Vertices are included; each edge is split evenly, so the midpoint of
        an edge is hit whenever its piece count is even.
        """
        v = self.vertices
        if len(v) == 1 or step <= 0:
            return v.copy()
        parts = [v[:1]]
        for a, b in zip(v[:-1], v[1:]):
            L = float(np.linalg.norm(b - a))
            if L == 0:
                continue
            n = max(2, int(math.ceil(L / step)))
            n += n % 2
            t = np.arange(1, n + 1) / n
            parts.append(a + t[:, None] * (b - a))
        return np.vstack(parts)

    def to_dict(self):
        return {"vertices": self.vertices, "length": self.length}


def _ycache(d: Domain) -> dict:
    c = getattr(d, "_ycache", None)
    if c is None:
        c = {}
        d._ycache = c
    return c


def y_point(d: Domain, x0, rho: float) -> NDArray[np.float64]:
    """x0 + rho * (inward normal of the best line at (x0, rho))."""
    x0 = as_point(x0)
    key = (float(x0[0]), float(x0[1]), float(rho))
    cache = _ycache(d)
    if key not in cache:
        try:
            s = oriented_sample(d, x0, rho, None)
        except FlatnessError as exc:
            if "orient" in str(exc) or "degenerate" in str(exc):
                raise JonesError(f"cannot orient normal at x0={x0.tolist()}, rho={rho:g}") from None
            raise
        cache[key] = x0 + rho * s.inward_normal
    return cache[key].copy()


@dataclass
class ChainInfo:
    case: str  # "I" or "II"
    k0: int
    x0: NDArray[np.float64]
    dist: float
    scales: list


def chain_scales(dist: float, r: float):
    """("I", [r]) or ("II", [2^-k0 r, ..., r]) for a point at distance dist."""
    if r <= 2 * dist:
        return "I", 0, [r]
    k0 = int(math.floor(math.log2(r / dist)))
    while r * 2.0**-k0 < dist:
        k0 -= 1
    while r * 2.0 ** -(k0 + 1) >= dist:
        k0 += 1
    return "II", k0, [r * 2.0**-k for k in range(k0, -1, -1)]


def gamma_chain(d: Domain, x, r: float, r0: float | None = None, info: bool = False):
    """Polyline from x through Y(x0, 2^-k r), ..., Y(x0, r).

    x0 is the boundary sample nearest to x. Case I (r <= 2 d(x, Omega^c))
    is the single segment [x, Y(x0, r)]; case II starts at the largest
    k0 with 2^-k0 r >= d(x, Omega^c) and doubles up to r.
    """
    x = as_point(x)
    if not d.inside(x)[0]:
        raise JonesError("x is not in the domain")
    x0, dist = d.nearest_boundary_point(x)
    if r < dist / 2 * (1 - 1e-12) or (r0 is not None and r > r0 / 7 * (1 + 1e-12)):
        raise JonesError(f"scale out of range: r={r:g}, d(x, boundary)={dist:g}")
    case, k0, scales = chain_scales(dist, r)
    if scales[0] < MIN_CELLS * d.resolution * (1 - 1e-12):
        raise JonesError(f"scale out of range: chain needs scale {scales[0]:g} below {MIN_CELLS} cells")
    verts = [x] + [y_point(d, x0, rho) for rho in scales]
    poly = Polyline(np.array(verts))
    if info:
        return poly, ChainInfo(case, k0, x0, dist, scales)
    return poly


def jones_curve(d: Domain, x, y, r0: float | None = None, info: bool = False):
    """Curve from x to y: the segment when one end is deep, else two chains
    at scale r = d(x, y) joined by the bridge [Y(x0, r), Y(y0, r)]."""
    x = as_point(x)
    y = as_point(y)
    dxy = float(np.linalg.norm(x - y))
    if dxy == 0:
        raise JonesError("x and y coincide")
    if r0 is not None and dxy > r0 / 7 * (1 + 1e-12):
        raise JonesError("beyond Jones radius")
    if d.depth_at_least(x, 2 * dxy) or d.depth_at_least(y, 2 * dxy):
        poly = Polyline(np.array([x, y]))
        return (poly, {"case": 1}) if info else poly
    gx, ix = gamma_chain(d, x, dxy, None, info=True)
    gy, iy = gamma_chain(d, y, dxy, None, info=True)
    poly = gx.concat(gy.reversed())
    return (poly, {"case": 2, "x_chain": ix, "y_chain": iy}) if info else poly


@dataclass
class CigarReport:
    curve: Polyline
    x: NDArray[np.float64]
    y: NDArray[np.float64]
    delta: float
    length: float
    length_ratio: float
    worst_delta: float
    worst_z: NDArray[np.float64] | None
    n_samples: int
    exits_domain: bool
    margin: float  # grid margin 4 * resolution / d(x, y)
    depth_cap: float | None

    @property
    def passed(self) -> bool:
        return self.length_ratio <= 1 / self.delta and self.worst_delta >= self.delta

    @property
    def passed_with_margin(self) -> bool:
        return (
            not self.exits_domain
            and self.length_ratio <= 1 / self.delta + self.margin
            and self.worst_delta >= self.delta - self.margin
        )

    def to_dict(self):
        return jsonable(
            {
                "x": self.x,
                "y": self.y,
                "delta": self.delta,
                "length": self.length,
                "length_ratio": self.length_ratio,
                "worst_delta": self.worst_delta,
                "worst_z": self.worst_z,
                "n_samples": self.n_samples,
                "exits_domain": self.exits_domain,
                "margin": self.margin,
                "depth_cap": self.depth_cap,
                "passed": self.passed,
                "passed_with_margin": self.passed_with_margin,
                "curve": self.curve,
            }
        )


def cigar_quotients(Z, x, y, depth):
    """depth * d(x, y) / (d(z, x) d(z, y)); inf where z is an endpoint."""
    dxy = float(np.linalg.norm(np.asarray(x) - np.asarray(y)))
    dzx = np.linalg.norm(Z - x, axis=1)
    dzy = np.linalg.norm(Z - y, axis=1)
    den = dzx * dzy
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(den > 0, depth * dxy / np.where(den > 0, den, 1.0), np.inf)
    return q


def verify_curve(d: Domain, curve: Polyline, x, y, delta: float, depth_cap: float | None = None) -> CigarReport:
    """Length ratio and worst cigar quotient of ``curve`` between x and y.

    d(z, Omega^c) is 0 when z's cell is outside the domain and the distance
    to the boundary samples otherwise; with ``depth_cap`` it is capped,
    which cannot change a quotient below cap * 4 / d(x, y).
    """
    x = as_point(x)
    y = as_point(y)
    if delta <= 0:
        raise JonesError("delta must be positive")
    tol = 1e-12 * max(1.0, float(np.max(np.abs(curve.vertices))))
    if np.max(np.abs(curve.start - x)) > tol or np.max(np.abs(curve.end - y)) > tol:
        raise JonesError("curve endpoints do not match x and y")
    dxy = float(np.linalg.norm(x - y))
    if dxy == 0:
        raise JonesError("x and y coincide")
    L = curve.length
    step = min(d.resolution, L / 1000) if L > 0 else d.resolution
    Z = curve.sample(step)
    dzx = np.linalg.norm(Z - x, axis=1)
    dzy = np.linalg.norm(Z - y, axis=1)
    keep = (dzx > 0) & (dzy > 0)
    Z = Z[keep]
    margin = 4 * d.resolution / dxy
    if len(Z) == 0:
        return CigarReport(curve, x, y, delta, L, L / dxy, math.inf, None, 0, False, margin, depth_cap)
    depth = d.depth(Z, cap=depth_cap)
    inside = d.inside(Z)
    q = cigar_quotients(Z, x, y, depth)
    k = int(np.argmin(q))
    return CigarReport(
        curve, x, y, float(delta), L, L / dxy, float(q[k]), Z[k].copy(), len(Z), bool(not inside.all()), margin, depth_cap
    )


@dataclass
class ChainCheck:
    x: NDArray[np.float64]
    r: float
    case: str
    k0: int
    length: float
    length_bound: float  # 4 r
    min_cigar: float  # min over z of d(z, Omega^c) - (29/240) d(z, x)
    worst_z: NDArray[np.float64] | None
    margin: float  # grid slack: 4 res on the length, 2 res on the depth
    exits_domain: bool

    @property
    def passed(self) -> bool:
        return self.length <= self.length_bound and self.min_cigar >= 0

    @property
    def passed_with_margin(self) -> bool:
        return not self.exits_domain and self.length <= self.length_bound + 2 * self.margin and self.min_cigar >= -self.margin

    def to_dict(self):
        return jsonable({**self.__dict__, "passed": self.passed, "passed_with_margin": self.passed_with_margin})


def check_chain(d: Domain, x, r: float, r0: float | None = None) -> ChainCheck:
    """Build gamma_{x,r} and test length <= 4r and d(z, Omega^c) >= (29/240) d(z, x)."""
    x = as_point(x)
    poly, info = gamma_chain(d, x, r, r0, info=True)
    h = d.resolution
    Z = poly.sample(min(h, max(poly.length, h) / 1000))
    depth = d.depth(Z, cap=r)
    slack = depth - CHAIN_CIGAR * np.linalg.norm(Z - x, axis=1)
    k = int(np.argmin(slack))
    return ChainCheck(
        x, float(r), info.case, info.k0, poly.length, 4 * float(r), float(slack[k]), Z[k].copy(), 2 * h,
        bool(not d.inside(Z).all()),
    )


def sample_chain_instance(d: Domain, r0: float, rng, boundary, max_draws: int = 100_000):
    """(x, r) with MIN_CELLS res <= d(x, Omega^c) <= 2 r0 / 7 and d/2 <= r <= r0/7.

    x is drawn near a random boundary sample; r is log-uniform.
    """
    h = d.resolution
    top = r0 / 7
    for _ in range(max_draws):
        b = boundary[rng.integers(len(boundary))]
        x = b + _disk_point(rng, 2 * top)
        if not d.inside(x)[0] or not d.depth_at_least(x, MIN_CELLS * h):
            continue
        _, dist = d.nearest_boundary_point(x)
        if dist > 2 * top:
            continue
        lo = max(dist / 2, MIN_CELLS * h)
        if lo > top:
            continue
        r = float(math.exp(rng.uniform(math.log(lo), math.log(top))))
        return x, r
    raise JonesError("could not sample a chain instance")


@dataclass
class JonesEstimate:
    delta_star: float
    worst_pair: tuple | None
    values: list
    cases: list
    reports: list
    errors: list
    n_pairs: int
    seed: int
    mode: str

    @property
    def n_passed_with_margin(self) -> int:
        return sum(1 for r in self.reports if r is not None and r.passed_with_margin)

    @property
    def all_passed_with_margin(self) -> bool:
        return not self.errors and self.n_passed_with_margin == self.n_pairs

    @property
    def max_length_ratio(self) -> float:
        return max((r.length_ratio for r in self.reports if r is not None), default=math.inf)

    @property
    def min_worst_delta(self) -> float:
        return min((r.worst_delta for r in self.reports if r is not None), default=0.0)

    @property
    def max_margin(self) -> float:
        return max((r.margin for r in self.reports if r is not None), default=math.inf)

    def worst_report(self):
        k = int(np.argmin(self.values))
        return self.reports[k]

    def to_dict(self):
        return jsonable(
            {
                "delta_star": self.delta_star,
                "worst_pair": self.worst_pair,
                "n_pairs": self.n_pairs,
                "seed": self.seed,
                "mode": self.mode,
                "cases": {"1": self.cases.count(1), "2": self.cases.count(2)},
                "errors": self.errors,
                "n_passed_with_margin": self.n_passed_with_margin,
                "all_passed_with_margin": self.all_passed_with_margin,
                "max_length_ratio": self.max_length_ratio,
                "min_worst_delta": self.min_worst_delta,
                "max_margin": self.max_margin,
                "worst": self.worst_report(),
            }
        )


def _sampling_box(d: Domain, R0: float):
    x0, y0, x1, y1 = d.bbox
    if d.touches_bbox():
        m = 3 * R0
        if x1 - x0 <= 2 * m or y1 - y0 <= 2 * m:
            raise JonesError("domain box too small to sample away from the clip")
        return x0 + m, y0 + m, x1 - m, y1 - m
    return x0, y0, x1, y1


def sample_pair(d: Domain, R0: float, rng, mode: str = "uniform", min_depth: float | None = None, max_draws: int = 1_000_000, boundary=None):
    """Draw x, y in the domain with 0 < d(x, y) <= R0 and both at least
    ``min_depth`` (default 10 cells) from the boundary."""
    if min_depth is None:
        min_depth = MIN_CELLS * d.resolution
    bx0, by0, bx1, by1 = _sampling_box(d, R0)
    draws = 0

    def ok(p):
        return bx0 <= p[0] <= bx1 and by0 <= p[1] <= by1 and d.depth_at_least(p, min_depth)

    while draws < max_draws:
        draws += 1
        if mode == "uniform":
            x = rng.uniform([bx0, by0], [bx1, by1])
        elif mode == "boundary":
            b = boundary[rng.integers(len(boundary))]
            x = b + _disk_point(rng, R0)
        else:
            raise JonesError(f"unknown sampling mode {mode!r}")
        if not ok(x):
            continue
        for _ in range(100):
            draws += 1
            y = x + _disk_point(rng, R0)
            if 0 < np.linalg.norm(y - x) <= R0 and ok(y):
                return x, y
    raise JonesError("rejection sampling failed")


def _disk_point(rng, R):
    r = R * math.sqrt(rng.uniform())
    a = rng.uniform(0, 2 * math.pi)
    return np.array([r * math.cos(a), r * math.sin(a)])


def _pair_eval(d, R0, seed, i, mode, boundary):
    rng = np.random.default_rng([seed, i])
    x, y = sample_pair(d, R0, rng, mode, boundary=boundary)
    dxy = float(np.linalg.norm(x - y))
    try:
        curve, meta = jones_curve(d, x, y, 7 * R0, info=True)
    except (JonesError, FlatnessError) as exc:
        return x, y, 0.0, None, None, str(exc)
    rep = verify_curve(d, curve, x, y, JONES_DELTA, depth_cap=dxy)
    val = min(rep.worst_delta, dxy / curve.length if curve.length > 0 else math.inf)
    return x, y, val, meta["case"], rep, None


def _pair_chunk(args):
    d, R0, seed, idx, mode, boundary = args
    return [_pair_eval(d, R0, seed, i, mode, boundary) for i in idx]


def empirical_jones_constant(d: Domain, R0: float, n_pairs: int, seed: int = 0, *, mode: str = "uniform", jobs: int = 1) -> JonesEstimate:
    """Minimum over sampled pairs of min(worst cigar quotient, d(x,y)/length).

    Pair i uses the generator seeded with (seed, i), so the result does not
    depend on ``jobs``. ``mode="boundary"`` draws x near boundary samples,
    which exercises the chain construction far more often than uniform
    sampling does.
    """
    if n_pairs < 1:
        raise JonesError("n_pairs must be >= 1")
    boundary = d.boundary_subsample(4096)[0] if mode == "boundary" else None
    idx = np.arange(n_pairs)
    if jobs > 1:
        chunks = [c for c in np.array_split(idx, jobs * 4) if len(c)]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(_pair_chunk, [(d, R0, seed, c, mode, boundary) for c in chunks]))
        results = [r for p in parts for r in p]
    else:
        results = [_pair_eval(d, R0, seed, int(i), mode, boundary) for i in idx]
    vals = [r[2] for r in results]
    k = int(np.argmin(vals))
    errors = [(i, r[5]) for i, r in enumerate(results) if r[5] is not None]
    return JonesEstimate(
        delta_star=float(vals[k]),
        worst_pair=(results[k][0], results[k][1]),
        values=vals,
        cases=[r[3] for r in results],
        reports=[r[4] for r in results],
        errors=errors,
        n_pairs=n_pairs,
        seed=seed,
        mode=mode,
    )
