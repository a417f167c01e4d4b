"""Domain specifications, rasterization and boundary sampling.

A :class:`Domain` is an occupancy grid (cell centers inside Ω are set) plus
its bounding box and cell size. Boundary samples are the midpoints of grid
edges separating an inside cell from an outside cell; they are produced on
demand, by row windows, so very fine grids never need a dense bitmap.

Grid conventions: cell (i, j) has center
``(x0 + (j + 0.5) h, y0 + (i + 0.5) h)``; row 0 is at the bottom.
"""
from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial import cKDTree

from .geometry import GeometryError, as_point, nearest_in_set
from .raster import GridTooLarge, RunGrid, _expand_ranges, xor_row_pairs

BBOX_MARGIN = 0.05
ROW_BLOCK = 200_000
JSON_BOUNDARY_LIMIT = 2_000_000


class DomainError(ValueError):
    pass


# ---------------------------------------------------------------------------
# specifications

KINDS = (
    "halfspace",
    "ball",
    "rectangle",
    "annulus",
    "lipschitz_graph",
    "koch_flat",
    "disk_with_tentacle",
    "disk_with_slit",
    "union",
)


@dataclass
class DomainSpec:
    """Analytic description of a planar domain.

    Use the classmethod constructors; ``params`` holds their arguments.
    """

    kind: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown domain kind {self.kind!r}")
        self._validate()

    # constructors ------------------------------------------------------
    @classmethod
    def halfspace(cls, normal=(0.0, 1.0), offset=0.0):
        """{x : <normal, x> > offset}."""
        n = np.asarray(normal, dtype=float)
        n = n / np.linalg.norm(n)
        return cls("halfspace", {"normal": tuple(n.tolist()), "offset": float(offset)})

    @classmethod
    def ball(cls, R=1.0, center=(0.0, 0.0)):
        return cls("ball", {"R": float(R), "center": tuple(map(float, center))})

    @classmethod
    def rectangle(cls, a=1.0, b=1.0, center=(0.0, 0.0)):
        """Open axis-parallel rectangle of width a and height b."""
        return cls("rectangle", {"a": float(a), "b": float(b), "center": tuple(map(float, center))})

    @classmethod
    def annulus(cls, R=1.0, t=0.1, center=(0.0, 0.0)):
        """B(R + t) minus the open ball B(R)."""
        return cls("annulus", {"R": float(R), "t": float(t), "center": tuple(map(float, center))})

    @classmethod
    def lipschitz_graph(cls, L=0.1, seed=0, offset=0.0, modes=4):
        """{(x, y) : y > f(x)} with f a seeded sum of sines and Lip(f) <= L."""
        return cls("lipschitz_graph", {"L": float(L), "seed": int(seed), "offset": float(offset), "modes": int(modes)})

    @classmethod
    def koch_flat(cls, theta=5.0, depth=3, sides=None, R=1.0, center=(0.0, 0.0)):
        """Koch-type curve with bump angle ``theta`` (degrees) on a regular polygon."""
        if sides is None:
            sides = max(4, int(math.ceil(180.0 / float(theta) - 1e-9)))
        return cls(
            "koch_flat",
            {"theta": float(theta), "depth": int(depth), "sides": int(sides), "R": float(R), "center": tuple(map(float, center))},
        )

    @classmethod
    def disk_with_tentacle(cls, w=0.05, length=1.0, R=1.0, center=(0.0, 0.0)):
        return cls("disk_with_tentacle", {"w": float(w), "length": float(length), "R": float(R), "center": tuple(map(float, center))})

    @classmethod
    def disk_with_slit(cls, w=0.05, length=1.0, R=1.0, center=(0.0, 0.0)):
        return cls("disk_with_slit", {"w": float(w), "length": float(length), "R": float(R), "center": tuple(map(float, center))})

    @classmethod
    def union(cls, parts):
        return cls("union", {"parts": tuple(parts)})

    @classmethod
    def disks(cls, centers, R=1.0):
        return cls.union([cls.ball(R, c) for c in centers])

    # validation --------------------------------------------------------
    def _validate(self):
        p = self.params
        positive = {
            "ball": ["R"],
            "rectangle": ["a", "b"],
            "annulus": ["R", "t"],
            "lipschitz_graph": [],
            "koch_flat": ["R"],
            "disk_with_tentacle": ["w", "length", "R"],
            "disk_with_slit": ["w", "length", "R"],
        }.get(self.kind, [])
        for k in positive:
            if not p.get(k, 0) > 0:
                raise DomainError(f"{self.kind}: parameter {k} must be > 0")
        if self.kind == "lipschitz_graph" and p["L"] < 0:
            raise DomainError("lipschitz_graph: L must be >= 0")
        if self.kind == "koch_flat":
            if not 0 < p["theta"] < 45:
                raise DomainError("koch_flat: theta must lie in (0, 45) degrees")
            if p["depth"] < 0 or p["sides"] < 3:
                raise DomainError("koch_flat: bad depth or sides")
        if self.kind in ("disk_with_tentacle", "disk_with_slit") and not p["w"] < p["R"]:
            raise DomainError(f"{self.kind}: need w < R")
        if self.kind == "disk_with_slit" and not p["length"] <= 2 * p["R"] - p["w"]:
            raise DomainError("disk_with_slit: slit longer than the disk")
        if self.kind == "union" and not p["parts"]:
            raise DomainError("union of nothing")

    # descriptive -------------------------------------------------------
    @property
    def bounded(self) -> bool:
        return self.kind not in ("halfspace", "lipschitz_graph")

    def label(self) -> str:
        if self.kind == "union":
            return "union(" + ", ".join(s.label() for s in self.params["parts"]) + ")"
        args = ",".join(f"{k}={_fmt(v)}" for k, v in self.params.items())
        return f"{self.kind}({args})"

    def to_dict(self) -> dict:
        if self.kind == "union":
            return {"kind": "union", "parts": [s.to_dict() for s in self.params["parts"]]}
        return {"kind": self.kind, **{k: (list(v) if isinstance(v, tuple) else v) for k, v in self.params.items()}}

    @classmethod
    def from_dict(cls, data: dict) -> "DomainSpec":
        data = dict(data)
        kind = data.pop("kind")
        if kind == "union":
            return cls.union([cls.from_dict(d) for d in data["parts"]])
        ctor = getattr(cls, kind, None)
        if ctor is None:
            raise DomainError(f"unknown domain kind {kind!r}")
        return ctor(**data)

    def support_box(self):
        """(xmin, ymin, xmax, ymax) of the closure, or None if unbounded."""
        p = self.params
        k = self.kind
        if not self.bounded:
            return None
        if k == "union":
            boxes = np.array([s.support_box() for s in p["parts"]])
            return (boxes[:, 0].min(), boxes[:, 1].min(), boxes[:, 2].max(), boxes[:, 3].max())
        cx, cy = p["center"]
        if k == "ball":
            r = p["R"]
            return (cx - r, cy - r, cx + r, cy + r)
        if k == "annulus":
            r = p["R"] + p["t"]
            return (cx - r, cy - r, cx + r, cy + r)
        if k == "rectangle":
            return (cx - p["a"] / 2, cy - p["b"] / 2, cx + p["a"] / 2, cy + p["b"] / 2)
        if k == "koch_flat":
            v = koch_vertices(self)
            return (v[:, 0].min(), v[:, 1].min(), v[:, 0].max(), v[:, 1].max())
        if k == "disk_with_tentacle":
            R = p["R"]
            return (cx - R, cy - R, cx + R + p["length"] + p["w"] / 2, cy + R)
        if k == "disk_with_slit":
            R = p["R"]
            return (cx - R, cy - R, cx + R, cy + R)
        raise AssertionError(k)

    def default_bbox(self, extent: float = 2.0, pad: float = 0.1):
        """A box containing the support with a ``pad`` fraction of margin.

        Unbounded kinds get [-extent/2, extent/2]^2 around the origin.
        """
        box = self.support_box()
        if box is None:
            e = extent / 2
            return (-e, -e, e, e)
        x0, y0, x1, y1 = box
        mx = pad * (x1 - x0)
        my = pad * (y1 - y0)
        m = max(mx, my)
        return (x0 - m, y0 - m, x1 + m, y1 + m)

    def thinnest_feature(self) -> float:
        p = self.params
        k = self.kind
        if k in ("disk_with_tentacle", "disk_with_slit"):
            return p["w"]
        if k == "annulus":
            return p["t"]
        if k == "rectangle":
            return min(p["a"], p["b"])
        if k in ("ball", "koch_flat"):
            return p["R"]
        if k == "union":
            return min(s.thinnest_feature() for s in p["parts"])
        return math.inf

    def area(self) -> float:
        """Analytic area (inf for unbounded kinds)."""
        p = self.params
        k = self.kind
        if not self.bounded:
            return math.inf
        if k == "ball":
            return math.pi * p["R"] ** 2
        if k == "annulus":
            return math.pi * ((p["R"] + p["t"]) ** 2 - p["R"] ** 2)
        if k == "rectangle":
            return p["a"] * p["b"]
        if k == "koch_flat":
            v = koch_vertices(self)
            x, y = v[:, 0], v[:, 1]
            return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
        R, w, ell = p.get("R"), p.get("w"), p.get("length")
        if k == "disk_with_tentacle":
            # strip outside the disk from x = R to R + ell (minus the lens
            # the disk already covers) plus the outer half of the cap
            return math.pi * R**2 + _strip_outside_disk(R, w, ell) + math.pi * (w / 2) ** 2 / 2
        if k == "disk_with_slit":
            return math.pi * R**2 - _strip_inside_disk(R, w, ell) - math.pi * (w / 2) ** 2 / 2
        if k == "union":
            return float(sum(s.area() for s in p["parts"]))
        raise AssertionError(k)

    def perimeter(self) -> float:
        p = self.params
        k = self.kind
        if k == "ball":
            return 2 * math.pi * p["R"]
        if k == "annulus":
            return 2 * math.pi * (2 * p["R"] + p["t"])
        if k == "rectangle":
            return 2 * (p["a"] + p["b"])
        if k == "koch_flat":
            v = koch_vertices(self)
            return float(np.sum(np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)))
        if k in ("disk_with_tentacle", "disk_with_slit"):
            return 2 * math.pi * p["R"] + 2 * p["length"] + math.pi * p["w"] / 2
        if k == "union":
            return float(sum(s.perimeter() for s in p["parts"]))
        return math.inf

    # membership oracle -------------------------------------------------
    def contains(self, pts: ArrayLike) -> NDArray[np.bool_]:
        """Direct point membership test (vectorized, independent of grids)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        p = self.params
        k = self.kind
        if k == "halfspace":
            n = p["normal"]
            return n[0] * x + n[1] * y > p["offset"]
        if k == "lipschitz_graph":
            return y > lipschitz_profile(self)(x)
        if k == "union":
            out = np.zeros(len(pts), dtype=bool)
            for s in p["parts"]:
                out |= s.contains(pts)
            return out
        cx, cy = p["center"]
        dx, dy = x - cx, y - cy
        r2 = dx * dx + dy * dy
        if k == "ball":
            return r2 < p["R"] ** 2
        if k == "annulus":
            return (r2 < (p["R"] + p["t"]) ** 2) & (r2 >= p["R"] ** 2)
        if k == "rectangle":
            return (np.abs(dx) < p["a"] / 2) & (np.abs(dy) < p["b"] / 2)
        if k == "koch_flat":
            return _polygon_contains(koch_vertices(self), pts)
        R, w, ell = p.get("R"), p.get("w"), p.get("length")
        hw = w / 2 if w is not None else 0
        if k == "disk_with_tentacle":
            tip = R + ell
            strip = (dx > 0) & (dx < tip) & (np.abs(dy) < hw)
            cap = (dx - tip) ** 2 + dy**2 < hw**2
            return (r2 < R**2) | strip | cap
        if k == "disk_with_slit":
            root = R - ell
            strip = (dx > root) & (np.abs(dy) < hw)
            cap = (dx - root) ** 2 + dy**2 < hw**2
            return (r2 < R**2) & ~strip & ~cap
        raise AssertionError(k)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:g}"
    if isinstance(v, tuple):
        return "(" + ",".join(_fmt(u) for u in v) + ")"
    return str(v)


def _segment_area(R, c):
    # area of the part of the disk of radius R with x > c
    if c >= R:
        return 0.0
    if c <= -R:
        return math.pi * R * R
    return R * R * math.acos(c / R) - c * math.sqrt(R * R - c * c)


def _chord_band_area(R, hw, x_from):
    # area of {|y| < hw, x > x_from} inside the disk of radius R, by quadrature
    xs = np.linspace(x_from, R, 20001)
    h = np.minimum(hw, np.sqrt(np.maximum(R * R - xs * xs, 0.0)))
    return float(np.trapezoid(2 * h, xs))


def _strip_outside_disk(R, w, ell):
    hw = w / 2
    return 2 * hw * (R + ell) - _chord_band_area(R, hw, 0.0)


def _strip_inside_disk(R, w, ell):
    return _chord_band_area(R, w / 2, R - ell)


def lipschitz_profile(spec: DomainSpec):
    """Return f with Lip(f) <= L for a lipschitz_graph spec."""
    p = spec.params
    rng = np.random.default_rng(p["seed"])
    m = p["modes"]
    omega = rng.uniform(1.0, 4.0, m) * math.pi
    phase = rng.uniform(0.0, 2 * math.pi, m)
    weight = rng.uniform(0.5, 1.0, m)
    amp = weight * p["L"] / float(np.sum(weight * omega)) if p["L"] > 0 else np.zeros(m)
    off = p["offset"]

    def f(x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, off)
        for a, w_, ph in zip(amp, omega, phase):
            out = out + a * np.sin(w_ * x + ph)
        return out

    return f


def koch_vertices(spec: DomainSpec) -> NDArray[np.float64]:
    """Counter-clockwise vertex list of a koch_flat polygon."""
    p = spec.params
    n = p["sides"]
    cx, cy = p["center"]
    ang = 2 * math.pi * np.arange(n) / n
    v = np.column_stack([cx + p["R"] * np.cos(ang), cy + p["R"] * np.sin(ang)])
    th = math.radians(p["theta"])
    c, s = math.cos(th), math.sin(th)
    for _ in range(p["depth"]):
        a = v
        b = np.roll(v, -1, axis=0)
        d = b - a
        L = np.linalg.norm(d, axis=1, keepdims=True)
        u = d / L
        out_n = np.column_stack([u[:, 1], -u[:, 0]])  # right of travel = outside
        seg = L / (2 * (1 + c))
        p1 = a + seg * u
        peak = p1 + seg * (c * u + s * out_n)
        p3 = b - seg * u
        v = np.stack([a, p1, peak, p3], axis=1).reshape(-1, 2)
    return v


def _polygon_contains(v, pts):
    # even-odd ray casting, one edge at a time
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    b = np.roll(v, -1, axis=0)
    for (ax, ay), (bx, by) in zip(v, b):
        cond = (ay <= y) != (by <= y)
        if not np.any(cond):
            continue
        xc = ax + (y[cond] - ay) * (bx - ax) / (by - ay)
        inside[cond] ^= x[cond] < xc
    return inside


# ---------------------------------------------------------------------------
# rasterization


class _Grid:
    """Grid geometry helper shared by rasterizers."""

    def __init__(self, bbox, h):
        x0, y0, x1, y1 = map(float, bbox)
        self.h = float(h)
        self.x0, self.y0 = x0, y0
        self.W = int(math.ceil((x1 - x0) / h - 1e-9))
        self.H = int(math.ceil((y1 - y0) / h - 1e-9))
        if self.W <= 0 or self.H <= 0:
            raise DomainError("empty bounding box")

    @property
    def bbox(self):
        return (self.x0, self.y0, self.x0 + self.W * self.h, self.y0 + self.H * self.h)

    def row_y(self, i):
        return self.y0 + (np.asarray(i, dtype=float) + 0.5) * self.h

    def col_x(self, j):
        return self.x0 + (np.asarray(j, dtype=float) + 0.5) * self.h

    def open_cols(self, a, b):
        """Columns [ja, jb) whose centers lie strictly between a and b."""
        h, x0 = self.h, self.x0
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        with np.errstate(invalid="ignore", over="ignore"):
            ja = (np.floor(np.clip((a - x0) / h - 0.5, -2.0, self.W + 2.0)) + 1).astype(np.int64)
            jb = np.ceil(np.clip((b - x0) / h - 0.5, -2.0, self.W + 2.0)).astype(np.int64)
        # settle rounding ties against the actual center coordinates
        ja = np.where(self.col_x(ja - 1) > a, ja - 1, ja)
        ja = np.where(self.col_x(ja) <= a, ja + 1, ja)
        jb = np.where(self.col_x(jb) < b, jb + 1, jb)
        jb = np.where(self.col_x(jb - 1) >= b, jb - 1, jb)
        return np.clip(ja, 0, self.W), np.clip(jb, 0, self.W)

    def rows_between(self, ya, yb):
        """Row indices whose centers satisfy ya < y < yb."""
        h, y0 = self.h, self.y0
        ia = max(int(np.floor((ya - y0) / h - 0.5)), 0)
        ib = min(max(int(np.ceil((yb - y0) / h - 0.5)) + 1, 0), self.H)
        rows = np.arange(ia, max(ib, ia), dtype=np.int64)
        y = self.row_y(rows)
        return rows[(y > ya) & (y < yb)]


def _disk_grid(g: _Grid, cx, cy, R) -> RunGrid:
    rows = g.rows_between(cy - R, cy + R)
    dy = g.row_y(rows) - cy
    w = np.sqrt(np.maximum(R * R - dy * dy, 0.0))
    ja, jb = g.open_cols(cx - w, cx + w)
    return RunGrid.from_intervals(g.H, g.W, rows, ja, jb)


def _rect_grid(g: _Grid, xa, xb, ya, yb) -> RunGrid:
    rows = g.rows_between(ya, yb)
    ja, jb = g.open_cols(np.full(len(rows), xa), np.full(len(rows), xb))
    return RunGrid.from_intervals(g.H, g.W, rows, ja, jb)


def _halfspace_grid(g: _Grid, n, c) -> RunGrid:
    rows = np.arange(g.H, dtype=np.int64)
    y = g.row_y(rows)
    nx, ny = n
    if nx == 0:
        keep = ny * y > c
        return RunGrid.from_intervals(g.H, g.W, rows[keep], np.zeros(keep.sum(), np.int64), np.full(keep.sum(), g.W))
    xb = (c - ny * y) / nx
    if nx > 0:
        ja, jb = g.open_cols(xb, np.full(len(rows), np.inf))
    else:
        ja, jb = g.open_cols(np.full(len(rows), -np.inf), xb)
    return RunGrid.from_intervals(g.H, g.W, rows, ja, jb)


def _threshold_grid(g: _Grid, m) -> RunGrid:
    """Cells (i, j) with i >= m[j]; m is one threshold row per column."""
    m = np.clip(np.asarray(m, dtype=np.int64), 0, g.H)
    W, H = g.W, g.H
    # column j toggles the row state at position j for rows between the
    # thresholds of columns j-1 and j; the grid edges act as columns of
    # threshold H
    mm = np.concatenate([[H], m, [H]])
    lo = np.minimum(mm[:-1], mm[1:])
    hi = np.maximum(mm[:-1], mm[1:])
    rows, owner = _expand_ranges(lo, hi)
    pos = owner.astype(np.int64)
    order = np.lexsort((pos, rows))
    rows, pos = rows[order], pos[order]
    a, b = pos[0::2], pos[1::2]
    return RunGrid.from_intervals(H, W, rows[0::2], a, b)


def _polygon_grid(g: _Grid, v) -> RunGrid:
    a = v
    b = np.roll(v, -1, axis=0)
    ylo = np.minimum(a[:, 1], b[:, 1])
    yhi = np.maximum(a[:, 1], b[:, 1])
    # half-open rule: an edge crosses row i when ylo <= y_i < yhi; the
    # integer range is widened by one and then filtered on the actual y_i
    ia = np.clip(np.floor((ylo - g.y0) / g.h - 0.5).astype(np.int64), 0, g.H)
    ib = np.clip(np.ceil((yhi - g.y0) / g.h - 0.5).astype(np.int64) + 1, 0, g.H)
    rows, e = _expand_ranges(ia, ib)
    y = g.row_y(rows)
    keep = (ylo[e] <= y) & (y < yhi[e])
    rows, e, y = rows[keep], e[keep], y[keep]
    ax, ay, bx, by = a[e, 0], a[e, 1], b[e, 0], b[e, 1]
    xc = ax + (y - ay) * (bx - ax) / (by - ay)
    order = np.lexsort((xc, rows))
    rows, xc = rows[order], xc[order]
    ja, jb = g.open_cols(xc[0::2], xc[1::2])
    return RunGrid.from_intervals(g.H, g.W, rows[0::2], ja, jb)


def _spec_grid(spec: DomainSpec, g: _Grid) -> RunGrid:
    p = spec.params
    k = spec.kind
    if k == "halfspace":
        return _halfspace_grid(g, p["normal"], p["offset"])
    if k == "lipschitz_graph":
        f = lipschitz_profile(spec)
        xc = g.x0 + (np.arange(g.W) + 0.5) * g.h
        fy = f(xc)
        m = np.floor(np.clip((fy - g.y0) / g.h - 0.5, -2.0, g.H + 2.0)).astype(np.int64) + 1
        return _threshold_grid(g, m)
    if k == "union":
        out = None
        for s in p["parts"]:
            gr = _spec_grid(s, g)
            out = gr if out is None else out.union(gr)
        return out
    cx, cy = p["center"]
    if k == "ball":
        return _disk_grid(g, cx, cy, p["R"])
    if k == "annulus":
        outer = _disk_grid(g, cx, cy, p["R"] + p["t"])
        return outer.difference(_disk_grid(g, cx, cy, p["R"]))
    if k == "rectangle":
        return _rect_grid(g, cx - p["a"] / 2, cx + p["a"] / 2, cy - p["b"] / 2, cy + p["b"] / 2)
    if k == "koch_flat":
        return _polygon_grid(g, koch_vertices(spec))
    R, hw, ell = p["R"], p["w"] / 2, p["length"]
    disk = _disk_grid(g, cx, cy, R)
    if k == "disk_with_tentacle":
        tip = cx + R + ell
        strip = _rect_grid(g, cx, tip, cy - hw, cy + hw)
        cap = _disk_grid(g, tip, cy, hw)
        return disk.union(strip).union(cap)
    if k == "disk_with_slit":
        root = cx + R - ell
        strip = _rect_grid(g, root, cx + R + 1.0, cy - hw, cy + hw)
        cap = _disk_grid(g, root, cy, hw)
        return disk.difference(strip.union(cap))
    raise AssertionError(k)


def rasterize(spec: DomainSpec, resolution: float, bbox=None, label: str | None = None) -> "Domain":
    """Sample ``spec`` at cell centers of a grid of cell side ``resolution``.

    ``bbox`` is (x0, y0, x1, y1); x1/y1 are rounded up to whole cells. For
    bounded specs the box must leave a margin of at least 5% of its side.
    """
    h = float(resolution)
    if not h > 0:
        raise DomainError("resolution must be positive")
    if h > spec.thinnest_feature():
        raise DomainError("feature under-resolved")
    if bbox is None:
        bbox = spec.default_bbox()
    bbox = tuple(map(float, np.asarray(bbox, dtype=float).reshape(-1)))
    if len(bbox) != 4 or not (bbox[2] > bbox[0] and bbox[3] > bbox[1]):
        raise DomainError("bbox must be (x0, y0, x1, y1) with x1 > x0, y1 > y0")
    g = _Grid(bbox, h)
    sup = spec.support_box()
    if sup is not None:
        X0, Y0, X1, Y1 = g.bbox
        mx = BBOX_MARGIN * (X1 - X0)
        my = BBOX_MARGIN * (Y1 - Y0)
        if sup[0] - X0 < mx * (1 - 1e-9) or X1 - sup[2] < mx * (1 - 1e-9) or sup[1] - Y0 < my * (1 - 1e-9) or Y1 - sup[3] < my * (1 - 1e-9):
            raise DomainError("bbox does not contain the domain with a 5% margin")
    grid = _spec_grid(spec, g)
    return Domain(g.bbox, h, grid, label if label is not None else spec.label(), spec=spec)


# ---------------------------------------------------------------------------
# the Domain type


class Domain:
    """Raster domain: bbox, cell size, run-length occupancy and a label.

    Instances are treated as immutable; derived data is cached lazily.
    """

    def __init__(self, bbox, resolution: float, grid: RunGrid, label: str = "", spec: DomainSpec | None = None):
        x0, y0, x1, y1 = map(float, bbox)
        self.resolution = float(resolution)
        self.grid = grid
        W = round((x1 - x0) / self.resolution)
        H = round((y1 - y0) / self.resolution)
        if (W, H) != (grid.width, grid.height) or abs(W * self.resolution - (x1 - x0)) > 1e-9 * max(1.0, abs(x1 - x0)) or abs(H * self.resolution - (y1 - y0)) > 1e-9 * max(1.0, abs(y1 - y0)):
            raise DomainError("occupancy grid dimensions do not match bbox/resolution")
        self.bbox = (x0, y0, x1, y1)
        self.label = label
        self.spec = spec
        self._boundary = None
        self._row_counts = None

    # geometry of the grid ----------------------------------------------
    @property
    def width(self) -> int:
        return self.grid.width

    @property
    def height(self) -> int:
        return self.grid.height

    @property
    def x0(self) -> float:
        return self.bbox[0]

    @property
    def y0(self) -> float:
        return self.bbox[1]

    def col_x(self, j):
        return self.x0 + (np.asarray(j, dtype=float) + 0.5) * self.resolution

    def row_y(self, i):
        return self.y0 + (np.asarray(i, dtype=float) + 0.5) * self.resolution

    def edge_x(self, s):
        return self.x0 + np.asarray(s, dtype=float) * self.resolution

    def edge_y(self, i):
        # y of the horizontal grid line between rows i and i+1
        return self.y0 + (np.asarray(i, dtype=float) + 1.0) * self.resolution

    def cell_of(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        j = np.floor((pts[:, 0] - self.x0) / self.resolution).astype(np.int64)
        i = np.floor((pts[:, 1] - self.y0) / self.resolution).astype(np.int64)
        return i, j

    def inside(self, pts) -> NDArray[np.bool_]:
        """Whether the cells containing ``pts`` are inside Ω (False off-grid)."""
        i, j = self.cell_of(pts)
        return self.grid.contains(i, j)

    def cell_centers_box(self):
        """Box spanned by cell centers; lines through the grid are clipped to it."""
        h = self.resolution
        x0, y0, x1, y1 = self.bbox
        return (x0 + h / 2, y0 + h / 2, x1 - h / 2, y1 - h / 2)

    @property
    def cell_count(self) -> int:
        return self.width * self.height

    def area(self) -> float:
        return self.grid.count() * self.resolution**2

    def is_constant(self) -> bool:
        return self.grid.is_empty() or self.grid.is_full()

    def touches_bbox(self) -> bool:
        """Whether some inside cell lies on the outer ring of the grid."""
        g = self.grid
        if g.is_empty():
            return False
        if g.row_ptr[1] > 0 or g.row_ptr[-1] > g.row_ptr[-2]:
            return True
        return bool(np.any(g.starts == 0) or np.any(g.ends == g.width))

    def occupancy(self) -> NDArray[np.bool_]:
        """Dense boolean view, rows bottom to top (small grids only)."""
        return self.grid.to_dense()

    def complement(self) -> "Domain":
        lab = self.label[4:-1] if self.label.startswith("not(") and self.label.endswith(")") else f"not({self.label})"
        d = Domain(self.bbox, self.resolution, self.grid.complement(), lab)
        d._boundary = self._boundary
        d._row_counts = self._row_counts
        return d

    def with_grid(self, grid: RunGrid, label: str | None = None) -> "Domain":
        return Domain(self.bbox, self.resolution, grid, self.label if label is None else label)

    def __repr__(self):
        return f"Domain({self.label!r}, {self.height}x{self.width}, res={self.resolution:g})"

    def __eq__(self, other):
        if not isinstance(other, Domain):
            return NotImplemented
        return self.bbox == other.bbox and self.resolution == other.resolution and self.grid == other.grid

    __hash__ = None

    def __getstate__(self):
        return {"bbox": self.bbox, "resolution": self.resolution, "grid": self.grid, "label": self.label, "spec": self.spec}

    def __setstate__(self, st):
        self.__init__(st["bbox"], st["resolution"], st["grid"], st["label"], st["spec"])

    # boundary samples ----------------------------------------------------
    def _boundary_block(self, i0, i1, ja=0, jb=None):
        """Samples from rows [i0, i1) and row pairs (i, i+1) for i in [i0, i1),
        restricted to the column window [ja, jb). Unsorted."""
        g = self.grid
        W = g.width
        if jb is None:
            jb = W
        rows, s, e = g.rows_runs(i0, i1)
        # horizontal transitions: edge between columns s-1 and s
        ms = (s > 0) & (s >= ja) & (s <= jb)
        me = (e < W) & (e >= ja) & (e <= jb)
        hx = np.concatenate([s[ms], e[me]])
        hr = np.concatenate([rows[ms], rows[me]])
        vi, vj = xor_row_pairs(g, i0, i1, ja, jb)
        xs = np.concatenate([self.edge_x(hx), self.col_x(vj)])
        ys = np.concatenate([self.row_y(hr), self.edge_y(vi)])
        return np.column_stack([xs, ys])

    def boundary_in_box(self, xmin, ymin, xmax, ymax) -> NDArray[np.float64]:
        """Boundary samples with xmin <= x <= xmax and ymin <= y <= ymax,
        sorted by (y, x)."""
        h = self.resolution
        i0 = int(math.floor((ymin - self.y0) / h - 1.0)) - 1
        i1 = int(math.ceil((ymax - self.y0) / h)) + 1
        ja = int(math.floor((xmin - self.x0) / h)) - 1
        jb = int(math.ceil((xmax - self.x0) / h)) + 1
        i0 = max(i0, 0)
        i1 = min(i1, self.height)
        ja = max(ja, 0)
        jb = min(jb, self.width)
        if i1 <= i0 or jb <= ja:
            return np.zeros((0, 2))
        P = self._boundary_block(i0, i1, ja, jb)
        keep = (P[:, 0] >= xmin) & (P[:, 0] <= xmax) & (P[:, 1] >= ymin) & (P[:, 1] <= ymax)
        P = P[keep]
        return P[np.lexsort((P[:, 0], P[:, 1]))]

    def boundary_in_ball(self, c, r, closed=True) -> NDArray[np.float64]:
        c = as_point(c)
        P = self.boundary_in_box(c[0] - r, c[1] - r, c[0] + r, c[1] + r)
        d2 = (P[:, 0] - c[0]) ** 2 + (P[:, 1] - c[1]) ** 2
        return P[d2 <= r * r] if closed else P[d2 < r * r]

    def boundary_row_counts(self):
        """Number of samples contributed by each row group, in canonical order.

        Row group i holds the transitions inside row i followed by those
        between rows i and i+1.
        """
        if self._row_counts is None:
            g = self.grid
            W, H = g.width, g.height
            cnt_h = np.zeros(H, dtype=np.int64)
            inter = np.zeros(H, dtype=np.int64)
            rows_all = g.run_rows()
            for s0 in range(0, g.n_runs, 2_000_000):
                rows = rows_all[s0:s0 + 2_000_000]
                s = g.starts[s0:s0 + 2_000_000]
                e = g.ends[s0:s0 + 2_000_000]
                cnt_h += np.bincount(rows, weights=(s > 0).astype(np.int64) + (e < W), minlength=H).astype(np.int64)
                nxt = rows + 1
                ok = nxt < H
                ov = np.zeros(len(rows), dtype=np.int64)
                ov[ok] = g.count_range(nxt[ok], s[ok], e[ok])
                inter += np.bincount(rows, weights=ov, minlength=H).astype(np.int64)
            per_row = np.bincount(rows_all, weights=g.ends - g.starts, minlength=H).astype(np.int64) if g.n_runs else np.zeros(H, np.int64)
            cnt_v = np.zeros(H, dtype=np.int64)
            cnt_v[:-1] = per_row[:-1] + per_row[1:] - 2 * inter[:-1]
            self._row_counts = cnt_h + cnt_v
        return self._row_counts

    def boundary_count(self) -> int:
        return int(self.boundary_row_counts().sum())

    def boundary_samples(self) -> NDArray[np.float64]:
        """All boundary samples sorted by (y, x)."""
        if self._boundary is None:
            if self.is_constant():
                raise DomainError("no boundary")
            n = self.boundary_count()
            if n * 16 > 2_000_000_000:
                raise GridTooLarge(f"{n} boundary samples; use windowed queries")
            parts = []
            for i0 in range(0, self.height, ROW_BLOCK):
                P = self._boundary_block(i0, i0 + ROW_BLOCK)
                parts.append(P[np.lexsort((P[:, 0], P[:, 1]))])
            B = np.concatenate(parts) if parts else np.zeros((0, 2))
            B.flags.writeable = False
            self._boundary = B
        return self._boundary

    def boundary_subsample(self, n: int):
        """Every k-th boundary sample in canonical order, about ``n`` of them.

        Returns (points, total count). Uses all samples when there are at
        most ``n``.
        """
        counts = self.boundary_row_counts()
        N = int(counts.sum())
        if N == 0:
            raise DomainError("no boundary")
        if N <= n:
            if self._boundary is not None or N <= 5_000_000:
                return self.boundary_samples(), N
        idx = np.floor((np.arange(n) + 0.5) * N / n).astype(np.int64)
        cum = np.concatenate([[0], np.cumsum(counts)])
        grp = np.searchsorted(cum, idx, side="right") - 1
        out = np.empty((len(idx), 2))
        for gi in np.unique(grp):
            P = self._boundary_block(int(gi), int(gi) + 1)
            P = P[np.lexsort((P[:, 0], P[:, 1]))]
            sel = grp == gi
            out[sel] = P[idx[sel] - cum[gi]]
        return out, N

    # distances to the boundary ----------------------------------------
    def nearest_boundary_point(self, x) -> tuple[NDArray[np.float64], float]:
        """Closest boundary sample to ``x`` (lexicographic tie-break) and its distance."""
        x = as_point(x)
        if self.is_constant():
            raise DomainError("no boundary")
        x0, y0, x1, y1 = self.bbox
        span = max(x1 - x0, y1 - y0) + float(np.max(np.abs(x - [x0, y0]))) + float(np.max(np.abs(x - [x1, y1])))
        E = 4 * self.resolution
        while True:
            P = self.boundary_in_box(x[0] - E, x[1] - E, x[0] + E, x[1] + E)
            if len(P):
                k, d = nearest_in_set(x, P)
                if d <= E or E >= span:
                    return P[k].copy(), d
            elif E >= span:
                raise DomainError("no boundary")
            E *= 2

    def boundary_distance(self, pts, cap: float | None = None) -> NDArray[np.float64]:
        """Distance from each point to the nearest boundary sample.

        With ``cap`` the result is min(distance, cap), which keeps the
        search window small on very fine grids.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.is_constant():
            raise DomainError("no boundary")
        out = np.full(len(pts), np.inf)
        todo = np.arange(len(pts))
        E = 4 * self.resolution if cap is None else float(cap)
        x0, y0, x1, y1 = self.bbox
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        span = max(x1 - x0, y1 - y0) + float(np.max(np.abs(lo - [x0, y0]))) + float(np.max(np.abs(hi - [x1, y1])))
        while len(todo):
            q = pts[todo]
            qlo = q.min(axis=0)
            qhi = q.max(axis=0)
            P = self.boundary_in_box(qlo[0] - E, qlo[1] - E, qhi[0] + E, qhi[1] + E)
            if len(P):
                d, _ = cKDTree(P).query(q, k=1)
            else:
                d = np.full(len(q), np.inf)
            done = d <= E
            if cap is not None and E >= cap:
                out[todo] = np.minimum(d, cap)
                break
            if E >= span:
                if not len(P):
                    raise DomainError("no boundary")
                out[todo] = d
                break
            out[todo[done]] = d[done]
            todo = todo[~done]
            E = min(2 * E, cap) if cap is not None else 2 * E
        return out

    def depth(self, pts, cap: float | None = None) -> NDArray[np.float64]:
        """d(z, Ω^c): 0 outside Ω, else the distance to the boundary samples."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        inside = self.inside(pts)
        out = np.zeros(len(pts))
        if np.any(inside):
            out[inside] = self.boundary_distance(pts[inside], cap=cap)
        return out

    def depth_at_least(self, x, t: float) -> bool:
        """Whether x is inside and no boundary sample is closer than t."""
        x = as_point(x)
        if not self.inside(x)[0]:
            return False
        P = self.boundary_in_box(x[0] - t, x[1] - t, x[0] + t, x[1] + t)
        if not len(P):
            return True
        return bool(np.min(np.hypot(P[:, 0] - x[0], P[:, 1] - x[1])) >= t)

    def outside_cell_distance(self, x) -> float:
        """Exact distance from x to the nearest outside cell center.

        Runs in O(rows); used where a dense distance transform is too big.
        """
        x = as_point(x)
        g = self.grid
        h = self.resolution
        rows = np.arange(g.height, dtype=np.int64)
        dy = self.row_y(rows) - x[1]
        jc = int(np.floor((x[0] - self.x0) / h - 0.5))
        best = np.full(g.height, np.inf)
        keys, _ = g._keys()
        # in each row the nearest outside cell is either one of the two
        # columns around x or flanks the run covering them
        for jq in (jc, jc + 1):
            if not 0 <= jq < g.width:
                continue
            inside = g.contains(rows, np.full(g.height, jq))
            dx = np.abs(self.col_x(jq) - x[0])
            best = np.where(inside, best, np.minimum(best, np.hypot(dx, dy)))
            k = np.searchsorted(keys, rows[inside] * (g.width + 1) + jq, side="right") - 1
            s, e = g.starts[k], g.ends[k]
            left = np.where(s > 0, np.abs(self.col_x(s - 1) - x[0]), np.inf)
            right = np.where(e < g.width, np.abs(self.col_x(e) - x[0]), np.inf)
            best[inside] = np.minimum(best[inside], np.hypot(np.minimum(left, right), dy[inside]))
        return float(best.min())

    # serialization -------------------------------------------------------
    def to_json_dict(self) -> dict:
        g = self.grid
        occ: dict[str, Any] = {"width": g.width, "height": g.height}
        if g.width * g.height <= 64_000_000:
            bits = np.packbits(g.to_dense().ravel(), bitorder="big")
            occ["bits"] = base64.b64encode(bits.tobytes()).decode("ascii")
        else:
            occ["encoding"] = "runs"
            for key in ("row_ptr", "starts", "ends"):
                arr = getattr(g, key).astype("<i8")
                occ[key] = base64.b64encode(arr.tobytes()).decode("ascii")
        out = {
            "label": self.label,
            "bbox": [[self.bbox[0], self.bbox[1]], [self.bbox[2], self.bbox[3]]],
            "resolution": self.resolution,
            "occupancy": occ,
        }
        if self.spec is not None:
            out["spec"] = self.spec.to_dict()
        if not self.is_constant() and self.boundary_count() <= JSON_BOUNDARY_LIMIT:
            out["boundary"] = self.boundary_samples().tolist()
        elif self.is_constant():
            out["boundary"] = []
        return out

    @classmethod
    def from_json_dict(cls, data: dict) -> "Domain":
        try:
            (x0, y0), (x1, y1) = data["bbox"]
            h = float(data["resolution"])
            occ = data["occupancy"]
            W, H = int(occ["width"]), int(occ["height"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"malformed domain file: {exc}") from None
        if occ.get("encoding") == "runs":
            arrs = [np.frombuffer(base64.b64decode(occ[k]), dtype="<i8").astype(np.int64) for k in ("row_ptr", "starts", "ends")]
            grid = RunGrid(W, H, *arrs)
        else:
            raw = np.frombuffer(base64.b64decode(occ["bits"]), dtype=np.uint8)
            if raw.size * 8 < W * H:
                raise DomainError("occupancy bitmap too short")
            bits = np.unpackbits(raw, bitorder="big")[: W * H].astype(bool)
            grid = RunGrid.from_dense(bits.reshape(H, W))
        spec = DomainSpec.from_dict(data["spec"]) if data.get("spec") else None
        d = cls((x0, y0, x1, y1), h, grid, data.get("label", ""), spec)
        if data.get("boundary"):
            B = np.asarray(data["boundary"], dtype=float).reshape(-1, 2)
            if len(B) != d.boundary_count():
                raise DomainError("stored boundary does not match occupancy")
            B.flags.writeable = False
            d._boundary = B
        return d

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict()))

    @classmethod
    def load(cls, path) -> "Domain":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise DomainError(f"malformed domain file: {exc}") from None
        return cls.from_json_dict(data)


def boundary_samples(d: Domain) -> NDArray[np.float64]:
    return d.boundary_samples()


def complement(d: Domain) -> Domain:
    return d.complement()


def nearest_boundary_point(d: Domain, x) -> tuple[NDArray[np.float64], float]:
    return d.nearest_boundary_point(x)


__all__ = [
    "Domain",
    "DomainError",
    "DomainSpec",
    "GeometryError",
    "boundary_samples",
    "complement",
    "koch_vertices",
    "lipschitz_profile",
    "nearest_boundary_point",
    "rasterize",
]
