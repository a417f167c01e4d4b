"""Points, hyperplanes and distances between finite point sets.

Points are plain numpy arrays of shape (N,), point sets arrays of shape (n, N).
All lengths are in world units. Nothing here knows about grids.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial import cKDTree

from . import kernels

# below this many points per side the Hausdorff distance is brute force
BRUTE_LIMIT = 2000

NORMAL_TOL = 1e-12


class GeometryError(ValueError):
    pass


def as_point(p: ArrayLike) -> NDArray[np.float64]:
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(p)):
        raise GeometryError("point has non-finite coordinates")
    return p


def as_point_set(S: ArrayLike, dim: int | None = None) -> NDArray[np.float64]:
    S = np.asarray(S, dtype=np.float64)
    if S.ndim == 1:
        S = S.reshape(1, -1) if S.size else S.reshape(0, dim or 2)
    if S.shape[0] == 0:
        raise GeometryError("empty set")
    if dim is not None and S.shape[1] != dim:
        raise GeometryError(f"dimension mismatch: {S.shape[1]} != {dim}")
    if not np.all(np.isfinite(S)):
        raise GeometryError("point set has non-finite coordinates")
    return np.ascontiguousarray(S)


def unit(v: ArrayLike) -> NDArray[np.float64]:
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if n == 0 or not np.isfinite(n):
        raise GeometryError("cannot normalize a zero vector")
    return v / n


@dataclass(frozen=True)
class Hyperplane:
    """Affine hyperplane through ``base`` with unit ``normal``."""

    base: NDArray[np.float64]
    normal: NDArray[np.float64]

    def __post_init__(self):
        base = as_point(self.base)
        normal = np.asarray(self.normal, dtype=np.float64).reshape(-1)
        if normal.shape != base.shape:
            raise GeometryError("base and normal dimensions differ")
        if abs(np.linalg.norm(normal) - 1.0) > NORMAL_TOL:
            normal = unit(normal)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "normal", normal)

    @classmethod
    def from_angle(cls, base, theta: float) -> "Hyperplane":
        """Line in the plane through ``base`` with direction angle ``theta``."""
        return cls(base, np.array([-np.sin(theta), np.cos(theta)]))

    @property
    def dim(self) -> int:
        return self.base.shape[0]

    def signed_distance(self, pts: ArrayLike) -> NDArray[np.float64]:
        pts = np.asarray(pts, dtype=np.float64)
        return (pts - self.base) @ self.normal

    def direction(self) -> NDArray[np.float64]:
        """Unit direction of a line (N = 2 only)."""
        if self.dim != 2:
            raise GeometryError("direction() is only defined for lines")
        return np.array([self.normal[1], -self.normal[0]])

    def flipped(self) -> "Hyperplane":
        return Hyperplane(self.base, -self.normal)

    def to_dict(self):
        return {"base": self.base.tolist(), "normal": self.normal.tolist()}


def dist_point_set(p: ArrayLike, S: ArrayLike) -> float:
    """Distance from ``p`` to the finite set ``S`` (exhaustive scan)."""
    p = as_point(p)
    S = as_point_set(S, dim=p.shape[0])
    return float(np.sqrt(np.min(_sqdist_to(p, S))))


def _sqdist_to(p: NDArray, S: NDArray) -> NDArray:
    # squared distances summed coordinate by coordinate, the same way the
    # kernels do it, so equal inputs give bit-equal outputs
    d2 = np.zeros(len(S))
    for k in range(S.shape[1]):
        diff = S[:, k] - p[k]
        d2 += diff * diff
    return d2


def nearest_in_set(p: ArrayLike, S: ArrayLike) -> tuple[int, float]:
    """Index and distance of the nearest point of ``S`` to ``p``.

    Ties go to the lexicographically smallest point.
    """
    p = as_point(p)
    S = as_point_set(S, dim=p.shape[0])
    d2 = _sqdist_to(p, S)
    m = d2.min()
    cand = np.flatnonzero(d2 == m)
    if len(cand) > 1:
        keys = tuple(S[cand, k] for k in range(S.shape[1] - 1, -1, -1))
        cand = cand[np.lexsort(keys)]
    return int(cand[0]), float(np.sqrt(m))


def directed_hausdorff(S: ArrayLike, T: ArrayLike, method: str = "auto"):
    """sup_{s in S} d(s, T) with the witness indices (i_s, j_t)."""
    S = as_point_set(S)
    T = as_point_set(T, dim=S.shape[1])
    if method == "auto":
        method = "brute" if max(len(S), len(T)) < BRUTE_LIMIT else "kdtree"
    if method == "brute":
        d, i, j = kernels.directed_hausdorff(S, T)
        return float(d), int(i), int(j)
    if method == "kdtree":
        dist, idx = cKDTree(T).query(S, k=1)
        i = int(np.argmax(dist))
        return float(dist[i]), i, int(idx[i])
    raise ValueError(f"unknown method {method!r}")


def hausdorff(S: ArrayLike, T: ArrayLike, method: str = "auto") -> float:
    """Hausdorff distance between two nonempty finite point sets."""
    return hausdorff_witness(S, T, method)[0]


def hausdorff_witness(S: ArrayLike, T: ArrayLike, method: str = "auto"):
    """Hausdorff distance plus a witness pair (s, t) realizing it."""
    S = as_point_set(S)
    T = as_point_set(T, dim=S.shape[1])
    d1, i1, j1 = directed_hausdorff(S, T, method)
    d2, i2, j2 = directed_hausdorff(T, S, method)
    if d1 >= d2:
        return d1, (S[i1], T[j1])
    return d2, (S[j2], T[i2])


def angle_cosine(n1: ArrayLike, n2: ArrayLike, tol: float = 1e-9) -> float:
    n1 = np.asarray(n1, dtype=np.float64)
    n2 = np.asarray(n2, dtype=np.float64)
    if n1.shape != n2.shape:
        raise GeometryError("dimension mismatch")
    if abs(np.linalg.norm(n1) - 1) > tol or abs(np.linalg.norm(n2) - 1) > tol:
        raise GeometryError("not normalized")
    return float(np.clip(n1 @ n2, -1.0, 1.0))


def segment_points(a: ArrayLike, b: ArrayLike, step: float) -> NDArray[np.float64]:
    """Evenly spaced points on [a, b] with spacing at most ``step``, ends included."""
    a = as_point(a)
    b = as_point(b)
    L = float(np.linalg.norm(b - a))
    n = max(1, int(np.ceil(L / step))) if step > 0 else 1
    t = np.linspace(0.0, 1.0, n + 1)
    return a + t[:, None] * (b - a)


def polyline_length(vertices: ArrayLike) -> float:
    v = np.asarray(vertices, dtype=np.float64)
    if len(v) < 2:
        return 0.0
    return float(np.sum(np.linalg.norm(np.diff(v, axis=0), axis=1)))


def plane_ball_hausdorff(points: ArrayLike, plane: Hyperplane, r: float, n_disk: int = 64) -> float:
    """d_H(points, P ∩ B(base, r)) for a general hyperplane in R^N.

    The set P ∩ B is replaced by a dense polar sample (N = 3) or the exact
    segment (N = 2).
    """
    pts = as_point_set(points, dim=plane.dim)
    rel = pts - plane.base
    if plane.dim == 2:
        u = plane.direction()
        theta = float(np.arctan2(u[1], u[0]))
        return float(kernels.plane_deviation(rel, theta, -r, r))
    disk = _disk_sample(plane, r, n_disk)
    return hausdorff(rel + plane.base, disk)


def _disk_sample(plane: Hyperplane, r: float, n: int) -> NDArray[np.float64]:
    # orthonormal basis of the hyperplane, then a polar grid on it
    nrm = plane.normal
    basis = np.linalg.svd(nrm.reshape(1, -1))[2][1:]
    rings = np.linspace(0.0, r, n // 4 + 1)
    pts = [np.zeros(plane.dim)]
    for rad in rings[1:]:
        m = max(6, int(np.ceil(2 * np.pi * rad / (r / (n // 4)))))
        ang = np.linspace(0, 2 * np.pi, m, endpoint=False)
        if plane.dim == 3:
            pts.extend(rad * (np.cos(a) * basis[0] + np.sin(a) * basis[1]) for a in ang)
        else:
            raise GeometryError("plane sampling implemented for N <= 3")
    return np.asarray(pts) + plane.base
