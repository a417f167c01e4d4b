"""Run-length encoded occupancy grids.

A grid of ``height`` rows and ``width`` columns is stored as maximal runs of
inside cells per row: run k of row i covers columns ``starts[k] <= j < ends[k]``
for ``row_ptr[i] <= k < row_ptr[i+1]``. Runs in a row are sorted and separated
by at least one outside cell. Row 0 is the bottom row.

This keeps very fine grids (millions of rows) in memory as long as the
boundary is short, which is what certification at small epsilon needs.
"""
from __future__ import annotations

import numpy as np

DENSE_LIMIT = 64_000_000  # cells; to_dense refuses beyond this


class GridTooLarge(MemoryError):
    pass


def _expand_ranges(a, b):
    """Concatenate arange(a[k], b[k]) for all k, with the owner index."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    n = np.maximum(b - a, 0)
    total = int(n.sum())
    owner = np.repeat(np.arange(len(a)), n)
    if total == 0:
        return np.zeros(0, dtype=np.int64), owner
    offs = np.cumsum(n) - n
    vals = np.arange(total, dtype=np.int64) - np.repeat(offs, n) + np.repeat(a, n)
    return vals, owner


def normalize_runs(height: int, width: int, rows, a, b):
    """Merge arbitrary (row, [a, b)) intervals into maximal sorted runs.

    Returns (row_ptr, starts, ends).
    """
    rows = np.asarray(rows, dtype=np.int64)
    a = np.clip(np.asarray(a, dtype=np.int64), 0, width)
    b = np.clip(np.asarray(b, dtype=np.int64), 0, width)
    keep = (b > a) & (rows >= 0) & (rows < height)
    rows, a, b = rows[keep], a[keep], b[keep]
    if len(rows) == 0:
        return np.zeros(height + 1, dtype=np.int64), np.zeros(0, np.int64), np.zeros(0, np.int64)
    order = np.lexsort((a, rows))
    rows, a, b = rows[order], a[order], b[order]
    stride = width + 1
    kb = rows * stride + b
    cm = np.maximum.accumulate(kb)
    ka = rows * stride + a
    new = np.ones(len(rows), dtype=bool)
    # a run continues while it touches or overlaps the running maximum end
    new[1:] = ka[1:] > cm[:-1]
    gid = np.cumsum(new) - 1
    first = np.flatnonzero(new)
    last = np.append(first[1:] - 1, len(rows) - 1)
    r_rows = rows[first]
    starts = a[first]
    ends = cm[last] - r_rows * stride
    counts = np.bincount(r_rows, minlength=height)
    row_ptr = np.zeros(height + 1, dtype=np.int64)
    np.cumsum(counts, out=row_ptr[1:])
    del gid
    return row_ptr, starts.astype(np.int64), ends.astype(np.int64)


class RunGrid:
    """Immutable run-length encoded boolean grid."""

    __slots__ = ("width", "height", "row_ptr", "starts", "ends", "_gkeys", "_cum", "_run_rows")

    def __init__(self, width: int, height: int, row_ptr, starts, ends, check: bool = True):
        self.width = int(width)
        self.height = int(height)
        self.row_ptr = np.ascontiguousarray(row_ptr, dtype=np.int64)
        self.starts = np.ascontiguousarray(starts, dtype=np.int64)
        self.ends = np.ascontiguousarray(ends, dtype=np.int64)
        self._gkeys = None
        self._cum = None
        self._run_rows = None
        for arr in (self.row_ptr, self.starts, self.ends):
            arr.flags.writeable = False
        if check:
            self._validate()

    def _validate(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("grid dimensions must be positive")
        if len(self.row_ptr) != self.height + 1 or self.row_ptr[0] != 0:
            raise ValueError("row_ptr has wrong shape")
        if self.row_ptr[-1] != len(self.starts) or len(self.starts) != len(self.ends):
            raise ValueError("run arrays inconsistent with row_ptr")
        if np.any(np.diff(self.row_ptr) < 0):
            raise ValueError("row_ptr not monotone")
        if len(self.starts):
            if self.starts.min() < 0 or self.ends.max() > self.width:
                raise ValueError("run outside grid")
            if np.any(self.ends <= self.starts):
                raise ValueError("empty or reversed run")
            # consecutive runs in a row must be separated by a gap
            same = self.run_rows()[1:] == self.run_rows()[:-1]
            if np.any(self.starts[1:][same] <= self.ends[:-1][same]):
                raise ValueError("runs not sorted and maximal")

    # construction -------------------------------------------------------
    @classmethod
    def from_intervals(cls, height, width, rows, a, b) -> "RunGrid":
        rp, s, e = normalize_runs(height, width, rows, a, b)
        return cls(width, height, rp, s, e, check=False)

    @classmethod
    def empty(cls, height, width) -> "RunGrid":
        return cls(width, height, np.zeros(height + 1, np.int64), np.zeros(0, np.int64), np.zeros(0, np.int64))

    @classmethod
    def from_dense(cls, mask) -> "RunGrid":
        mask = np.asarray(mask, dtype=bool)
        H, W = mask.shape
        pad = np.zeros((H, W + 2), dtype=np.int8)
        pad[:, 1:-1] = mask
        d = np.diff(pad, axis=1)
        ri, si = np.nonzero(d == 1)
        _, ei = np.nonzero(d == -1)
        counts = np.bincount(ri, minlength=H)
        rp = np.zeros(H + 1, dtype=np.int64)
        np.cumsum(counts, out=rp[1:])
        return cls(W, H, rp, si, ei, check=False)

    def to_dense(self) -> np.ndarray:
        if self.width * self.height > DENSE_LIMIT:
            raise GridTooLarge(f"grid too large for a dense view ({self.height}x{self.width})")
        out = np.zeros((self.height, self.width), dtype=bool)
        cols, owner = _expand_ranges(self.starts, self.ends)
        out[self.run_rows()[owner], cols] = True
        return out

    # basic properties ---------------------------------------------------
    @property
    def n_runs(self) -> int:
        return len(self.starts)

    @property
    def shape(self):
        return (self.height, self.width)

    def run_rows(self) -> np.ndarray:
        if self._run_rows is None:
            self._run_rows = np.repeat(np.arange(self.height, dtype=np.int64), np.diff(self.row_ptr))
        return self._run_rows

    def count(self) -> int:
        return int(np.sum(self.ends - self.starts))

    def is_empty(self) -> bool:
        return self.n_runs == 0

    def is_full(self) -> bool:
        return self.n_runs == self.height and bool(np.all(self.starts == 0)) and bool(np.all(self.ends == self.width))

    def __eq__(self, other):
        if not isinstance(other, RunGrid):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.row_ptr, other.row_ptr)
            and np.array_equal(self.starts, other.starts)
            and np.array_equal(self.ends, other.ends)
        )

    def __hash__(self):
        return hash((self.shape, self.n_runs, self.count()))

    def __getstate__(self):
        return (self.width, self.height, self.row_ptr, self.starts, self.ends)

    def __setstate__(self, state):
        w, h, rp, s, e = state
        RunGrid.__init__(self, w, h, rp, s, e, check=False)

    def rows_runs(self, i0: int, i1: int):
        """Runs of rows [i0, i1) as (rows, starts, ends)."""
        i0 = max(0, int(i0))
        i1 = min(self.height, int(i1))
        if i1 <= i0:
            z = np.zeros(0, dtype=np.int64)
            return z, z, z
        k0, k1 = self.row_ptr[i0], self.row_ptr[i1]
        rows = np.repeat(np.arange(i0, i1, dtype=np.int64), np.diff(self.row_ptr[i0:i1 + 1]))
        return rows, self.starts[k0:k1], self.ends[k0:k1]

    # set operations -----------------------------------------------------
    def complement(self) -> "RunGrid":
        H, W = self.height, self.width
        counts = np.diff(self.row_ptr)
        n = self.n_runs
        rows = self.run_rows()
        # slots: one gap before every run plus one tail gap per row
        out_s = np.empty(n + H, dtype=np.int64)
        out_e = np.empty(n + H, dtype=np.int64)
        run_slot = np.arange(n, dtype=np.int64) + rows
        prev_end = np.zeros(n, dtype=np.int64)
        if n:
            same = np.zeros(n, dtype=bool)
            same[1:] = rows[1:] == rows[:-1]
            prev_end[1:] = np.where(same[1:], self.ends[:-1], 0)
        out_s[run_slot] = prev_end
        out_e[run_slot] = self.starts
        tail_slot = self.row_ptr[1:] + np.arange(H, dtype=np.int64)
        last_end = np.zeros(H, dtype=np.int64)
        has = counts > 0
        last_end[has] = self.ends[self.row_ptr[1:][has] - 1]
        out_s[tail_slot] = last_end
        out_e[tail_slot] = W
        keep = out_e > out_s
        slot_rows = np.repeat(np.arange(H, dtype=np.int64), counts + 1)
        kr = slot_rows[keep]
        rp = np.zeros(H + 1, dtype=np.int64)
        np.cumsum(np.bincount(kr, minlength=H), out=rp[1:])
        return RunGrid(W, H, rp, out_s[keep], out_e[keep], check=False)

    def union(self, other: "RunGrid") -> "RunGrid":
        self._check_same(other)
        rows = np.concatenate([self.run_rows(), other.run_rows()])
        a = np.concatenate([self.starts, other.starts])
        b = np.concatenate([self.ends, other.ends])
        return RunGrid.from_intervals(self.height, self.width, rows, a, b)

    def difference(self, other: "RunGrid") -> "RunGrid":
        return self.complement().union(other).complement()

    def intersection(self, other: "RunGrid") -> "RunGrid":
        return self.complement().union(other.complement()).complement()

    def select_runs(self, mask) -> "RunGrid":
        mask = np.asarray(mask, dtype=bool)
        rows = self.run_rows()[mask]
        rp = np.zeros(self.height + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=self.height), out=rp[1:])
        return RunGrid(self.width, self.height, rp, self.starts[mask], self.ends[mask], check=False)

    def _check_same(self, other):
        if self.shape != other.shape:
            raise ValueError("grids have different shapes")

    # queries ------------------------------------------------------------
    def _keys(self):
        if self._gkeys is None:
            self._gkeys = self.run_rows() * (self.width + 1) + self.starts
            cum = np.zeros(self.n_runs + 1, dtype=np.int64)
            np.cumsum(self.ends - self.starts, out=cum[1:])
            self._cum = cum
        return self._gkeys, self._cum

    def contains(self, i, j) -> np.ndarray:
        """Whether cells (i, j) are set; out-of-range cells are not."""
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        ok = (i >= 0) & (i < self.height) & (j >= 0) & (j < self.width)
        out = np.zeros(np.broadcast(i, j).shape, dtype=bool)
        if self.n_runs == 0 or not np.any(ok):
            return out
        ii, jj = np.broadcast_arrays(i, j)
        ii = ii[ok]
        jj = jj[ok]
        keys, _ = self._keys()
        k = np.searchsorted(keys, ii * (self.width + 1) + jj, side="right") - 1
        kk = np.maximum(k, 0)
        hit = (k >= 0) & (self.run_rows()[kk] == ii) & (self.ends[kk] > jj)
        out[ok] = hit
        return out

    def prefix_count(self, i, j) -> np.ndarray:
        """Number of set cells in row i with column < j."""
        i = np.asarray(i, dtype=np.int64)
        j = np.clip(np.asarray(j, dtype=np.int64), 0, self.width)
        if self.n_runs == 0:
            return np.zeros(np.broadcast(i, j).shape, dtype=np.int64)
        keys, cum = self._keys()
        k = np.searchsorted(keys, i * (self.width + 1) + j, side="left")
        base = self.row_ptr[i]
        res = cum[k] - cum[base]
        km1 = np.maximum(k - 1, 0)
        over = np.where(k - 1 >= base, np.maximum(self.ends[km1] - j, 0), 0)
        return res - over

    def count_range(self, i, ja, jb) -> np.ndarray:
        """Number of set cells in row i with ja <= column < jb."""
        ja = np.asarray(ja, dtype=np.int64)
        jb = np.maximum(np.asarray(jb, dtype=np.int64), ja)
        return self.prefix_count(i, jb) - self.prefix_count(i, ja)

    def intersection_count(self, other: "RunGrid", block: int = 2_000_000) -> int:
        self._check_same(other)
        total = 0
        rows = self.run_rows()
        for s in range(0, self.n_runs, block):
            r = rows[s:s + block]
            total += int(np.sum(other.count_range(r, self.starts[s:s + block], self.ends[s:s + block])))
        return total

    def xor_count(self, other: "RunGrid") -> int:
        return self.count() + other.count() - 2 * self.intersection_count(other)

    def row_extremes(self):
        """Rows with at least one run, and their leftmost start / rightmost end."""
        counts = np.diff(self.row_ptr)
        rows = np.flatnonzero(counts)
        return rows, self.starts[self.row_ptr[rows]], self.ends[self.row_ptr[rows + 1] - 1]


def xor_row_pairs(grid: RunGrid, i0: int, i1: int, ja: int = 0, jb: int | None = None):
    """Cells that differ between rows i and i+1, for i0 <= i < i1.

    Only columns in [ja, jb) are considered. Returns (i, columns) as two
    flat arrays sorted by (i, column).
    """
    if jb is None:
        jb = grid.width
    i0 = max(0, int(i0))
    i1 = min(grid.height - 1, int(i1))
    z = np.zeros(0, dtype=np.int64)
    if i1 <= i0 or jb <= ja:
        return z, z
    stride = grid.width + 2
    parts = []
    for shift in (0, 1):
        rows, s, e = grid.rows_runs(i0 + shift, i1 + shift)
        s = np.clip(s, ja, jb)
        e = np.clip(e, ja, jb)
        keep = e > s
        pair = rows[keep] - shift
        parts.append(pair * stride + s[keep])
        parts.append(pair * stride + e[keep])
    keys = np.sort(np.concatenate(parts))
    if len(keys) == 0:
        return z, z
    dup = np.zeros(len(keys), dtype=bool)
    eq = keys[1:] == keys[:-1]
    dup[1:] |= eq
    dup[:-1] |= eq
    keys = keys[~dup]
    a = keys[0::2]
    b = keys[1::2]
    pair = a // stride
    cols, owner = _expand_ranges(a - pair * stride, b - pair * stride)
    return pair[owner], cols
