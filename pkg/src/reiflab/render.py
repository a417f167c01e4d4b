"""Deterministic SVG pictures of a domain with curves and lines on top."""
from __future__ import annotations

import numpy as np

from .domains import Domain
from .geometry import Hyperplane
from .jones import Polyline

MAX_PIXELS = 600  # display raster per side


def _fmt(v: float) -> str:
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _display_mask(d: Domain, n: int):
    """Occupancy sampled at the centers of an n-wide display raster."""
    x0, y0, x1, y1 = d.bbox
    W = min(d.width, n)
    H = max(1, int(round(W * (y1 - y0) / (x1 - x0))))
    if H > n:
        H = n
        W = max(1, int(round(H * (x1 - x0) / (y1 - y0))))
    xs = x0 + (np.arange(W) + 0.5) * (x1 - x0) / W
    ys = y0 + (np.arange(H) + 0.5) * (y1 - y0) / H
    X, Y = np.meshgrid(xs, ys)
    m = d.inside(np.column_stack([X.ravel(), Y.ravel()])).reshape(H, W)
    return m, W, H


def render(d: Domain, overlays=(), size: int = MAX_PIXELS) -> str:
    """SVG text: filled occupancy, its outline, then one element per overlay."""
    x0, y0, x1, y1 = d.bbox
    m, W, H = _display_mask(d, size)
    sx = W / (x1 - x0)
    sy = H / (y1 - y0)

    def px(p):
        return (p[0] - x0) * sx, (y1 - p[1]) * sy

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f"<title>{_escape(d.label)}</title>",
        f'<rect width="{W}" height="{H}" fill="#ffffff"/>',
    ]
    # filled region: one rectangle per run of each display row
    rects = []
    for i in range(H):
        row = m[H - 1 - i]
        if not row.any():
            continue
        e = np.flatnonzero(np.diff(np.concatenate([[0], row.astype(np.int8), [0]])))
        for a, b in zip(e[::2], e[1::2]):
            rects.append(f"M{a} {i}h{b - a}v1h{a - b}z")
    if rects:
        out.append(f'<path class="domain" fill="#c6dbef" d="{"".join(rects)}"/>')
    # outline: display-cell edges between inside and outside
    edges = []
    pad = np.pad(m[::-1], 1)
    vh = np.argwhere(pad[1:-1, 1:] != pad[1:-1, :-1])
    for i, j in vh:
        edges.append(f"M{j} {i}v1")
    hh = np.argwhere(pad[1:, 1:-1] != pad[:-1, 1:-1])
    for i, j in hh:
        edges.append(f"M{j} {i}h1")
    if edges:
        out.append(f'<path class="boundary" fill="none" stroke="#08306b" stroke-width="1" d="{"".join(edges)}"/>')
    for k, ov in enumerate(overlays):
        if isinstance(ov, Polyline):
            pts = [px(p) for p in ov.vertices]
            d_attr = "M" + "L".join(f"{_fmt(a)} {_fmt(b)}" for a, b in pts)
            out.append(f'<path class="curve" id="curve{k}" fill="none" stroke="#cb181d" stroke-width="2" d="{d_attr}"/>')
        elif isinstance(ov, Hyperplane):
            u = ov.direction()
            L = float(np.hypot(x1 - x0, y1 - y0))
            a, b = px(ov.base - L * u), px(ov.base + L * u)
            out.append(
                f'<line class="plane" id="plane{k}" x1="{_fmt(a[0])}" y1="{_fmt(a[1])}" x2="{_fmt(b[0])}" '
                f'y2="{_fmt(b[1])}" stroke="#238b45" stroke-width="1.5" stroke-dasharray="6 3"/>'
            )
        else:
            raise TypeError(f"cannot render overlay of type {type(ov).__name__}")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


__all__ = ["render"]
