"""Marching-squares contour extraction and a small deterministic SVG writer.

No plotting dependency: level sets are polyline segments computed on the
cell-center lattice and written as SVG paths. Output carries no timestamps,
so identical inputs give byte-identical files.
"""

from __future__ import annotations

import numpy as np


def _interp(p1, p2, v1, v2, level):
    t = (level - v1) / (v2 - v1)
    return (p1[0] + t * (p2[0] - p1[0]), p1[1] + t * (p2[1] - p1[1]))


def marching_squares(field: np.ndarray, r: np.ndarray, z: np.ndarray,
                     level: float):
    """Segments of the level set of a cell-centered field.

    Walks 2x2 blocks of cell centers; returns a list of ((r1,z1),(r2,z2))
    segments with linear interpolation along block edges.
    """
    segs = []
    f = field
    n_r, n_z = f.shape
    for i in range(n_r - 1):
        for j in range(n_z - 1):
            corners = [(r[i], z[j]), (r[i + 1], z[j]),
                       (r[i + 1], z[j + 1]), (r[i], z[j + 1])]
            vals = [f[i, j], f[i + 1, j], f[i + 1, j + 1], f[i, j + 1]]
            idx = sum(1 << k for k, v in enumerate(vals) if v > level)
            if idx in (0, 15):
                continue
            pts = []
            edges = [(0, 1), (1, 2), (2, 3), (3, 0)]
            for a, b in edges:
                va, vb = vals[a], vals[b]
                if (va > level) != (vb > level):
                    pts.append(_interp(corners[a], corners[b], va, vb, level))
            if len(pts) >= 2:
                segs.append((pts[0], pts[1]))
            if len(pts) == 4:  # saddle: connect the remaining pair
                segs.append((pts[2], pts[3]))
    return segs


def _fmt(x: float) -> str:
    return f"{x:.6g}"


class SvgCanvas:
    """Minimal SVG assembler mapping (r, z) data coordinates to pixels."""

    def __init__(self, r_max: float, z_max: float, width: int = 640):
        self.pad = 40
        self.w = width
        self.h = int(width * (2 * z_max) / r_max) if r_max >= 2 * z_max else int(
            width * min(2.0, (2 * z_max) / r_max))
        self.h = max(240, min(900, self.h))
        self.r_max = r_max
        self.z_max = z_max
        self.parts = []

    def x(self, r: float) -> float:
        return self.pad + (r / self.r_max) * (self.w - 2 * self.pad)

    def y(self, z: float) -> float:
        return self.pad + (1 - (z + self.z_max) / (2 * self.z_max)) * (self.h - 2 * self.pad)

    def rect(self, r0, z0, r1, z1, fill, opacity=1.0):
        x0, y1 = self.x(r0), self.y(z0)
        x1, y0 = self.x(r1), self.y(z1)
        self.parts.append(
            f'<rect x="{_fmt(x0)}" y="{_fmt(y0)}" width="{_fmt(x1 - x0)}" '
            f'height="{_fmt(y1 - y0)}" fill="{fill}" fill-opacity="{_fmt(opacity)}"/>')

    def segments(self, segs, color, width=1.0):
        if not segs:
            return
        d = " ".join(
            f"M {_fmt(self.x(p[0]))} {_fmt(self.y(p[1]))} "
            f"L {_fmt(self.x(q[0]))} {_fmt(self.y(q[1]))}" for p, q in segs)
        self.parts.append(
            f'<path d="{d}" stroke="{color}" stroke-width="{_fmt(width)}" fill="none"/>')

    def marker(self, r, z, color="#cc0000"):
        x, y = self.x(r), self.y(z)
        self.parts.append(
            f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="4" stroke="{color}" '
            f'stroke-width="1.5" fill="none"/>')
        self.parts.append(
            f'<path d="M {_fmt(x - 8)} {_fmt(y)} L {_fmt(x + 8)} {_fmt(y)} '
            f'M {_fmt(x)} {_fmt(y - 8)} L {_fmt(x)} {_fmt(y + 8)}" '
            f'stroke="{color}" stroke-width="0.8" fill="none"/>')

    def text(self, r, z, s, size=12, color="#333333"):
        self.parts.append(
            f'<text x="{_fmt(self.x(r))}" y="{_fmt(self.y(z))}" '
            f'font-size="{size}" fill="{color}" font-family="monospace">{s}</text>')

    def frame(self, label: str):
        x0, y0 = self.pad, self.pad
        x1, y1 = self.w - self.pad, self.h - self.pad
        self.parts.append(
            f'<rect x="{x0}" y="{y0}" width="{x1 - x0}" height="{y1 - y0}" '
            f'stroke="#000" fill="none"/>')
        self.parts.append(
            f'<text x="{x0}" y="{y0 - 10}" font-size="13" '
            f'font-family="monospace">{label}</text>')
        self.parts.append(
            f'<text x="{x1 - 14}" y="{y1 + 24}" font-size="12" '
            f'font-family="monospace">r</text>')
        self.parts.append(
            f'<text x="{x0 - 24}" y="{y0 + 14}" font-size="12" '
            f'font-family="monospace">z</text>')

    def render(self) -> str:
        body = "\n".join(self.parts)
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.w}" '
                f'height="{self.h}" viewBox="0 0 {self.w} {self.h}">\n'
                f'<rect width="100%" height="100%" fill="white"/>\n'
                f"{body}\n</svg>\n")


def contour_figure(grid, psi_lambda: np.ndarray, weights: np.ndarray,
                   r_ref: float | None, label: str) -> str:
    """Level sets of the shifted stream function with the core shaded and the
    predicted ring radius marked."""
    canvas = SvgCanvas(grid.box.r_max, grid.box.z_max)
    # masked-out region shading
    if not grid.mask.all():
        for i, j in zip(*np.nonzero(~grid.mask)):
            canvas.rect(grid.r[i] - grid.h_r / 2, grid.z[j] - grid.h_z / 2,
                        grid.r[i] + grid.h_r / 2, grid.z[j] + grid.h_z / 2,
                        "#bbbbbb", 0.6)
    for i, j in zip(*np.nonzero(weights > 0.5)):
        canvas.rect(grid.r[i] - grid.h_r / 2, grid.z[j] - grid.h_z / 2,
                    grid.r[i] + grid.h_r / 2, grid.z[j] + grid.h_z / 2,
                    "#e06060", 0.8)
    finite = psi_lambda[grid.mask]
    lo, hi = float(finite.min()), float(finite.max())
    for frac in (0.2, 0.4, 0.6, 0.8):
        level = lo + frac * (hi - lo)
        canvas.segments(marching_squares(psi_lambda, grid.r, grid.z, level),
                        "#5577aa", 0.8)
    canvas.segments(marching_squares(psi_lambda, grid.r, grid.z, 0.0),
                    "#000000", 1.6)
    if r_ref is not None:
        canvas.marker(r_ref, 0.0)
    canvas.frame(label)
    return canvas.render()
