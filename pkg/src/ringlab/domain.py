"""Admissible meridional domains, their truncations and uniform grids.

A domain D lives in the meridional half-plane (r > 0). Grids are cell
centered and staggered off the axis: the first cell row sits at r = h_r / 2,
so no cell center touches r = 0. Each cell carries the solid-of-revolution
measure weight 2*pi*r*h_r*h_z.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError, GridError

# weights below this are treated as numerically zero in geometry measurements
W_MIN = 1e-12


class DomainKind(Enum):
    PIPE = "pipe"
    HALF_PLANE = "halfplane"
    EXTERIOR_BALL = "exteriorball"
    DISK = "disk"
    RECTANGLE = "rectangle"


@dataclass(frozen=True)
class MeridionalDomain:
    """One of the admissible domain types with its geometric parameters.

    d is the pipe radius or excluded-ball radius, b the disk radius or the
    rectangle r-extent, c the rectangle half-height. Unused parameters are
    ignored for the given kind.
    """

    kind: DomainKind
    d: float = 0.0
    b: float = 0.0
    c: float = 0.0

    def __post_init__(self):
        k = self.kind
        if k in (DomainKind.PIPE, DomainKind.EXTERIOR_BALL) and not self.d > 0:
            raise DomainError(f"{k.value} requires d > 0, got d={self.d}")
        if k in (DomainKind.DISK, DomainKind.RECTANGLE) and not self.b > 0:
            raise DomainError(f"{k.value} requires b > 0, got b={self.b}")
        if k is DomainKind.RECTANGLE and not self.c > 0:
            raise DomainError(f"rectangle requires c > 0, got c={self.c}")

    @property
    def bounded(self) -> bool:
        return self.kind in (DomainKind.DISK, DomainKind.RECTANGLE)

    def contains(self, r, z):
        """Vectorized membership test for points with r > 0."""
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=float)
        inside = r > 0
        k = self.kind
        if k is DomainKind.PIPE:
            return inside & (r < self.d)
        if k is DomainKind.HALF_PLANE:
            return inside
        if k is DomainKind.EXTERIOR_BALL:
            return inside & (r * r + z * z > self.d * self.d)
        if k is DomainKind.DISK:
            return inside & (r * r + z * z < self.b * self.b)
        return inside & (r < self.b) & (np.abs(z) < self.c)

    def natural_box(self) -> "TruncationBox | None":
        """Bounding box for bounded kinds, None for unbounded ones."""
        if self.kind is DomainKind.DISK:
            return TruncationBox(self.b, self.b)
        if self.kind is DomainKind.RECTANGLE:
            return TruncationBox(self.b, self.c)
        return None


@dataclass(frozen=True)
class TruncationBox:
    """Computational window (0, r_max) x (-z_max, z_max)."""

    r_max: float
    z_max: float

    def __post_init__(self):
        if not (self.r_max > 0 and self.z_max > 0):
            raise GridError(f"box extents must be positive, got {self}")


class Grid:
    """Uniform cell-centered grid over a truncation of an admissible domain.

    Attributes r, z are cell-center coordinate vectors; mask marks interior
    cells; nu holds the per-cell measure weight 2*pi*r*h_r*h_z, zeroed on
    exterior cells.
    """

    def __init__(self, domain: MeridionalDomain, box: TruncationBox,
                 n_r: int, n_z: int):
        self.domain = domain
        self.box = box
        self.n_r = int(n_r)
        self.n_z = int(n_z)
        self.h_r = box.r_max / self.n_r
        self.h_z = 2.0 * box.z_max / self.n_z
        self.r = (np.arange(self.n_r) + 0.5) * self.h_r
        # centered form keeps the column exactly symmetric under z -> -z
        self.z = (np.arange(self.n_z) + 0.5 - 0.5 * self.n_z) * self.h_z
        self.R, self.Z = np.meshgrid(self.r, self.z, indexing="ij")
        self.mask = np.asarray(domain.contains(self.R, self.Z))
        self.nu = np.where(self.mask, 2.0 * np.pi * self.R * self.h_r * self.h_z, 0.0)
        self._solver_ctx = None  # lazily built by the elliptic solver

    @property
    def shape(self):
        return (self.n_r, self.n_z)

    def interior_points(self):
        """(r, z) arrays of interior cell centers."""
        return self.R[self.mask], self.Z[self.mask]

    def dump_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["i", "j", "r", "z", "mask", "nu_weight"])
            for i in range(self.n_r):
                for j in range(self.n_z):
                    w.writerow([i, j, repr(float(self.r[i])), repr(float(self.z[j])),
                                int(self.mask[i, j]), repr(float(self.nu[i, j]))])


def build_grid(domain: MeridionalDomain, box: TruncationBox,
               n_r: int, n_z: int) -> Grid:
    """Construct the grid, validating the box against the domain kind."""
    if n_r < 16 or n_z < 16:
        raise GridError(f"cell counts must be >= 16, got {n_r}x{n_z}")
    k = domain.kind
    if k is DomainKind.PIPE and not np.isclose(box.r_max, domain.d):
        raise GridError(f"pipe grid must span r in (0, d): r_max={box.r_max}, d={domain.d}")
    if k is DomainKind.EXTERIOR_BALL and box.r_max <= domain.d:
        raise GridError("exterior-ball box must extend past the ball equator")
    if k is DomainKind.DISK and not (np.isclose(box.r_max, domain.b)
                                     and np.isclose(box.z_max, domain.b)):
        raise GridError("disk grid box must equal the bounding box (b, b)")
    if k is DomainKind.RECTANGLE and not (np.isclose(box.r_max, domain.b)
                                          and np.isclose(box.z_max, domain.c)):
        raise GridError("rectangle grid box must equal the bounding box (b, c)")
    return Grid(domain, box, n_r, n_z)


def nu_measure(grid: Grid, weights) -> float:
    """Measure of a weighted cell set: sum of weights * nu over the grid."""
    return float(np.sum(np.asarray(weights) * grid.nu))


def dist_to_circle(points, r_ref: float) -> float:
    """Axisymmetric sup-distance from a meridional point set to the circle
    of radius r_ref in the z = 0 plane: sup over points of
    sqrt((r - r_ref)^2 + z^2)."""
    if r_ref <= 0:
        raise DomainError(f"reference radius must be positive, got {r_ref}")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise DomainError("distance to circle of an empty point set")
    return float(np.max(np.hypot(pts[:, 0] - r_ref, pts[:, 1])))


def set_geometry(weights, grid: Grid):
    """Diameter and centroid of the active cell set (weight > W_MIN).

    Diameter is the max pairwise distance between active cell centers; the
    centroid is the nu-weighted mean of (r, z).
    """
    w = np.asarray(weights)
    active = w > W_MIN
    if not np.any(active):
        raise DomainError("empty core: all weights below threshold")
    pr = grid.R[active]
    pz = grid.Z[active]
    dr = pr[:, None] - pr[None, :]
    dz = pz[:, None] - pz[None, :]
    diameter = float(np.sqrt(np.max(dr * dr + dz * dz)))
    mass = w * grid.nu
    total = np.sum(mass)
    centroid = (float(np.sum(mass * grid.R) / total),
                float(np.sum(mass * grid.Z) / total))
    return diameter, centroid
