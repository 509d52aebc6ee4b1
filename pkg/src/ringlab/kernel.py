"""Ring kernel for the half-plane: complete elliptic integrals, the closed
form of the azimuthal source integral, its near-diagonal log expansion, and a
direct-quadrature apply of the inverse operator.

The kernel of the axisymmetric elliptic operator on the half-plane is

    G(r, z, r', z') = sqrt(r r') / (4 pi^2) * [(2/k - k) K(k) - (2/k) E(k)],
    k^2 = 4 r r' / ((r + r')^2 + (z - z')^2),

the classical stream function of a unit-mass circular filament under the
measure with density 2 pi r. Equivalently k^2 = 1 / (1 + sigma^2) with the
normalized separation sigma below.
"""

from __future__ import annotations

import math

import numpy as np

from . import backend
from .domain import DomainKind, Grid
from .errors import KernelError, UnsupportedBackendError

FOUR_PI_SQ = 4.0 * math.pi**2


def elliptic_KE(k):
    """Complete elliptic integrals (K, E) of modulus k in [0, 1), by AGM.

    Accepts a scalar or an array; relative accuracy is at the 1e-15
    iteration tolerance of the AGM.
    """
    arr = np.atleast_1d(np.asarray(k, dtype=float))
    if np.any(arr < 0) or np.any(arr >= 1):
        raise KernelError("elliptic modulus must satisfy 0 <= k < 1")
    kv = np.empty_like(arr)
    ev = np.empty_like(arr)
    backend.agm_ke(np.ascontiguousarray(arr), kv, ev)
    if np.isscalar(k) or np.ndim(k) == 0:
        return float(kv[0]), float(ev[0])
    return kv, ev


def sigma(x, x2) -> float:
    """Normalized separation [(r-r')^2 + (z-z')^2]^(1/2) / (4 r r')^(1/2)."""
    r, z = x
    rp, zp = x2
    _require_positive_radii(r, rp)
    return math.hypot(r - rp, z - zp) / math.sqrt(4.0 * r * rp)


def ring_green(x, x2) -> float:
    """Kernel value G(x, x2) for distinct points with positive radii."""
    r, z = x
    rp, zp = x2
    _require_positive_radii(r, rp)
    if r == rp and z == zp:
        raise KernelError("ring kernel is singular at coincident points")
    out = np.empty((1, 1))
    backend.green_block(np.array([float(r)]), np.array([float(z)]),
                        np.array([float(rp)]), np.array([float(zp)]), out)
    return float(out[0, 0])


def ring_green_block(rt, zt, rs, zs) -> np.ndarray:
    """Matrix of kernel values between target and source point lists."""
    rt = np.ascontiguousarray(rt, dtype=float)
    zt = np.ascontiguousarray(zt, dtype=float)
    rs = np.ascontiguousarray(rs, dtype=float)
    zs = np.ascontiguousarray(zs, dtype=float)
    out = np.empty((rt.size, rs.size))
    backend.green_block(rt, zt, rs, zs, out)
    return out


def green_leading_log(x, x2) -> float:
    """Leading near-diagonal approximation of the kernel.

    With l = (r + r')/2 and rho the meridional separation, returns
    l^2 / (4 pi^2 r') * [log(1/rho) + log(8 l) - 2]. Valid only for nearby
    points; used as a cross-check of ring_green, never in the solver.
    """
    r, z = x
    rp, zp = x2
    _require_positive_radii(r, rp)
    el = 0.5 * (r + rp)
    rho = math.hypot(r - rp, z - zp)
    if rho == 0.0:
        raise KernelError("log expansion is singular at coincident points")
    if rho > 0.2 * el:
        raise KernelError(
            f"points too far apart for the log expansion: {rho:.3g} > 0.2*{el:.3g}")
    return el * el / (FOUR_PI_SQ * rp) * (math.log(1.0 / rho) + math.log(8.0 * el) - 2.0)


def cell_log_average(h_r: float, h_z: float) -> float:
    """Integral of log(1/rho) over a centered h_r x h_z rectangle.

    Closed form from the antiderivative of log(x^2 + y^2); used for the
    singular self-cell term of the midpoint quadrature.
    """
    a = 0.5 * h_r
    b = 0.5 * h_z
    return -2.0 * (a * b * math.log(a * a + b * b) - 3.0 * a * b
                   + a * a * math.atan2(b, a) + b * b * math.atan2(a, b))


def self_cell_coefficient(r: float, h_r: float, h_z: float) -> float:
    """Effective kernel contribution of a cell to its own center.

    Integrates the leading log expansion analytically over the cell; the
    result multiplies zeta at the cell (already including the 2 pi r' factor
    of the measure).
    """
    area = h_r * h_z
    return r * r / (2.0 * math.pi) * (
        cell_log_average(h_r, h_z) + area * (math.log(8.0 * r) - 2.0))


def quadrature_apply_K(zeta, grid: Grid, targets=None) -> np.ndarray:
    """Direct midpoint-quadrature apply of the inverse operator on the
    half-plane: (K zeta)(x_i) = sum_j G(x_i, x_j) zeta_j nu_j, with the
    singular j = i term replaced by the analytic cell average.

    ``zeta`` is a per-cell field array. Returns a full grid field (zero on
    exterior cells). ``targets`` optionally restricts evaluation to a boolean
    cell mask.
    """
    if grid.domain.kind is not DomainKind.HALF_PLANE:
        raise UnsupportedBackendError(
            "direct kernel quadrature is implemented for the half-plane only")
    zeta = np.asarray(zeta, dtype=float)
    out = np.zeros(grid.shape)
    src = (zeta != 0.0) & grid.mask
    if not np.any(src):
        return out
    if targets is None:
        targets = grid.mask
    rs = grid.R[src]
    zs = grid.Z[src]
    charge = zeta[src] * grid.nu[src]
    rt = grid.R[targets]
    zt = grid.Z[targets]

    # match target cells against source cells to swap in the self term
    src_idx = {(i, j): n for n, (i, j) in enumerate(zip(*np.nonzero(src)))}
    t_cells = list(zip(*np.nonzero(targets)))

    vals = np.empty(rt.size)
    chunk = max(1, int(4e6) // max(1, rs.size))
    for lo in range(0, rt.size, chunk):
        hi = min(lo + chunk, rt.size)
        block = ring_green_block(rt[lo:hi], zt[lo:hi], rs, zs)
        for row in range(lo, hi):
            n = src_idx.get(t_cells[row])
            if n is not None:
                block[row - lo, n] = 0.0
        vals[lo:hi] = block @ charge
    for row, cell in enumerate(t_cells):
        n = src_idx.get(cell)
        if n is not None:
            vals[row] += zeta[cell] * self_cell_coefficient(
                grid.R[cell], grid.h_r, grid.h_z)
    out[targets] = vals
    return out


def _require_positive_radii(*radii):
    for r in radii:
        if not r > 0:
            raise KernelError(f"kernel points need r > 0, got r={r}")
