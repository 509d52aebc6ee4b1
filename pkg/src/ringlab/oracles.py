"""Independent ground-truth generators used to validate the main modules.

None of these share code paths with what they test: the spherical-vortex
fields are classical closed forms, the brute-force energy sums the analytic
kernel directly, and the brute-force quantile is a plain sort-and-accumulate
reimplementation of the bathtub step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import DomainKind, Grid
from .errors import DomainError, InfeasibleMassError, UnsupportedBackendError
from .kernel import ring_green_block, self_cell_coefficient


@dataclass(frozen=True)
class HillVortexSpec:
    """Classical spherical vortex: ball of radius a translating at speed U.

    In the frame of the vortex the oncoming stream has speed U toward -z and
    the potential vorticity inside the ball is the constant 15 U / (2 a^2).
    """

    a: float
    U: float

    def __post_init__(self):
        if not (self.a > 0 and self.U > 0):
            raise DomainError("Hill vortex needs a > 0 and U > 0")


def hill_vortex_fields(spec: HillVortexSpec, grid: Grid):
    """Stream function (interior and exterior branches) and potential
    vorticity of the spherical vortex, sampled at cell centers.

    The returned psi is the total field in the vortex frame: it vanishes on
    the sphere and tends to the uniform stream -U/2 r^2 far away. The induced
    part (what the inverse operator returns for this vorticity) is
    psi + U/2 r^2.
    """
    a, u = spec.a, spec.U
    if grid.domain.kind is not DomainKind.HALF_PLANE:
        raise UnsupportedBackendError("spherical-vortex oracle needs a half-plane grid")
    if grid.box.r_max <= a or grid.box.z_max <= a:
        raise DomainError("grid box does not contain the vortex sphere")
    r2 = grid.R**2
    rho2 = r2 + grid.Z**2
    inside = rho2 < a * a
    psi_in = 0.75 * u / (a * a) * r2 * (a * a - rho2)
    with np.errstate(divide="ignore", invalid="ignore"):
        psi_out = -0.5 * u * r2 * (1.0 - (a * a / rho2) ** 1.5)
    psi = np.where(inside, psi_in, psi_out)
    zeta = np.where(inside, 7.5 * u / (a * a), 0.0)
    return zeta, psi


def manufactured_stream(grid: Grid, center, radius: float):
    """Compactly supported manufactured pair (psi, L psi).

    psi = r^2 * (1 - s)^4 with s the squared scaled distance to the center;
    the image under the operator is computed analytically. The support must
    lie inside the domain.
    """
    r0, z0 = center
    if not _disk_fits(grid, r0, z0, radius):
        raise DomainError("manufactured bump support crosses the domain boundary")
    s = ((grid.R - r0) ** 2 + (grid.Z - z0) ** 2) / radius**2
    inside = s < 1.0
    one = np.where(inside, 1.0 - s, 0.0)
    bump = one**4
    dphi = -4.0 * one**3  # d/ds of (1-s)^4
    ddphi = 12.0 * one**2
    b_r = dphi * 2.0 * (grid.R - r0) / radius**2
    b_rr = ddphi * 4.0 * (grid.R - r0) ** 2 / radius**4 + dphi * 2.0 / radius**2
    b_zz = ddphi * 4.0 * (grid.Z - z0) ** 2 / radius**4 + dphi * 2.0 / radius**2
    psi = grid.R**2 * bump
    # L(r^2 B) = -(B_rr + B_zz + 3 B_r / r)
    lpsi = -np.where(inside, b_rr + b_zz + 3.0 * b_r / grid.R, 0.0)
    psi = np.where(inside, psi, 0.0)
    return psi, lpsi


def _disk_fits(grid: Grid, r0: float, z0: float, radius: float) -> bool:
    """Whether the closed disk lies strictly inside the truncated domain."""
    if r0 - radius <= 0 or r0 + radius >= grid.box.r_max:
        return False
    if abs(z0) + radius >= grid.box.z_max:
        return False
    k = grid.domain.kind
    rho = math.hypot(r0, z0)
    if k is DomainKind.DISK and rho + radius >= grid.domain.b:
        return False
    if k is DomainKind.EXTERIOR_BALL and rho - radius <= grid.domain.d:
        return False
    if k is DomainKind.PIPE and r0 + radius >= grid.domain.d:
        return False
    return True


def brute_force_energy(zeta, grid: Grid) -> float:
    """O(N^2) kernel double sum (1/2) sum_ij zeta_i G_ij zeta_j nu_i nu_j,
    with the diagonal replaced by the analytic cell average. Half-plane only."""
    if grid.domain.kind is not DomainKind.HALF_PLANE:
        raise UnsupportedBackendError("analytic kernel energy needs the half-plane")
    zeta = np.asarray(zeta, dtype=float)
    src = (zeta != 0.0) & grid.mask
    if not np.any(src):
        return 0.0
    r = grid.R[src]
    z = grid.Z[src]
    q = zeta[src] * grid.nu[src]
    g = ring_green_block(r, z, r, z)
    np.fill_diagonal(g, 0.0)
    total = float(q @ g @ q)
    self_part = float(np.sum(
        q * zeta[src] * np.array([self_cell_coefficient(ri, grid.h_r, grid.h_z)
                                  for ri in r])))
    return 0.5 * (total + self_part)


def brute_force_quantile(phi, grid: Grid, lam: float):
    """Sort-and-accumulate reference for the bathtub step.

    Walks cells in descending potential order until the target measure 1/lam
    is covered, then splits the threshold level set proportionally.
    """
    target = 1.0 / lam
    feasible = grid.mask & np.isfinite(np.asarray(phi))
    phi_f = np.asarray(phi)[feasible]
    nu_f = grid.nu[feasible]
    if sum(nu_f) < target:
        raise InfeasibleMassError("target measure exceeds the feasible measure")
    idx = sorted(range(phi_f.size), key=lambda n: -phi_f[n])
    acc = 0.0
    mu = None
    for n in idx:
        acc = acc + nu_f[n]
        if acc >= target:
            mu = float(phi_f[n])
            break
    above = phi_f > mu
    tie = phi_f == mu
    mass_above = float(np.sum(nu_f[above]))
    tie_mass = float(np.sum(nu_f[tie]))
    frac = (target - mass_above) / tie_mass
    w_f = np.where(above, 1.0, np.where(tie, frac, 0.0))
    weights = np.zeros(grid.shape)
    weights[feasible] = w_f
    return weights, mu
