"""Discrete axisymmetric elliptic operator and its inverse.

The operator L psi = -(1/r) d_r((1/r) d_r psi) - (1/r^2) d_zz psi is
degenerate at the axis, so the linear solver works in the regularized
variable u = psi / r^2, which satisfies the uniformly elliptic conservative
equation -div(r^3 grad u) = r^3 zeta with a natural (zero-flux) axis
condition; psi = r^2 u then vanishes on the axis structurally. Homogeneous
Dirichlet data on physical walls, masked boundaries and truncation edges is
imposed at face midpoints (half-cell spacing).

The solve is conjugate gradients preconditioned by one symmetric geometric
multigrid V-cycle (red-black Gauss-Seidel smoothing, bilinear prolongation
and its adjoint as restriction, direct bottom solve); plain SOR is available
as a fallback method. The public apply_L evaluates the stream-function form
of the operator directly.
"""

from __future__ import annotations

import numpy as np

from . import backend
from .domain import Grid, MeridionalDomain
from .errors import SolverFailure


class _Level:
    """Assembled 5-point operator for the u form on one multigrid level."""

    def __init__(self, domain: MeridionalDomain, r_max: float, z_max: float,
                 n_r: int, n_z: int, interior: np.ndarray | None = None):
        self.n_r = n_r
        self.n_z = n_z
        self.h_r = r_max / n_r
        self.h_z = 2.0 * z_max / n_z
        self.r = (np.arange(n_r) + 0.5) * self.h_r
        z = (np.arange(n_z) + 0.5 - 0.5 * n_z) * self.h_z
        R, Z = np.meshgrid(self.r, z, indexing="ij")
        if interior is None:
            interior = np.asarray(domain.contains(R, Z))
        inter = interior
        self.interior = inter
        self.interior_u8 = np.ascontiguousarray(inter.astype(np.uint8))

        hr2 = self.h_r**2
        hz2 = self.h_z**2
        r3 = self.r**3
        cw = np.zeros((n_r, n_z))
        ce = np.zeros((n_r, n_z))
        cs = np.zeros((n_r, n_z))
        cn = np.zeros((n_r, n_z))

        # interior faces: coupling r_face^3 / h^2, shared symmetrically
        face_r3 = ((np.arange(1, n_r) * self.h_r) ** 3)[:, None]
        pair = inter[:-1, :] & inter[1:, :]
        c = np.broadcast_to(face_r3 / hr2, pair.shape)
        ce[:-1, :][pair] = c[pair]
        cw[1:, :][pair] = c[pair]
        pair_z = inter[:, :-1] & inter[:, 1:]
        cz = np.broadcast_to(r3[:, None] / hz2, pair_z.shape)
        cn[:, :-1][pair_z] = cz[pair_z]
        cs[:, 1:][pair_z] = cz[pair_z]

        # Dirichlet faces (box edge, wall, or masked neighbor) at half-cell
        # spacing; the axis face i = 0 carries no term (r^3 flux vanishes)
        pad_w = np.vstack([np.zeros((1, n_z), bool), ~inter[:-1, :]])
        pad_e = np.vstack([~inter[1:, :], np.ones((1, n_z), bool)])
        pad_s = np.hstack([np.ones((n_r, 1), bool), ~inter[:, :-1]])
        pad_n = np.hstack([~inter[:, 1:], np.ones((n_r, 1), bool)])
        rf_w = ((self.r - 0.5 * self.h_r) ** 3)[:, None]
        rf_e = ((self.r + 0.5 * self.h_r) ** 3)[:, None]
        rc3 = r3[:, None]
        dir_terms = (np.where(pad_w, 2.0 * rf_w / hr2, 0.0)
                     + np.where(pad_e, 2.0 * rf_e / hr2, 0.0)
                     + np.where(pad_s, 2.0 * rc3 / hz2, 0.0)
                     + np.where(pad_n, 2.0 * rc3 / hz2, 0.0))

        diag = cw + ce + cs + cn + dir_terms
        diag[~inter] = 1.0
        for arr in (cw, ce, cs, cn):
            arr[~inter] = 0.0
        self.cw, self.ce, self.cs, self.cn = cw, ce, cs, cn
        self.diag = diag

    def apply(self, u: np.ndarray) -> np.ndarray:
        out = np.empty_like(u)
        backend.operator_apply(u, self.cw, self.ce, self.cs, self.cn,
                               self.diag, self.interior_u8, out)
        return out

    def smooth(self, u, rhs, sweeps, omega=1.0, reverse=False):
        colors = (1, 0) if reverse else (0, 1)
        for _ in range(sweeps):
            for color in colors:
                backend.sor_color_sweep(u, rhs, self.cw, self.ce, self.cs,
                                        self.cn, self.diag, self.interior_u8,
                                        color, omega)

    def dense_matrix(self) -> np.ndarray:
        n = self.n_r * self.n_z
        a = np.zeros((n, n))
        idx = np.arange(n).reshape(self.n_r, self.n_z)
        a[idx.ravel(), idx.ravel()] = self.diag.ravel()
        a[idx[1:, :].ravel(), idx[:-1, :].ravel()] = -self.cw[1:, :].ravel()
        a[idx[:-1, :].ravel(), idx[1:, :].ravel()] = -self.ce[:-1, :].ravel()
        a[idx[:, 1:].ravel(), idx[:, :-1].ravel()] = -self.cs[:, 1:].ravel()
        a[idx[:, :-1].ravel(), idx[:, 1:].ravel()] = -self.cn[:, :-1].ravel()
        return a


COARSE_WEIGHT = 1.8  # over-weighted aggregation correction


def _restrict(fine: np.ndarray) -> np.ndarray:
    """Aggregation restriction: quarter of the 2x2 child sum (= P^T / 4)."""
    return 0.25 * (fine[0::2, 0::2] + fine[1::2, 0::2]
                   + fine[0::2, 1::2] + fine[1::2, 1::2])


def _prolong(coarse: np.ndarray) -> np.ndarray:
    """Aggregation prolongation: replicate each coarse value to its children."""
    n_r, n_z = coarse.shape
    out = np.empty((2 * n_r, 2 * n_z))
    for di in (0, 1):
        for dj in (0, 1):
            out[di::2, dj::2] = coarse
    return out


def _galerkin_coarse(fine: _Level) -> _Level:
    """Coarse level as the exact aggregation Galerkin product (1/4) P^T A P.

    For the 5-point stencil and 2x2 aggregates this stays 5-point: crossing
    couplings average pairwise, block sums (minus internal couplings) give
    the diagonal. Exterior children contribute nothing, so the coarse
    correction is an A-orthogonal projection and the cycle cannot diverge.
    """
    lev = object.__new__(_Level)
    n_r, n_z = fine.n_r // 2, fine.n_z // 2
    lev.n_r, lev.n_z = n_r, n_z
    lev.h_r, lev.h_z = 2 * fine.h_r, 2 * fine.h_z
    lev.r = (np.arange(n_r) + 0.5) * lev.h_r

    f = fine.interior
    inter = (f[0::2, 0::2] | f[1::2, 0::2] | f[0::2, 1::2] | f[1::2, 1::2])
    lev.interior = inter
    lev.interior_u8 = np.ascontiguousarray(inter.astype(np.uint8))

    def blocks(a):
        return a[0::2, 0::2], a[1::2, 0::2], a[0::2, 1::2], a[1::2, 1::2]

    dsum = sum(blocks(np.where(f, fine.diag, 0.0)))
    # internal faces of each 2x2 aggregate (each appears in two rows)
    int_r = fine.ce[0::2, 0::2] + fine.ce[0::2, 1::2]
    int_z = fine.cn[0::2, 0::2] + fine.cn[1::2, 0::2]
    diag = 0.25 * (dsum - 2.0 * int_r - 2.0 * int_z)

    ce = np.zeros((n_r, n_z))
    cw = np.zeros((n_r, n_z))
    cn = np.zeros((n_r, n_z))
    cs = np.zeros((n_r, n_z))
    ce[:-1, :] = 0.25 * (fine.ce[1:-1:2, 0::2] + fine.ce[1:-1:2, 1::2])
    cw[1:, :] = ce[:-1, :]
    cn[:, :-1] = 0.25 * (fine.cn[0::2, 1:-1:2] + fine.cn[1::2, 1:-1:2])
    cs[:, 1:] = cn[:, :-1]

    diag[~inter] = 1.0
    for arr in (ce, cw, cn, cs):
        arr[~inter] = 0.0
    lev.cw, lev.ce, lev.cs, lev.cn = cw, ce, cs, cn
    lev.diag = diag
    return lev


class SolverContext:
    """Multigrid hierarchy for one (domain, box, resolution) combination.

    Reusable across right-hand sides; a fixed-point run builds one context
    and solves against it every iteration.
    """

    MIN_BOTTOM_CELLS = 512

    def __init__(self, grid: Grid):
        self.grid = grid
        self.levels = [_Level(grid.domain, grid.box.r_max, grid.box.z_max,
                              grid.n_r, grid.n_z)]
        n_r, n_z = grid.n_r, grid.n_z
        while (n_r % 2 == 0 and n_z % 2 == 0 and n_r >= 8 and n_z >= 8
               and n_r * n_z > self.MIN_BOTTOM_CELLS):
            n_r //= 2
            n_z //= 2
            self.levels.append(_galerkin_coarse(self.levels[-1]))
        bottom = self.levels[-1]
        self._bottom_inv = np.linalg.inv(bottom.dense_matrix())

    @property
    def fine(self) -> _Level:
        return self.levels[0]

    def _vcycle(self, k: int, b: np.ndarray, nu: int = 2) -> np.ndarray:
        """One symmetric V-cycle from a zero initial guess.

        Pre-smoothing runs red then black, post-smoothing black then red,
        and restriction is the adjoint of prolongation, so the cycle defines
        a symmetric positive definite preconditioner.
        """
        lev = self.levels[k]
        if k == len(self.levels) - 1:
            return (self._bottom_inv @ b.ravel()).reshape(b.shape)
        x = np.zeros_like(b)
        lev.smooth(x, b, nu)
        res = b - lev.apply(x)
        ec = self._vcycle(k + 1, _restrict(res), nu)
        x = x + COARSE_WEIGHT * np.where(lev.interior, _prolong(ec), 0.0)
        lev.smooth(x, b, nu, reverse=True)
        return x

    def solve_u(self, rhs: np.ndarray, tol: float = 1e-9, u0=None,
                max_iters: int = 200, method: str = "multigrid"):
        """Solve the u-form system to the given relative residual.

        Returns (u, history); history lists the relative residual per CG
        iteration (per sweep batch for SOR).
        """
        lev = self.fine
        rhs = np.where(lev.interior, rhs, 0.0)
        bnorm = float(np.linalg.norm(rhs))
        if bnorm == 0.0:
            return np.zeros_like(rhs), [0.0]
        x = np.zeros_like(rhs) if u0 is None else np.array(u0, dtype=float)
        x[~lev.interior] = 0.0
        history = []
        if method == "sor":
            omega = 2.0 / (1.0 + np.sin(np.pi / max(lev.n_r, lev.n_z)))
            for _ in range(4000):
                lev.smooth(x, rhs, 25, omega=omega)
                res = float(np.linalg.norm(rhs - lev.apply(x))) / bnorm
                history.append(res)
                if res <= tol:
                    return x, history
            raise SolverFailure(f"SOR stalled at residual {history[-1]:.3e}",
                                history[-1])
        # MG-preconditioned CG
        r = rhs - lev.apply(x)
        z = self._vcycle(0, r)
        p = z
        rz = float(np.sum(r * z))
        for _ in range(max_iters):
            ap = lev.apply(p)
            alpha = rz / float(np.sum(p * ap))
            x = x + alpha * p
            r = r - alpha * ap
            res = float(np.linalg.norm(r)) / bnorm
            history.append(res)
            if res <= tol:
                return x, history
            z = self._vcycle(0, r)
            rz_new = float(np.sum(r * z))
            p = z + (rz_new / rz) * p
            rz = rz_new
        raise SolverFailure(
            f"MG-CG did not reach tol={tol:.1e} in {max_iters} iterations "
            f"(residual {history[-1]:.3e})", history[-1])


def get_context(grid: Grid) -> SolverContext:
    if grid._solver_ctx is None:
        grid._solver_ctx = SolverContext(grid)
    return grid._solver_ctx


def solve_K(zeta: np.ndarray, grid: Grid, domain: MeridionalDomain | None = None,
            tol: float = 1e-9, x0=None, method: str = "multigrid"):
    """Invert the operator: returns psi with L psi = zeta on interior cells,
    psi = 0 on the axis, on physical walls and on truncation boundaries.

    ``zeta`` is a per-cell field. Returns (psi, residual_history). A stream
    function passed as ``x0`` warm-starts the iteration.
    """
    if domain is not None and domain is not grid.domain:
        raise ValueError("grid was built for a different domain")
    ctx = get_context(grid)
    r2 = ctx.fine.r[:, None] ** 2
    rhs = ctx.fine.r[:, None] ** 3 * np.asarray(zeta, dtype=float)
    u0 = None if x0 is None else np.asarray(x0, dtype=float) / r2
    u, history = ctx.solve_u(rhs, tol=tol, u0=u0, method=method)
    psi = np.where(grid.mask, r2 * u, 0.0)
    return psi, history


def apply_L(psi: np.ndarray, grid: Grid) -> np.ndarray:
    """Discrete stream-function operator, second order at interior cells.

    Conservative flux form with (1/r) face coefficients; faces on the axis,
    on walls and against masked cells see homogeneous Dirichlet values at
    half-cell spacing. Zero on exterior cells.
    """
    psi = np.asarray(psi, dtype=float)
    m = grid.mask
    h_r, h_z = grid.h_r, grid.h_z
    r = grid.r
    out = np.zeros(grid.shape)

    # r-direction flux differences
    face_inv = 1.0 / (np.arange(1, grid.n_r) * h_r)[:, None]
    pair = m[:-1, :] & m[1:, :]
    fr = np.where(pair, face_inv * (psi[1:, :] - psi[:-1, :]) / h_r, 0.0)
    acc = np.zeros(grid.shape)
    acc[:-1, :] -= fr
    acc[1:, :] += fr
    # Dirichlet r-faces, including the axis at i = 0
    pad_w = np.vstack([np.ones((1, grid.n_z), bool), ~m[:-1, :]])
    pad_e = np.vstack([~m[1:, :], np.ones((1, grid.n_z), bool)])
    rmid_w = (r - 0.25 * h_r)[:, None]
    rmid_e = (r + 0.25 * h_r)[:, None]
    acc += np.where(pad_w & m, 2.0 * psi / (rmid_w * h_r), 0.0)
    acc += np.where(pad_e & m, 2.0 * psi / (rmid_e * h_r), 0.0)
    out += acc / h_r

    # z-direction
    inv_r = (1.0 / r)[:, None]
    pair_z = m[:, :-1] & m[:, 1:]
    fz = np.where(pair_z, inv_r * (psi[:, 1:] - psi[:, :-1]) / h_z, 0.0)
    acc = np.zeros(grid.shape)
    acc[:, :-1] -= fz
    acc[:, 1:] += fz
    pad_s = np.hstack([np.ones((grid.n_r, 1), bool), ~m[:, :-1]])
    pad_n = np.hstack([~m[:, 1:], np.ones((grid.n_r, 1), bool)])
    acc += np.where(pad_s & m, 2.0 * psi * inv_r / h_z, 0.0)
    acc += np.where(pad_n & m, 2.0 * psi * inv_r / h_z, 0.0)
    out += acc / h_z

    return np.where(m, out * inv_r, 0.0)


def dump_field_csv(field: np.ndarray, grid: Grid, path) -> None:
    """Per-cell scalar field dump with header (i, j, r, z, value)."""
    import csv

    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["i", "j", "r", "z", "value"])
        for i in range(grid.n_r):
            for j in range(grid.n_z):
                w.writerow([i, j, repr(float(grid.r[i])), repr(float(grid.z[j])),
                            repr(float(field[i, j]))])


def dump_residual_history(history, path) -> None:
    """Linear-solver convergence history, one row per iteration."""
    import csv

    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["iteration", "relative_residual"])
        for k, res in enumerate(history):
            w.writerow([k, repr(float(res))])


def stencil_interior(grid: Grid) -> np.ndarray:
    """Cells whose full 5-point stencil lies in the interior."""
    m = grid.mask
    out = np.zeros_like(m)
    out[1:-1, 1:-1] = (m[1:-1, 1:-1] & m[:-2, 1:-1] & m[2:, 1:-1]
                       & m[1:-1, :-2] & m[1:-1, 2:])
    return out


def velocity_from_stream(psi: np.ndarray, grid: Grid):
    """v_r = -(1/r) d_z psi, v_z = (1/r) d_r psi by centered differences.

    Differentiates u = psi / r^2 (regular through the axis) rather than psi
    itself, so the first off-axis row carries no one-sided 1/r error:
    v_r = -r du/dz, v_z = 2u + r du/dr.
    """
    u = psi / grid.R**2
    du_dr, du_dz = np.gradient(u, grid.h_r, grid.h_z)
    return -grid.R * du_dz, 2.0 * u + grid.R * du_dr


def pressure_from_stream(psi: np.ndarray, lam: float, grid: Grid) -> np.ndarray:
    """Pressure from the shifted stream function: P = lam * psi_+ - |v|^2 / 2."""
    v_r, v_z = velocity_from_stream(psi, grid)
    return lam * np.maximum(psi, 0.0) - 0.5 * (v_r**2 + v_z**2)


def _bump_bank(grid: Grid):
    """Compactly supported test bumps fully inside the interior mask."""
    bank = []
    extent = min(grid.box.r_max, 2.0 * grid.box.z_max)
    fractions = (0.3, 0.5, 0.7)
    for fr in fractions:
        for fz in fractions:
            c_r = fr * grid.box.r_max
            c_z = (fz - 0.5) * 2.0 * grid.box.z_max * 0.8
            for rad in (0.12 * extent, 0.2 * extent):
                rho = np.hypot(grid.R - c_r, grid.Z - c_z)
                support = rho < rad
                if not np.any(support) or not np.all(grid.mask[support]):
                    continue
                phi = np.where(support, np.cos(0.5 * np.pi * rho / rad) ** 2, 0.0)
                dphi = np.where(support & (rho > 0),
                                -(0.5 * np.pi / rad) * np.sin(np.pi * rho / rad), 0.0)
                with np.errstate(invalid="ignore", divide="ignore"):
                    gx = np.where(rho > 0, dphi * (grid.R - c_r) / rho, 0.0)
                    gz = np.where(rho > 0, dphi * (grid.Z - c_z) / rho, 0.0)
                bank.append((phi, gx, gz))
    return bank


def _core_probe_bumps(grid: Grid, zeta: np.ndarray):
    """Extra test bumps straddling the vorticity support off-center, so the
    residual is not annihilated by the z-symmetry of converged states."""
    active = zeta != 0.0
    if not np.any(active):
        return []
    r_c = float(np.mean(grid.R[active]))
    z_c = float(np.mean(grid.Z[active]))
    pr = grid.R[active]
    pz = grid.Z[active]
    diam = max(float(pr.max() - pr.min()), float(pz.max() - pz.min()),
               4 * grid.h_r)
    bumps = []
    for dr, dz in ((0.6, 0.6), (-0.6, 0.6), (0.6, -0.6), (0.0, 0.9)):
        c_r = r_c + dr * diam
        c_z = z_c + dz * diam
        rad = 1.5 * diam
        rho = np.hypot(grid.R - c_r, grid.Z - c_z)
        support = rho < rad
        if not np.any(support) or not np.all(grid.mask[support]):
            continue
        phi = np.where(support, np.cos(0.5 * np.pi * rho / rad) ** 2, 0.0)
        dphi = np.where(support & (rho > 0),
                        -(0.5 * np.pi / rad) * np.sin(np.pi * rho / rad), 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            gx = np.where(rho > 0, dphi * (grid.R - c_r) / rho, 0.0)
            gz = np.where(rho > 0, dphi * (grid.Z - c_z) / rho, 0.0)
        bumps.append((phi, gx, gz))
    return bumps


def weak_steadiness_residual(psi_total: np.ndarray, zeta: np.ndarray,
                             grid: Grid) -> float:
    """Steadiness certificate: max over a bank of compactly supported test
    functions phi of |sum zeta (perp-grad psi . grad phi) h_r h_z|, normalized
    by the L2 norm of grad phi. Zero for an exact steady weak solution."""
    bank = _bump_bank(grid) + _core_probe_bumps(grid, np.asarray(zeta))
    if not bank:
        raise ValueError("domain too small to host any test bump")
    dpsi_dr, dpsi_dz = np.gradient(psi_total, grid.h_r, grid.h_z)
    area = grid.h_r * grid.h_z
    worst = 0.0
    for phi, gx, gz in bank:
        integrand = zeta * (dpsi_dz * gx - dpsi_dr * gz)
        val = abs(float(np.sum(integrand[grid.mask]) * area))
        norm = float(np.sqrt(np.sum((gx**2 + gz**2)[grid.mask]) * area))
        worst = max(worst, val / norm)
    return worst
