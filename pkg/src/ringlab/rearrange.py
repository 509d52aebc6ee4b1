"""Variational core: level-set (bathtub) ascent of the kinetic energy over
the rearrangement class of scaled indicator fields.

Each step evaluates the augmented potential K(zeta) - background, selects the
super-level set of exact measure 1/lambda by a weighted quantile (fractional
weights on the threshold level set make the mass constraint exact on the
grid), optionally applies Steiner symmetrization in z, and re-solves for the
induced stream function. The energy is nondecreasing along these steps up to
solver tolerance because the quadratic form of the inverse operator is
positive semidefinite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain import W_MIN, Grid, nu_measure
from .errors import InfeasibleMassError
from .flow import BackgroundFlow
from .solver import solve_K


@dataclass(frozen=True)
class PotentialVorticity:
    """Scaled indicator field zeta = lambda * weights, weights in [0, 1]."""

    lam: float
    weights: np.ndarray

    def field(self) -> np.ndarray:
        return self.lam * self.weights

    def mass(self, grid: Grid) -> float:
        return self.lam * nu_measure(grid, self.weights)


@dataclass
class FixedPointState:
    zeta: PotentialVorticity
    psi_induced: np.ndarray
    mu: float
    energy_history: list = field(default_factory=list)
    support_mask: np.ndarray | None = None  # restriction region, None = all of D


def augmented_potential(psi_induced: np.ndarray, background: BackgroundFlow,
                        grid: Grid, lam: float,
                        support_mask: np.ndarray | None = None) -> np.ndarray:
    """Phi = K zeta - background potential; -inf outside the allowed region."""
    phi = psi_induced - background.potential(grid, lam)
    if support_mask is not None:
        phi = np.where(support_mask, phi, -np.inf)
    return phi


def quantile_select(phi: np.ndarray, grid: Grid, lam: float):
    """Bathtub step: weights 1 above the threshold, fractional on it.

    mu is the largest threshold whose closed super-level set holds measure
    at least 1/lambda; threshold cells share the remaining mass
    proportionally so that lambda * nu(support) = 1 exactly.
    """
    target = 1.0 / lam
    feasible = grid.mask & np.isfinite(phi)
    phi_f = phi[feasible]
    nu_f = grid.nu[feasible]
    if float(np.sum(nu_f)) < target:
        raise InfeasibleMassError(
            f"requested core measure 1/lambda = {target:.3g} exceeds the "
            f"available measure {float(np.sum(nu_f)):.3g}")
    order = np.argsort(phi_f, kind="stable")[::-1]
    cum = np.cumsum(nu_f[order])
    k = int(np.searchsorted(cum, target, side="left"))
    mu = float(phi_f[order[k]])
    above = phi_f > mu
    tie = phi_f == mu
    mass_above = float(np.sum(nu_f[above]))
    tie_mass = float(np.sum(nu_f[tie]))
    frac = (target - mass_above) / tie_mass
    w_f = np.where(above, 1.0, np.where(tie, frac, 0.0))
    weights = np.zeros(grid.shape)
    weights[feasible] = w_f
    return weights, mu


def steiner_symmetrize(weights: np.ndarray, grid: Grid) -> np.ndarray:
    """Column-wise symmetric-decreasing rearrangement about z = 0.

    Within each r-column the weights are permuted so the largest sit nearest
    the midplane, alternating sides outward. Mass per column is preserved
    exactly since this is a permutation.
    """
    out = np.zeros_like(np.asarray(weights, dtype=float))
    absz = np.abs(grid.z)
    for i in range(grid.n_r):
        cols = np.nonzero(grid.mask[i])[0]
        if cols.size == 0:
            continue
        # positions ordered center-out, negative side first on ties
        pos = cols[np.lexsort((grid.z[cols], absz[cols]))]
        vals = np.sort(weights[i, cols])[::-1]
        out[i, pos] = vals
    return out


def iterate_once(state: FixedPointState, background: BackgroundFlow,
                 grid: Grid, symmetrize: bool = True,
                 linear_tol: float = 1e-9) -> FixedPointState:
    """One bathtub ascent step; energy is appended to the history."""
    from .diagnostics import energy  # local import to keep modules acyclic

    lam = state.zeta.lam
    phi = augmented_potential(state.psi_induced, background, grid, lam,
                              state.support_mask)
    if symmetrize:
        # restrict to the z-symmetric class: averaging removes solver-level
        # asymmetry so ties split identically on both sides of the midplane
        phi = 0.5 * (phi + phi[:, ::-1])
    weights, mu = quantile_select(phi, grid, lam)
    if symmetrize:
        weights = steiner_symmetrize(weights, grid)
    zeta = PotentialVorticity(lam, weights)
    psi, _ = solve_K(zeta.field(), grid, tol=linear_tol, x0=state.psi_induced)
    e = energy(zeta.field(), psi, background, grid, lam)
    return FixedPointState(zeta=zeta, psi_induced=psi, mu=mu,
                           energy_history=state.energy_history + [e],
                           support_mask=state.support_mask)


def _initial_weights(params, grid: Grid, support_mask):
    from .diagnostics import r_star

    if params.init == "random":
        rng = np.random.default_rng(params.seed)
        phi0 = rng.random(grid.shape)
    else:
        r_g = params.r_init
        if r_g is None:
            try:
                r_g = r_star(grid.domain, params.W, params.mode)
            except Exception:
                r_g = 0.5 * grid.box.r_max
        phi0 = -((grid.R - r_g) ** 2 + grid.Z**2)
    if support_mask is not None:
        phi0 = np.where(support_mask, phi0, -np.inf)
    weights, _ = quantile_select(phi0, grid, params.lam)
    return weights


def support_region(params, grid: Grid) -> np.ndarray | None:
    """Restriction region for the exterior-ball runs (the class with zeta
    vanishing outside a fixed box around the expected ring)."""
    from .diagnostics import r_star

    if params.support_scale is None:
        return None
    s_r, s_z = params.support_scale
    rs = r_star(grid.domain, params.W, params.mode)
    return grid.mask & (grid.R < s_r * rs) & (np.abs(grid.Z) < s_z * rs)


def _dump_checkpoint(weights: np.ndarray, it: int, directory) -> None:
    import csv
    from pathlib import Path

    path = Path(directory) / f"weights_{it:04d}.csv"
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["i", "j", "weight"])
        for i, j in zip(*np.nonzero(weights > W_MIN)):
            w.writerow([int(i), int(j), repr(float(weights[i, j]))])


def solve_fixed_point(params, checkpoint_dir=None):
    """Run the ascent to a fixed point and measure the converged ring.

    Returns (state, record); ``record.converged`` reports whether both the
    support and the energy stabilized within the configured tolerances.
    ``checkpoint_dir`` optionally dumps the weights per iteration as CSV.
    """
    from .diagnostics import measure_record, validate_box

    params = params.normalized()
    validate_box(params)
    grid = params.make_grid()
    background = BackgroundFlow(params.mode, params.W)
    support_mask = support_region(params, grid)

    weights = _initial_weights(params, grid, support_mask)
    zeta = PotentialVorticity(params.lam, weights)
    psi, _ = solve_K(zeta.field(), grid, tol=params.linear_tol)
    from .diagnostics import energy

    e0 = energy(zeta.field(), psi, background, grid, params.lam)
    state = FixedPointState(zeta=zeta, psi_induced=psi, mu=float("nan"),
                            energy_history=[e0], support_mask=support_mask)

    if checkpoint_dir is not None:
        _dump_checkpoint(weights, 0, checkpoint_dir)
    converged = False
    supp_diffs = []
    iterations = 0
    for iterations in range(1, params.max_iters + 1):
        prev = state
        state = iterate_once(prev, background, grid,
                             symmetrize=params.symmetrize,
                             linear_tol=params.linear_tol)
        if checkpoint_dir is not None:
            _dump_checkpoint(state.zeta.weights, iterations, checkpoint_dir)
        supp_prev = prev.zeta.weights > W_MIN
        supp_new = state.zeta.weights > W_MIN
        supp_diff = nu_measure(grid, supp_prev ^ supp_new)
        supp_diffs.append(supp_diff)
        e_new, e_old = state.energy_history[-1], state.energy_history[-2]
        de = abs(e_new - e_old) / max(abs(e_new), 1e-300)
        if supp_diff < params.tol_support and de < params.tol_energy:
            converged = True
            break

    record = measure_record(state, background, grid, params,
                            iterations=iterations, converged=converged,
                            last_support_diffs=supp_diffs[-2:])
    return state, record
