import numpy as np
import pytest

from ringlab import (DomainKind, HillVortexSpec, MeridionalDomain,
                     TruncationBox, apply_L, brute_force_energy,
                     brute_force_quantile, build_grid, hill_vortex_fields,
                     quantile_select, ring_green, solve_K)
from ringlab.errors import DomainError
from ringlab.kernel import self_cell_coefficient
from ringlab.oracles import manufactured_stream
from ringlab.solver import stencil_interior, velocity_from_stream


def test_hill_self_consistency():
    # the oracle must pass L psi = zeta before it is used to validate solve_K
    dom = MeridionalDomain(DomainKind.HALF_PLANE)
    errs = []
    for n in (96, 192):
        g = build_grid(dom, TruncationBox(3.0, 3.0), n, n)
        zeta, psi = hill_vortex_fields(HillVortexSpec(1.0, 1.0), g)
        rho = np.hypot(g.R, g.Z)
        away = stencil_interior(g) & (np.abs(rho - 1.0) > 0.15) & (rho < 2.5)
        errs.append(np.abs(apply_L(psi, g) - zeta)[away].max())
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.35)


def test_hill_far_field_speed():
    dom = MeridionalDomain(DomainKind.HALF_PLANE)
    g = build_grid(dom, TruncationBox(9.0, 9.0), 256, 256)
    _, psi = hill_vortex_fields(HillVortexSpec(1.0, 1.0), g)
    v_r, v_z = velocity_from_stream(psi, g)
    rho = np.hypot(g.R, g.Z)
    far = g.mask & (np.abs(rho - 7.5) < 0.2)
    speed = np.hypot(v_r, v_z)[far]
    assert np.abs(speed - 1.0).max() < 0.05


def test_hill_stream_vanishes_on_sphere():
    dom = MeridionalDomain(DomainKind.HALF_PLANE)
    vals = []
    for n in (64, 128):
        g = build_grid(dom, TruncationBox(2.0, 2.0), n, n)
        _, psi = hill_vortex_fields(HillVortexSpec(1.0, 1.0), g)
        rho = np.hypot(g.R, g.Z)
        shell = np.abs(rho - 1.0) < g.h_r
        vals.append(np.abs(psi[shell]).max())
    assert vals[1] < vals[0]  # O(h) boundary sampling
    assert vals[1] < 0.05


def test_hill_requires_containing_box():
    dom = MeridionalDomain(DomainKind.HALF_PLANE)
    g = build_grid(dom, TruncationBox(0.5, 0.5), 32, 32)
    with pytest.raises(DomainError):
        hill_vortex_fields(HillVortexSpec(1.0, 1.0), g)


def test_brute_energy_zero_and_two_cells(halfplane_grid):
    assert brute_force_energy(np.zeros(halfplane_grid.shape), halfplane_grid) == 0.0
    g = halfplane_grid
    zeta = np.zeros(g.shape)
    zeta[20, 20] = 2.0
    zeta[40, 45] = 3.0
    q1 = 2.0 * g.nu[20, 20]
    q2 = 3.0 * g.nu[40, 45]
    x1 = (g.r[20], g.z[20])
    x2 = (g.r[40], g.z[45])
    cross = q1 * q2 * ring_green(x1, x2)
    self1 = q1 * 2.0 * self_cell_coefficient(g.r[20], g.h_r, g.h_z)
    self2 = q2 * 3.0 * self_cell_coefficient(g.r[40], g.h_r, g.h_z)
    expected = 0.5 * (2 * cross + self1 + self2)
    assert brute_force_energy(zeta, g) == pytest.approx(expected, rel=1e-12)


def test_brute_energy_vs_solver_route():
    dom = MeridionalDomain(DomainKind.HALF_PLANE)
    g = build_grid(dom, TruncationBox(2.0, 2.0), 256, 256)
    rng = np.random.default_rng(5)
    patch = np.hypot(g.R - 1.0, g.Z) < 0.15
    zeta = np.where(patch, rng.random(g.shape), 0.0)
    psi, _ = solve_K(zeta, g, tol=1e-11)
    e_solver = 0.5 * float(np.sum(zeta * psi * g.nu))
    e_brute = brute_force_energy(zeta, g)
    # the boxed inverse subtracts a nonnegative harmonic part, so the
    # free-space double sum bounds the solver energy from above; the gap is
    # at most half the squared mass times the kernel at the box boundary
    mass = float(np.sum(zeta * g.nu))
    gap = 0.5 * mass**2 * ring_green((1.0, 0.0), (g.box.r_max, 0.0))
    assert e_solver <= e_brute + 1e-12
    assert e_brute - e_solver <= 1.2 * gap + 0.01 * e_brute


def test_brute_quantile_bitwise(rect_grid, rng):
    for _ in range(10):
        phi = np.where(rect_grid.mask, rng.standard_normal(rect_grid.shape), -np.inf)
        w1, m1 = quantile_select(phi, rect_grid, 13.0)
        w2, m2 = brute_force_quantile(phi, rect_grid, 13.0)
        assert m1 == m2
        assert np.array_equal(w1, w2)


def test_brute_quantile_heavy_ties(rect_grid, rng):
    phi = np.where(rect_grid.mask,
                   np.round(rng.random(rect_grid.shape) * 8) / 8.0, -np.inf)
    w1, m1 = quantile_select(phi, rect_grid, 4.0)
    w2, m2 = brute_force_quantile(phi, rect_grid, 4.0)
    assert m1 == m2
    assert np.array_equal(w1, w2)
    tie = rect_grid.mask & (phi == m1)
    fr = w1[tie]
    assert np.all(fr == fr[0]) and 0 < fr[0] < 1  # proportional tie split


def test_quantile_near_full_domain(rect_grid):
    total = float(np.sum(rect_grid.nu))
    lam = 1.0 / total * 1.02  # requested mass just under the whole domain
    phi = np.where(rect_grid.mask, rect_grid.Z, -np.inf)
    w1, m1 = quantile_select(phi, rect_grid, lam)
    w2, m2 = brute_force_quantile(phi, rect_grid, lam)
    assert np.array_equal(w1, w2)
    assert np.mean(w1[rect_grid.mask] == 1.0) > 0.9


def test_manufactured_stream_rejects_boundary_overlap(rect_grid):
    with pytest.raises(DomainError):
        manufactured_stream(rect_grid, (0.9, 0.0), 0.4)
