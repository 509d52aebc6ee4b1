"""Steady axisymmetric vortex rings by energy maximization over vorticity
rearrangements, with scaling diagnostics at desk scale."""

from .backend import backend_name
from .domain import (DomainKind, Grid, MeridionalDomain, TruncationBox,
                     build_grid, dist_to_circle, nu_measure, set_geometry)
from .diagnostics import (DiagnosticsRecord, RunParams, SweepResult,
                          core_energy_J, energy, fit_scalings,
                          green_bifurcation_distance, impulse,
                          kelvin_hicks_check, multiplier_identity_check,
                          r_star)
from .flow import BackgroundFlow, BackgroundMode
from .kernel import (elliptic_KE, green_leading_log, quadrature_apply_K,
                     ring_green, sigma)
from .oracles import (HillVortexSpec, brute_force_energy,
                      brute_force_quantile, hill_vortex_fields)
from .rearrange import (FixedPointState, PotentialVorticity,
                        augmented_potential, iterate_once, quantile_select,
                        solve_fixed_point, steiner_symmetrize)
from .solver import (apply_L, pressure_from_stream, solve_K,
                     velocity_from_stream, weak_steadiness_residual)

__version__ = "0.1.0"
