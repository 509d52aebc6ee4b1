"""Background stream potentials subtracted from the induced field.

The augmented potential maximized by the vortex patch is K(zeta) minus one of
these potentials. The scaled modes multiply W by log(lambda) so the travel
speed grows with vortex strength; the exterior-ball mode adds the image term
that makes the sphere a streamline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .domain import DomainKind, Grid


class BackgroundMode(Enum):
    SCALED_UNIFORM = "scaled_uniform"
    FIXED_UNIFORM = "fixed_uniform"
    NONE = "none"
    EXTERIOR_BALL_SCALED = "exterior_ball_scaled"


@dataclass(frozen=True)
class BackgroundFlow:
    mode: BackgroundMode
    W: float = 0.0

    def __post_init__(self):
        if self.W < 0:
            raise ValueError("background speed parameter W must be >= 0")

    def coefficient(self, lam: float) -> float:
        """Effective uniform-stream speed for the given vortex strength."""
        if self.mode is BackgroundMode.NONE:
            return 0.0
        if self.mode is BackgroundMode.FIXED_UNIFORM:
            return self.W
        return self.W * math.log(lam)

    def potential(self, grid: Grid, lam: float) -> np.ndarray:
        """Per-cell background potential; zero in mode NONE."""
        c = self.coefficient(lam)
        if c == 0.0:
            return np.zeros(grid.shape)
        base = 0.5 * c * grid.R**2
        if self.mode is BackgroundMode.EXTERIOR_BALL_SCALED:
            if grid.domain.kind is not DomainKind.EXTERIOR_BALL:
                raise ValueError("exterior-ball background needs an exterior-ball domain")
            d3 = grid.domain.d**3
            rho3 = (grid.R**2 + grid.Z**2) ** 1.5
            return base - 0.5 * c * grid.R**2 * d3 / rho3
        return base

    def pairing(self, zeta: np.ndarray, grid: Grid, lam: float) -> float:
        """Energy pairing term: integral of the potential against zeta d(nu)."""
        if self.mode is BackgroundMode.NONE:
            return 0.0
        return float(np.sum(self.potential(grid, lam) * zeta * grid.nu))

    def far_speed(self, lam: float) -> float:
        """Magnitude of the expected downstream velocity far from the core."""
        return self.coefficient(lam)
