"""Landau levels and pointwise Weyl densities for constant coefficients."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

LEVEL_COUNT_GUARD = 10**6


@dataclass(frozen=True)
class ModelScalars:
    mu: float
    h: float
    f: float = 1.0
    V: float = 1.0
    sqrt_g: float = 1.0
    tau: float = 0.0

    def __post_init__(self):
        vals = (self.mu, self.h, self.f, self.V, self.sqrt_g, self.tau)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidInputError("model scalars must be finite")
        if self.mu <= 0 or self.f <= 0 or self.sqrt_g <= 0:
            raise InvalidInputError("mu, f and sqrt_g must be positive")
        if not 0 < self.h <= 1:
            raise InvalidInputError(f"h must lie in (0, 1], got {self.h}")
        if self.mu * self.h > 1.0 + 1e-12:
            raise InvalidInputError(f"mu*h must not exceed 1, got {self.mu * self.h}")

    @property
    def gap(self) -> float:
        """Spacing mu*h*f of the levels (2n+1)*mu*h*f."""
        return self.mu * self.h * self.f

    @property
    def energy(self) -> float:
        return self.V + 2.0 * self.tau


def landau_levels(s: ModelScalars, n_max: int) -> np.ndarray:
    if n_max < 0:
        raise InvalidInputError("n_max must be nonnegative")
    n = np.arange(n_max + 1, dtype=float)
    return 0.5 * ((2.0 * n + 1.0) * s.gap - s.V)


def count_levels(energy: float, gap: float) -> int:
    """#{n >= 0 : (2n+1)*gap <= energy}; a level exactly at threshold counts."""
    if energy < gap:
        return 0
    n = int(math.floor((energy / gap - 1.0) / 2.0)) + 1
    # the closed form can be off by one in rounding; settle it on the raw condition
    while n > 0 and (2 * n - 1) * gap > energy:
        n -= 1
    while (2 * n + 1) * gap <= energy:
        n += 1
    if n > LEVEL_COUNT_GUARD:
        raise InvalidInputError(f"level count {n} exceeds guard {LEVEL_COUNT_GUARD}")
    return n


def level_count(s: ModelScalars) -> int:
    return count_levels(s.energy, s.gap)


def magnetic_weyl_density(s: ModelScalars) -> float:
    n = level_count(s)
    return n * s.mu * s.f * s.sqrt_g / (2.0 * math.pi * s.h)


def weyl_density_diag(s: ModelScalars) -> float:
    """(2 pi h)^-2 times the area of the ellipse {g(xi) <= V + 2 tau}."""
    e = s.energy
    if e <= 0:
        return 0.0
    return e * s.sqrt_g / (4.0 * math.pi * s.h * s.h)
