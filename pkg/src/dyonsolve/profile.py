"""Gridded six-field profiles shared by the shooting, fixed-point and oracle paths."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatch, InterpolationOutOfRange, InvalidGrid

FIELDS = ("f", "rho", "A", "B", "h", "sigma")
INDEX = {name: i for i, name in enumerate(FIELDS)}

# leading power of each field at the origin (f and h approach 1 like r^2)
ORIGIN_EXPONENT = {"f": 2.0, "rho": None, "A": 1.0, "B": 1.0, "h": 2.0, "sigma": 1.0}


def make_grid(r_start, r_max, n):
    """Geometric grid, i.e. uniform in log r."""
    if n < 3:
        raise InvalidGrid(f"grid needs at least 3 points, got {n}")
    if not 0 < r_start < r_max:
        raise InvalidGrid(f"need 0 < r_start < r_max, got {r_start}, {r_max}")
    return np.geomspace(r_start, r_max, n)


@dataclass
class FieldProfile:
    grid: np.ndarray
    values: np.ndarray  # (6, n)
    derivs: np.ndarray  # (6, n)
    shoot_params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.ascontiguousarray(self.grid, dtype=float)
        self.values = np.ascontiguousarray(self.values, dtype=float)
        self.derivs = np.ascontiguousarray(self.derivs, dtype=float)
        n = self.grid.size
        if self.values.shape != (6, n) or self.derivs.shape != (6, n):
            raise GridMismatch(
                f"values/derivs must have shape (6, {n}); got {self.values.shape}, {self.derivs.shape}"
            )
        if n < 2 or np.any(np.diff(self.grid) <= 0):
            raise InvalidGrid("grid must be strictly increasing with at least 2 points")

    def __getitem__(self, name):
        return self.values[INDEX[name]]

    def deriv(self, name):
        return self.derivs[INDEX[name]]

    @property
    def r_start(self):
        return float(self.grid[0])

    @property
    def r_max(self):
        return float(self.grid[-1])

    def copy(self):
        return FieldProfile(
            self.grid.copy(), self.values.copy(), self.derivs.copy(), dict(self.shoot_params)
        )

    def with_field(self, name, values, derivs):
        out = self.copy()
        out.values[INDEX[name]] = values
        out.derivs[INDEX[name]] = derivs
        return out

    def evaluate(self, r):
        """Interpolated values of all six fields at radii ``r`` -> array (6, m).

        Cubic Hermite on the stored values and derivatives; below the first
        node each field is continued with its origin power law.
        """
        from ._kernels import frozen_many

        r = np.atleast_1d(np.asarray(r, dtype=float))
        if np.any(r > self.grid[-1] * (1 + 1e-12)):
            raise InterpolationOutOfRange(
                f"radius {r.max()!r} beyond profile grid end {self.grid[-1]!r}"
            )
        return frozen_many(r, self.grid, self.values, self.derivs)

    @classmethod
    def constant(cls, grid, **levels):
        """Profile with each field held at a constant level (derivatives zero)."""
        grid = np.asarray(grid, dtype=float)
        vals = np.zeros((6, grid.size))
        for name, level in levels.items():
            vals[INDEX[name]] = level
        return cls(grid, vals, np.zeros_like(vals))


def check_same_grid(*profiles):
    g0 = profiles[0].grid
    for p in profiles[1:]:
        if p.grid.shape != g0.shape or not np.array_equal(p.grid, g0):
            raise GridMismatch("profiles are not sampled on the same grid")
