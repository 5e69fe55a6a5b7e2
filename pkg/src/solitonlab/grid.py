"""Uniform radial grid and finite-difference stencils.

Node ``i`` sits at ``r_i = i * dr`` on ``[0, r_max]``. Stencils are defined on
interior nodes ``1 .. n-2`` only; the two end nodes belong to the boundary
conditions.

The radial part of both wave operators is ``f'' + 5 f'/r``, i.e.
``r**-5 d/dr (r**5 d/dr)``. It is discretised in divergence form with the
weights ``(r +- dr/2)**5`` taken at half nodes. Plain centred differencing of
``f''`` and ``5 f'/r`` separately is kept available (``naive_radial_operator``)
only so the instability it causes near the origin can be demonstrated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, StencilError

RADIAL_POWER = 5
_COMMENSURATE_RTOL = 1e-9


@dataclass(frozen=True)
class RadialGrid:
    r_max: float
    dr: float
    n_points: int
    r: np.ndarray = field(repr=False, compare=False)

    @property
    def interior(self) -> slice:
        return slice(1, self.n_points - 1)


def make_grid(r_max: float, dr: float) -> RadialGrid:
    """Build the grid ``r_i = i * dr``, ``i = 0 .. round(r_max/dr)``.

    Raises ConfigurationError unless both lengths are positive and ``r_max``
    is an integer multiple of ``dr`` (relative tolerance 1e-9).
    """
    r_max = float(r_max)
    dr = float(dr)
    if not (np.isfinite(dr) and dr > 0):
        raise ConfigurationError(f"dr must be positive, got {dr}", key="dr")
    if not (np.isfinite(r_max) and r_max > 0):
        raise ConfigurationError(f"r_max must be positive, got {r_max}", key="r_max")
    ratio = r_max / dr
    cells = round(ratio)
    if cells < 1 or abs(ratio - cells) > _COMMENSURATE_RTOL * ratio:
        raise ConfigurationError(
            f"r_max/dr = {ratio!r} is not an integer", key="dr")
    r = np.arange(cells + 1, dtype=np.float64) * dr
    r.flags.writeable = False
    return RadialGrid(r_max=r_max, dr=dr, n_points=cells + 1, r=r)


@dataclass(frozen=True)
class RadialField:
    """Values of ``f`` at every node of ``grid`` at one time level."""

    values: np.ndarray
    grid: RadialGrid

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (self.grid.n_points,):
            raise ConfigurationError(
                f"field has shape {values.shape}, grid has {self.grid.n_points} nodes")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: RadialGrid, func) -> "RadialField":
        return cls(np.asarray(func(grid.r), dtype=np.float64), grid)


def _check_interior(grid: RadialGrid, i: int) -> None:
    if not 1 <= i <= grid.n_points - 2:
        raise StencilError(
            f"node {i} is outside the interior 1..{grid.n_points - 2}")


def centered_d1(field: RadialField, i: int) -> float:
    """Centred first difference ``(f[i+1] - f[i-1]) / (2 dr)``."""
    _check_interior(field.grid, i)
    f = field.values
    return (f[i + 1] - f[i - 1]) / (2.0 * field.grid.dr)


def centered_d2(field: RadialField, i: int) -> float:
    """Centred second difference ``(f[i+1] + f[i-1] - 2 f[i]) / dr**2``."""
    _check_interior(field.grid, i)
    f = field.values
    return (f[i + 1] + f[i - 1] - 2.0 * f[i]) / field.grid.dr ** 2


def natural_radial_operator(field: RadialField, i: int) -> float:
    """Divergence-form difference of ``r**-5 d/dr (r**5 df/dr)`` at node ``i``."""
    _check_interior(field.grid, i)
    f = field.values
    d = field.grid.dr
    r = field.grid.r[i]
    flux_out = (r + 0.5 * d) ** RADIAL_POWER * (f[i + 1] - f[i]) / d
    flux_in = (r - 0.5 * d) ** RADIAL_POWER * (f[i] - f[i - 1]) / d
    return (flux_out - flux_in) / d / r ** RADIAL_POWER


def natural_weights(grid: RadialGrid) -> tuple[np.ndarray, np.ndarray]:
    """Interior weights ``(w_out, w_in)`` with ``L f = w_out*(f[i+1]-f[i]) - w_in*(f[i]-f[i-1])``."""
    r = grid.r[grid.interior]
    d = grid.dr
    w_out = ((r + 0.5 * d) / r) ** RADIAL_POWER / d ** 2
    w_in = ((r - 0.5 * d) / r) ** RADIAL_POWER / d ** 2
    return w_out, w_in


def d1_interior(values: np.ndarray, grid: RadialGrid) -> np.ndarray:
    return (values[2:] - values[:-2]) / (2.0 * grid.dr)


def d2_interior(values: np.ndarray, grid: RadialGrid) -> np.ndarray:
    return (values[2:] + values[:-2] - 2.0 * values[1:-1]) / grid.dr ** 2


def natural_interior(values: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """``natural_radial_operator`` evaluated on all interior nodes at once."""
    w_out, w_in = natural_weights(grid)
    return w_out * (values[2:] - values[1:-1]) - w_in * (values[1:-1] - values[:-2])


def naive_interior(values: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """``f'' + 5 f'/r`` from separate centred differences (unstable at the origin)."""
    r = grid.r[grid.interior]
    return d2_interior(values, grid) + RADIAL_POWER * d1_interior(values, grid) / r
