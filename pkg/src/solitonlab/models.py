"""Field equations, geodesic predictions and the parabolic ansatz.

Both models evolve a real radial profile ``f(r, t)``::

    yang_mills:  f_tt = L f - 8 r f_r / (f + r^2)
                        + 2 (f_t^2 - f_r^2) / (f + r^2)
    sigma2:      f_tt = L f - 8 r^3 f_r / (f^2 + r^4)
                        + 2 f (f_t^2 - f_r^2) / (f^2 + r^4)

with ``L = r**-5 d/dr r**5 d/dr``. Constant profiles are static; ``f = 0`` at
the origin is the singularity.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .errors import ConfigurationError, SingularityError
from .grid import RadialField, _check_interior, centered_d1, natural_interior, \
    natural_radial_operator, naive_interior, d1_interior


class ModelKind(enum.Enum):
    YANG_MILLS = "yang_mills"
    SIGMA2 = "sigma2"

    @classmethod
    def parse(cls, value) -> "ModelKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {
            "yang_mills": cls.YANG_MILLS, "ym": cls.YANG_MILLS,
            "yangmills": cls.YANG_MILLS, "yangmills4p1": cls.YANG_MILLS,
            "sigma2": cls.SIGMA2, "sigma": cls.SIGMA2, "sigmacharge2": cls.SIGMA2,
            "cp1": cls.SIGMA2,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ConfigurationError(f"unknown model {value!r}", key="model") from None


def _denominator(model: ModelKind, f, r):
    if model is ModelKind.YANG_MILLS:
        return f + r * r
    return f * f + r ** 4


def _nonlinear(model: ModelKind, f, f_r, f_t, r, denom):
    """Everything in the acceleration except ``L f``."""
    if model is ModelKind.YANG_MILLS:
        return (-8.0 * r * f_r + 2.0 * (f_t * f_t - f_r * f_r)) / denom
    return (-8.0 * r ** 3 * f_r + 2.0 * f * (f_t * f_t - f_r * f_r)) / denom


def rhs_acceleration(model: ModelKind, f: RadialField, f_t: RadialField, i: int) -> float:
    """Discrete ``f_tt`` at interior node ``i``.

    ``L f`` uses the natural divergence-form stencil, ``f_r`` the centred
    difference, and ``f_t`` is read directly from ``f_t``.
    """
    model = ModelKind.parse(model)
    _check_interior(f.grid, i)
    r = f.grid.r[i]
    fi = f.values[i]
    denom = _denominator(model, fi, r)
    if denom == 0.0:
        raise SingularityError(model.value, r, fi)
    f_r = centered_d1(f, i)
    return natural_radial_operator(f, i) + _nonlinear(model, fi, f_r, f_t.values[i], r, denom)


def acceleration_interior(model: ModelKind, values: np.ndarray, f_t: np.ndarray, grid,
                          natural: bool = True) -> np.ndarray:
    """Vectorised ``rhs_acceleration`` over all interior nodes.

    ``f_t`` may be given on all nodes or on interior nodes only.
    """
    model = ModelKind.parse(model)
    inner = grid.interior
    r = grid.r[inner]
    f = values[inner]
    if f_t.shape[0] == grid.n_points:
        f_t = f_t[inner]
    denom = _denominator(model, f, r)
    bad = np.flatnonzero(denom == 0.0)
    if bad.size:
        k = bad[0]
        raise SingularityError(model.value, float(r[k]), float(f[k]))
    lap = natural_interior(values, grid) if natural else naive_interior(values, grid)
    return lap + _nonlinear(model, f, d1_interior(values, grid), f_t, r, denom)


@dataclass(frozen=True)
class GeodesicPrediction:
    """Origin trajectory ``f(0, t) = a (t - T)**2`` from the effective Lagrangian."""

    a: float
    T: float

    def origin(self, t):
        return self.a * (np.asarray(t, dtype=float) - self.T) ** 2


def _check_initial(f0, v0):
    if not (math.isfinite(f0) and f0 > 0):
        raise ConfigurationError(f"f0 must be positive, got {f0}", key="f0")
    if not (math.isfinite(v0) and v0 < 0):
        raise ConfigurationError(
            f"v0 must be negative (inward motion), got {v0}", key="v0")


def geodesic_prediction(f0: float, v0: float) -> GeodesicPrediction:
    f0, v0 = float(f0), float(v0)
    _check_initial(f0, v0)
    return GeodesicPrediction(a=v0 * v0 / (4.0 * f0), T=2.0 * f0 / abs(v0))


@dataclass(frozen=True)
class ParabolicAnsatz:
    """``f(r, t) = p r**2 + a (t - T)**2`` with ``p = -v0**2/(8 f0)``."""

    f0: float
    v0: float

    def __post_init__(self):
        _check_initial(float(self.f0), float(self.v0))

    @property
    def p(self) -> float:
        return -self.v0 ** 2 / (8.0 * self.f0)

    @property
    def a(self) -> float:
        return self.v0 ** 2 / (4.0 * self.f0)

    @property
    def T(self) -> float:
        return 2.0 * self.f0 / abs(self.v0)

    def h(self, t):
        return self.a * (np.asarray(t, dtype=float) - self.T) ** 2

    def value(self, r, t):
        return self.p * np.asarray(r, dtype=float) ** 2 + self.h(t)

    def time_derivative(self, t):
        return 2.0 * self.a * (np.asarray(t, dtype=float) - self.T)


def ansatz_value(f0: float, v0: float, r, t):
    return ParabolicAnsatz(float(f0), float(v0)).value(r, t)


_RESIDUAL_DPS = 40


def _mp_second_partials(func, x, h):
    """Centred first and second differences of ``func`` at ``x`` with step ``h``."""
    fp, f0, fm = func(x + h), func(x), func(x - h)
    return (fp - fm) / (2 * h), (fp + fm - 2 * f0) / (h * h)


def _richardson(func, x, h):
    d1a, d2a = _mp_second_partials(func, x, h)
    d1b, d2b = _mp_second_partials(func, x, h / 2)
    return (4 * d1b - d1a) / 3, (4 * d2b - d2a) / 3


def ansatz_residual(model: ModelKind, f0: float, v0: float, r: float, t: float) -> float:
    """``f_tt - RHS`` evaluated on the exact parabolic ansatz at ``(r, t)``.

    Derivatives of the ansatz come from centred differences carried out in
    40-digit arithmetic and combined by Richardson extrapolation, so the
    residual is free of float64 cancellation even when it is ~1e-16 of the
    individual terms.
    """
    model = ModelKind.parse(model)
    ans = ParabolicAnsatz(float(f0), float(v0))
    with mpmath.workdps(_RESIDUAL_DPS):
        p, a, T = (mpmath.mpf(ans.p), mpmath.mpf(ans.a), mpmath.mpf(ans.T))
        r_mp, t_mp = mpmath.mpf(r), mpmath.mpf(t)

        def in_r(x):
            return p * x * x + a * (t_mp - T) ** 2

        def in_t(s):
            return p * r_mp * r_mp + a * (s - T) ** 2

        f = in_r(r_mp)
        h_r = mpmath.mpf("1e-6") * max(1, abs(r_mp))
        h_t = mpmath.mpf("1e-6") * max(1, abs(t_mp))
        f_r, f_rr = _richardson(in_r, r_mp, h_r)
        f_t, f_tt = _richardson(in_t, t_mp, h_t)
        if r_mp == 0:
            lap = 6 * f_rr  # f_r / r -> f_rr for an even profile
        else:
            lap = f_rr + 5 * f_r / r_mp
        denom = _denominator(model, f, r_mp)
        if denom == 0:
            raise SingularityError(model.value, float(r), float(f))
        rhs = lap + _nonlinear(model, f, f_r, f_t, r_mp, denom)
        return float(f_tt - rhs)
