"""Iterated leapfrog evolution of the radial field.

Each step predicts ``F = 2 f(t) - f(t - dt)`` and then repeatedly re-solves
the centred second time difference for ``F``, with ``f_t`` taken as the
centred difference ``(F - f(t - dt)) / (2 dt)`` of the current guess.
The right-hand side depends on ``F`` only through ``f_t``, so the corrector
is a scalar fixed-point iteration per node.

The hot loop is compiled with numba; ``step`` and ``run`` are thin wrappers.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numba
import numpy as np

from .errors import ConfigurationError, SingularityError
from .grid import RadialGrid, make_grid, natural_weights
from .models import ModelKind, geodesic_prediction

log = logging.getLogger(__name__)

DEFAULT_DR = 0.025
DEFAULT_DT = 0.001
DEFAULT_R_MAX = 10.0
DEFAULT_STOP_FRACTION = 0.05
DEFAULT_SNAPSHOT_STRIDE = 100
DEFAULT_CORRECTOR_TOLERANCE = 1e-12
DEFAULT_CORRECTOR_MAX_ITERS = 8
T_MAX_FACTOR = 1.2


class Profile(enum.Enum):
    LINE = "line"
    PARABOLA = "parabola"


class OuterBoundary(enum.Enum):
    MATCH_LINE = "match_line"
    MATCH_PARABOLA = "match_parabola"


_PROFILE_BOUNDARY = {Profile.LINE: OuterBoundary.MATCH_LINE,
                     Profile.PARABOLA: OuterBoundary.MATCH_PARABOLA}


class Termination(enum.Enum):
    REACHED_STOP_FRACTION = "reached_stop_fraction"
    REACHED_T_MAX = "reached_t_max"
    BLOW_UP = "blow_up"
    NUMERICAL_INSTABILITY = "numerical_instability"


def _parse_enum(enum_cls, value, key):
    if isinstance(value, enum_cls):
        return value
    try:
        return enum_cls(str(value).strip().lower())
    except ValueError:
        choices = ", ".join(m.value for m in enum_cls)
        raise ConfigurationError(
            f"{key} must be one of {choices}, got {value!r}", key=key) from None


@dataclass(frozen=True)
class RunConfig:
    """Complete description of one evolution.

    ``corrector_tolerance=None`` selects exactly ``corrector_max_iters``
    corrector passes per step; otherwise passes stop once the largest
    nodal change is at most the tolerance. ``t_max=None`` means
    ``1.2 * T`` of the geodesic prediction and is only allowed for v0 < 0.
    ``naive_operator`` swaps in the unstable centred-difference Laplacian
    and exists for regression checks only.
    """

    model: ModelKind
    f0: float
    v0: float
    dr: float = DEFAULT_DR
    dt: float = DEFAULT_DT
    r_max: float = DEFAULT_R_MAX
    profile: Profile = Profile.LINE
    boundary_outer: OuterBoundary | None = None
    t_max: float | None = None
    stop_fraction: float = DEFAULT_STOP_FRACTION
    snapshot_stride: int = DEFAULT_SNAPSHOT_STRIDE
    corrector_tolerance: float | None = DEFAULT_CORRECTOR_TOLERANCE
    corrector_max_iters: int = DEFAULT_CORRECTOR_MAX_ITERS
    naive_operator: bool = False

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "model", ModelKind.parse(self.model))
        set_(self, "profile", _parse_enum(Profile, self.profile, "profile"))
        expected = _PROFILE_BOUNDARY[self.profile]
        if self.boundary_outer is None:
            set_(self, "boundary_outer", expected)
        else:
            set_(self, "boundary_outer",
                 _parse_enum(OuterBoundary, self.boundary_outer, "boundary_outer"))
            if self.boundary_outer is not expected:
                raise ConfigurationError(
                    f"profile {self.profile.value} requires boundary_outer "
                    f"{expected.value}", key="boundary_outer")
        for key in ("f0", "v0", "dr", "dt", "r_max", "stop_fraction"):
            value = getattr(self, key)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigurationError(f"{key} must be a number, got {value!r}", key=key)
            set_(self, key, float(value))
            if not math.isfinite(getattr(self, key)):
                raise ConfigurationError(f"{key} must be finite", key=key)
        if self.f0 <= 0:
            raise ConfigurationError(f"f0 must be positive, got {self.f0}", key="f0")
        if self.v0 > 0:
            raise ConfigurationError(
                f"v0 must be <= 0 (inward motion or rest), got {self.v0}", key="v0")
        if self.dt <= 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}", key="dt")
        if self.dt > self.dr:
            raise ConfigurationError(
                f"dt={self.dt} exceeds dr={self.dr} (causality)", key="dt")
        make_grid(self.r_max, self.dr)  # commensurability
        if self.t_max is None:
            if self.v0 == 0:
                raise ConfigurationError("t_max is required when v0 = 0", key="t_max")
        else:
            if isinstance(self.t_max, bool) or not isinstance(self.t_max, (int, float)) \
                    or not math.isfinite(self.t_max) or self.t_max <= 0:
                raise ConfigurationError(
                    f"t_max must be a positive number, got {self.t_max!r}", key="t_max")
            set_(self, "t_max", float(self.t_max))
        if not 0.0 < self.stop_fraction < 1.0:
            raise ConfigurationError("stop_fraction must lie in (0, 1)", key="stop_fraction")
        if isinstance(self.snapshot_stride, bool) or int(self.snapshot_stride) != self.snapshot_stride \
                or self.snapshot_stride < 1:
            raise ConfigurationError("snapshot_stride must be a positive integer",
                                     key="snapshot_stride")
        set_(self, "snapshot_stride", int(self.snapshot_stride))
        if self.corrector_tolerance is not None:
            if not isinstance(self.corrector_tolerance, (int, float)) \
                    or isinstance(self.corrector_tolerance, bool) \
                    or not self.corrector_tolerance > 0:
                raise ConfigurationError("corrector_tolerance must be positive or null",
                                         key="corrector_tolerance")
            set_(self, "corrector_tolerance", float(self.corrector_tolerance))
        if isinstance(self.corrector_max_iters, bool) \
                or int(self.corrector_max_iters) != self.corrector_max_iters \
                or self.corrector_max_iters < 1:
            raise ConfigurationError("corrector_max_iters must be a positive integer",
                                     key="corrector_max_iters")
        set_(self, "corrector_max_iters", int(self.corrector_max_iters))

    @property
    def effective_t_max(self) -> float:
        if self.t_max is not None:
            return self.t_max
        return T_MAX_FACTOR * geodesic_prediction(self.f0, self.v0).T

    def grid(self) -> RadialGrid:
        return make_grid(self.r_max, self.dr)

    def with_(self, **changes) -> "RunConfig":
        return replace(self, **changes)


@dataclass
class SimulationState:
    f_prev: np.ndarray
    f_curr: np.ndarray
    grid: RadialGrid
    step_index: int = 0
    dt: float = DEFAULT_DT
    corrector_passes: int = 0

    @property
    def t(self) -> float:
        return self.step_index * self.dt


@dataclass
class RunRecord:
    config: RunConfig
    origin_t: np.ndarray
    origin_f: np.ndarray
    snapshot_t: np.ndarray
    snapshots: np.ndarray
    termination: Termination
    r: np.ndarray = field(repr=False)
    slices: dict = field(default_factory=dict, repr=False)
    message: str = ""

    @property
    def origin_trace(self):
        return np.column_stack([self.origin_t, self.origin_f])

    @property
    def final_time(self) -> float:
        return float(self.origin_t[-1])


# Model and boundary codes for the compiled kernel.
_YM, _SIGMA = 0, 1
_BC_LINE, _BC_PARABOLA = 0, 1
_OK, _SINGULAR, _NONFINITE, _STOPPED = 0, 1, 2, 3


@numba.njit(cache=True)
def _apply_boundaries(F, bc, ratio):
    n = F.shape[0]
    F[0] = F[1] + (F[1] - F[2]) / 3.0  # = (4 F1 - F2)/3, exact on constants
    if bc == _BC_LINE:
        F[n - 1] = F[n - 2]
    else:
        F[n - 1] = F[n - 2] + (F[n - 2] - F[n - 3]) * ratio


@numba.njit(cache=True)
def _step_kernel(fp, fc, F, r, w_out, w_in, dr, dt, model, natural, bc,
                 ratio, tol, max_iter):
    """Advance one level into ``F``. Returns (status, bad_node, passes)."""
    n = fc.shape[0]
    if model == _YM and fc[0] <= 0.0:
        return _SINGULAR, 0, 0
    for i in range(n):
        F[i] = 2.0 * fc[i] - fp[i]
    inv2dr = 0.5 / dr
    inv2dt = 0.5 / dt
    dt2 = dt * dt
    # Split the acceleration into a part fixed by f(t) and a coefficient of f_t^2.
    base = np.empty(n)
    coef = np.empty(n)
    for i in range(1, n - 1):
        f = fc[i]
        ri = r[i]
        f_r = (fc[i + 1] - fc[i - 1]) * inv2dr
        if natural:
            lap = w_out[i - 1] * (fc[i + 1] - f) - w_in[i - 1] * (f - fc[i - 1])
        else:
            lap = (fc[i + 1] + fc[i - 1] - 2.0 * f) / (dr * dr) + 5.0 * f_r / ri
        if model == _YM:
            denom = f + ri * ri
            if denom <= 0.0:
                return _SINGULAR, i, 0
            base[i] = lap + (-8.0 * ri * f_r - 2.0 * f_r * f_r) / denom
            coef[i] = 2.0 / denom
        else:
            denom = f * f + ri ** 4
            if denom == 0.0:
                return _SINGULAR, i, 0
            base[i] = lap + (-8.0 * ri ** 3 * f_r - 2.0 * f * f_r * f_r) / denom
            coef[i] = 2.0 * f / denom
        base[i] = 2.0 * f - fp[i] + dt2 * base[i]
    passes = 0
    while passes < max_iter:
        passes += 1
        change = 0.0
        for i in range(1, n - 1):
            f_t = (F[i] - fp[i]) * inv2dt
            new = base[i] + dt2 * coef[i] * f_t * f_t
            d = abs(new - F[i])
            if d > change or d != d:
                change = d
            F[i] = new
        old0 = F[0]
        oldn = F[n - 1]
        _apply_boundaries(F, bc, ratio)
        change = max(change, abs(F[0] - old0), abs(F[n - 1] - oldn))
        if tol > 0.0 and change <= tol:
            break
    for i in range(n):
        if not np.isfinite(F[i]):
            return _NONFINITE, i, passes
    return _OK, -1, passes


@numba.njit(cache=True)
def _advance(fp, fc, scratch, r, w_out, w_in, dr, dt, model, natural, bc, ratio,
             tol, max_iter, n_steps, stop_level, origin_out):
    """Take up to ``n_steps`` steps, rotating the three level buffers in place.

    Returns (status, steps_taken, bad_node). On return ``fc`` holds the newest
    level and ``fp`` the one before.
    """
    for k in range(n_steps):
        status, bad, _ = _step_kernel(fp, fc, scratch, r, w_out, w_in, dr, dt, model,
                                      natural, bc, ratio, tol, max_iter)
        if status != _OK:
            return status, k, bad
        for i in range(fc.shape[0]):
            fp[i] = fc[i]
            fc[i] = scratch[i]
        origin_out[k] = fc[0]
        if fc[0] <= stop_level:
            return _STOPPED, k + 1, -1
    return _OK, n_steps, -1


class _Kernel:
    """Precomputed grid data and kernel arguments for one config."""

    def __init__(self, config: RunConfig, grid: RadialGrid | None = None):
        self.config = config
        self.grid = grid or config.grid()
        w_out, w_in = natural_weights(self.grid)
        self.r = np.ascontiguousarray(self.grid.r)
        self.w_out = np.ascontiguousarray(w_out)
        self.w_in = np.ascontiguousarray(w_in)
        self.model = _YM if config.model is ModelKind.YANG_MILLS else _SIGMA
        self.bc = _BC_LINE if config.boundary_outer is OuterBoundary.MATCH_LINE \
            else _BC_PARABOLA
        r_max = self.grid.r[-1]
        self.ratio = r_max / (r_max - self.grid.dr)
        self.tol = -1.0 if config.corrector_tolerance is None else config.corrector_tolerance

    def args(self):
        c = self.config
        return (self.r, self.w_out, self.w_in, c.dr, c.dt, self.model,
                not c.naive_operator, self.bc, self.ratio, self.tol,
                c.corrector_max_iters)


def initial_profile(config: RunConfig, r: np.ndarray) -> np.ndarray:
    if config.profile is Profile.LINE:
        return np.full_like(r, config.f0)
    p = -config.v0 ** 2 / (8.0 * config.f0)
    return p * r ** 2 + config.f0


def init_state(config: RunConfig) -> SimulationState:
    """Initial profile at t = 0 plus a synthetic earlier level ``f - v0*dt``.

    The predictor ``2 f - f_prev`` then reproduces the first-step guess
    ``f(r, dt) = f(r, 0) + v0*dt``.
    """
    grid = config.grid()
    f_curr = initial_profile(config, grid.r)
    f_prev = f_curr - config.v0 * config.dt
    return SimulationState(f_prev=f_prev, f_curr=f_curr, grid=grid, dt=config.dt)


def apply_boundaries(values: np.ndarray, boundary_outer, dr: float) -> np.ndarray:
    """Return a copy of ``values`` with both end nodes rewritten.

    The origin uses the even extrapolation ``(4 f[1] - f[2]) / 3``. The outer
    node copies its neighbour (line mode) or extends the neighbouring slope
    scaled by ``R / (R - dr)`` (parabola mode).
    """
    boundary_outer = _parse_enum(OuterBoundary, boundary_outer, "boundary_outer")
    out = np.array(values, dtype=np.float64)
    if out.shape[0] < 4:
        raise ConfigurationError("boundary conditions need at least 4 nodes")
    r_max = (out.shape[0] - 1) * dr
    bc = _BC_LINE if boundary_outer is OuterBoundary.MATCH_LINE else _BC_PARABOLA
    _apply_boundaries(out, bc, r_max / (r_max - dr))
    return out


class NumericalInstabilityError(ArithmeticError):
    pass


def step(state: SimulationState, config: RunConfig) -> SimulationState:
    """One predictor-corrector step; returns a new state.

    Raises SingularityError when a model denominator vanishes and
    NumericalInstabilityError on non-finite output.
    """
    kernel = _Kernel(config, state.grid)
    fp = np.ascontiguousarray(state.f_prev, dtype=np.float64)
    fc = np.ascontiguousarray(state.f_curr, dtype=np.float64)
    F = np.empty_like(fc)
    status, bad, passes = _step_kernel(fp, fc, F, *kernel.args())
    if status == _SINGULAR:
        raise SingularityError(config.model.value, float(state.grid.r[bad]), float(fc[bad]))
    if status == _NONFINITE:
        raise NumericalInstabilityError(f"non-finite value at node {bad}")
    return SimulationState(f_prev=fc.copy(), f_curr=F, grid=state.grid,
                           step_index=state.step_index + 1, dt=state.dt,
                           corrector_passes=passes)


def run(config: RunConfig, slice_times=None, initial: SimulationState | None = None) -> RunRecord:
    """Evolve from t = 0 until the origin falls to ``stop_fraction * f0``,
    ``t_max`` is reached, or the field breaks down.

    The origin value is recorded every step (including t = 0) and the whole
    profile every ``snapshot_stride`` steps. ``slice_times`` requests extra
    profiles at the nearest step to each time; they land in ``record.slices``.
    ``initial`` replaces the configured initial data (its step index is
    ignored; time starts at 0). Errors become termination statuses; whatever
    was accumulated is returned.
    """
    kernel = _Kernel(config)
    state = initial if initial is not None else init_state(config)
    if state.f_curr.shape != kernel.r.shape or state.f_prev.shape != kernel.r.shape:
        raise ConfigurationError("initial state does not match the configured grid")
    fp = np.array(state.f_prev, dtype=np.float64)
    fc = np.array(state.f_curr, dtype=np.float64)
    scratch = np.empty_like(fc)
    dt = config.dt
    n_total = int(math.floor(config.effective_t_max / dt + 1e-9))
    stride = config.snapshot_stride
    stop_level = config.stop_fraction * config.f0 if config.v0 < 0 else -np.inf

    wanted = {}
    for t in slice_times or ():
        k = int(round(float(t) / dt))
        if 0 <= k <= n_total:
            wanted.setdefault(k, []).append(float(t))
    breakpoints = sorted(set(range(stride, n_total + 1, stride)) | set(wanted) | {n_total})
    breakpoints = [b for b in breakpoints if b > 0]

    origin = np.empty(n_total + 1)
    origin[0] = fc[0]
    snap_t = [0.0]
    snaps = [fc.copy()]
    slices = {}
    for t in wanted.get(0, ()):
        slices[t] = fc.copy()

    done = 0
    termination = Termination.REACHED_T_MAX
    message = ""
    args = kernel.args()
    for target in breakpoints:
        if target <= done:
            continue
        status, taken, bad = _advance(fp, fc, scratch, *args, target - done, stop_level,
                                      origin[done + 1:target + 1])
        done += taken
        if status == _STOPPED:
            termination = Termination.REACHED_STOP_FRACTION
        elif status == _SINGULAR:
            termination = Termination.BLOW_UP
            message = f"denominator vanished at r={kernel.r[bad]:.6g}, t={(done + 1) * dt:.6g}"
        elif status == _NONFINITE:
            termination = Termination.NUMERICAL_INSTABILITY
            message = f"non-finite value at node {bad}, t={(done + 1) * dt:.6g}"
        if status in (_OK, _STOPPED) and done == target:
            if done % stride == 0:
                snap_t.append(round(done * dt, 12))
                snaps.append(fc.copy())
            for t in wanted.get(done, ()):
                slices[t] = fc.copy()
        if status != _OK:
            break
    if message:
        log.warning("run %s f0=%g v0=%g stopped: %s", config.model.value, config.f0,
                    config.v0, message)
    return RunRecord(
        config=config,
        origin_t=np.round(np.arange(done + 1) * dt, 12),
        origin_f=origin[:done + 1].copy(),
        snapshot_t=np.array(snap_t),
        snapshots=np.array(snaps),
        termination=termination,
        r=kernel.r.copy(),
        slices=slices,
        message=message,
    )
