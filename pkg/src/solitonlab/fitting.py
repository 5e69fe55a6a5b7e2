"""Least-squares descriptors of simulated profiles and their predicted laws.

* origin trace  ->  ``a (t - T)**2``          (fit_origin_parabola)
* time slice    ->  ``r**2/A**2 + (f - k)**2/B**2 = 1``  (fit_ellipse)
* time slice    ->  ``p r**2 + h``            (fit_profile_parabola)
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import FitFailureError, InsufficientDataError, SolitonLabError
from .models import ParabolicAnsatz, ansatz_residual, geodesic_prediction
from .stepper import Profile, RunRecord

DEFAULT_ORIGIN_THRESHOLD = 0.5
BUMP_THRESHOLD = 1e-3
MAX_GAUSS_NEWTON_ITERS = 100
MAX_AXIS_TO_HEIGHT = 100.0
ELLIPSE_EDGE_FRACTION = 0.9


class NonConvexTraceError(FitFailureError):
    """The fitted origin parabola opens downward."""


@dataclass(frozen=True)
class ParabolaFit:
    a: float
    T: float
    rms_residual: float
    n_points: int
    vertex_offset: float = 0.0  # |c0 - a T^2| / (a T^2)


@dataclass(frozen=True)
class EllipseFit:
    a_axis: float
    b_axis: float
    k_center: float
    rms_residual: float
    iterations: int = 0
    n_points: int = 0

    def curve(self, r):
        r = np.asarray(r, dtype=float)
        inside = np.clip(1.0 - (r / self.a_axis) ** 2, 0.0, None)
        return self.k_center + self.b_axis * np.sqrt(inside)


@dataclass(frozen=True)
class ProfileParabolaFit:
    p: float
    h: float
    rms_residual: float
    n_points: int = 0

    def curve(self, r):
        return self.p * np.asarray(r, dtype=float) ** 2 + self.h


def _trace_columns(trace):
    arr = np.asarray(trace, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InsufficientDataError("origin trace must be an (N, 2) array of (t, f)")
    return arr[:, 0], arr[:, 1]


def fit_origin_parabola(trace, f0: float, threshold: float = DEFAULT_ORIGIN_THRESHOLD) -> ParabolaFit:
    """Ordinary least squares ``f = c2 t^2 + c1 t + c0`` on points with ``f <= threshold*f0``.

    Returns ``a = c2`` and ``T = -c1/(2 c2)``. The constant term is left free;
    its mismatch with ``a T^2`` is reported as ``vertex_offset``.
    """
    t, f = _trace_columns(trace)
    mask = np.isfinite(t) & np.isfinite(f) & (f <= threshold * f0)
    if mask.sum() < 3:
        raise InsufficientDataError(
            f"only {int(mask.sum())} origin samples below {threshold} f0")
    t, f = t[mask], f[mask]
    # centre and scale time for conditioning
    t_mid = 0.5 * (t.min() + t.max())
    t_half = max(0.5 * (t.max() - t.min()), np.finfo(float).tiny)
    s = (t - t_mid) / t_half
    design = np.column_stack([s * s, s, np.ones_like(s)])
    (A, B, C), *_ = np.linalg.lstsq(design, f, rcond=None)
    if not A > 0:
        raise NonConvexTraceError(f"origin trace is not convex (leading coefficient {A:.3g})")
    a = A / t_half ** 2
    T = t_mid - B * t_half / (2.0 * A)
    vertex_value = C - B * B / (4.0 * A)
    resid = design @ np.array([A, B, C]) - f
    return ParabolaFit(
        a=float(a), T=float(T),
        rms_residual=float(np.sqrt(np.mean(resid ** 2))),
        n_points=int(t.size),
        vertex_offset=float(abs(vertex_value) / (a * T * T)),
    )


def bump_region(values, baseline: float) -> int:
    """Number of leading nodes that make up the bump at the origin.

    Nodes count while ``|f - baseline|`` exceeds ``BUMP_THRESHOLD`` times the
    largest deviation on the slice. The region is then cut at its steepest
    node: the ellipse ends at a vertical tangent, and what lies beyond it is
    the slowly decaying far-field tail, not part of the bump.
    """
    values = np.asarray(values, dtype=float)
    dev = np.abs(values - baseline)
    height = dev.max() if dev.size else 0.0
    if not height > BUMP_THRESHOLD * abs(baseline):
        raise InsufficientDataError("slice has no bump above the baseline")
    outside = np.flatnonzero(dev <= BUMP_THRESHOLD * height)
    n = int(outside[0]) if outside.size else int(dev.size)
    if n < 3:
        return n
    slope = np.abs(np.diff(values[:n]))
    return int(np.argmax(slope)) + 2


def _ellipse_residual(x, y, params):
    a, b, k = params
    return (x / a) ** 2 + ((y - k) / b) ** 2 - 1.0


def _ellipse_jacobian(x, y, params):
    a, b, k = params
    return np.column_stack([
        -2.0 * x * x / a ** 3,
        -2.0 * (y - k) ** 2 / b ** 3,
        -2.0 * (y - k) / b ** 2,
    ])


def fit_ellipse(slice_values, baseline: float, dr: float) -> EllipseFit:
    """Fit ``r^2/a^2 + (f-k)^2/b^2 = 1`` to the bump at the origin.

    Gauss-Newton on the algebraic residual, with step halving whenever a full
    step fails to reduce the sum of squares. Starts from the bump's extent,
    its height above ``baseline`` and ``k = baseline``.
    """
    values = np.asarray(slice_values, dtype=float)
    n = bump_region(values, baseline)
    if n < 3:
        raise InsufficientDataError(f"bump spans only {n} nodes")
    x = np.arange(n) * dr
    y = values[:n]
    params = np.array([max(x[-1], dr), abs(y[0] - baseline), float(baseline)])
    res = _ellipse_residual(x, y, params)
    sse = float(res @ res)
    for it in range(1, MAX_GAUSS_NEWTON_ITERS + 1):
        J = _ellipse_jacobian(x, y, params)
        delta, *_ = np.linalg.lstsq(J, -res, rcond=None)
        lam = 1.0
        while True:
            trial = params + lam * delta
            if trial[0] > 0 and trial[1] > 0:
                trial_res = _ellipse_residual(x, y, trial)
                trial_sse = float(trial_res @ trial_res)
                if trial_sse <= sse:
                    break
            lam *= 0.5
            if lam < 1e-12:
                raise FitFailureError("ellipse fit stalled", last=tuple(params))
        step_size = np.max(np.abs(lam * delta) / np.maximum(np.abs(trial), 1e-300))
        params, res, sse = trial, trial_res, trial_sse
        if step_size < 1e-12 or sse == 0.0:
            break
    else:
        raise FitFailureError(
            f"ellipse fit did not converge in {MAX_GAUSS_NEWTON_ITERS} iterations",
            last=tuple(params))
    a, b, k = (float(v) for v in params)
    height = float(np.ptp(y))
    if b > MAX_AXIS_TO_HEIGHT * height:
        # a huge ellipse fits an almost straight arc: the bump edge is off the grid
        raise FitFailureError(f"ellipse fit degenerated (b_axis={b:.3g}, bump height "
                              f"{height:.3g})", last=(a, b, k))
    return EllipseFit(a_axis=a, b_axis=b, k_center=k,
                      rms_residual=math.sqrt(sse / n), iterations=it, n_points=n)


def fit_profile_parabola(slice_values, dr: float, r_window: float | None = None) -> ProfileParabolaFit:
    """Least squares of ``f`` against ``(r^2, 1)`` on nodes with ``r <= r_window``.

    The window defaults to half the slice's radial extent.
    """
    values = np.asarray(slice_values, dtype=float)
    r = np.arange(values.size) * dr
    if r_window is None:
        r_window = 0.5 * r[-1]
    mask = r <= r_window + 1e-9 * dr
    if mask.sum() < 3:
        raise InsufficientDataError(f"window r <= {r_window} holds {int(mask.sum())} nodes")
    design = np.column_stack([r[mask] ** 2, np.ones(int(mask.sum()))])
    (p, h), *_ = np.linalg.lstsq(design, values[mask], rcond=None)
    resid = design @ np.array([p, h]) - values[mask]
    return ProfileParabolaFit(p=float(p), h=float(h),
                              rms_residual=float(np.sqrt(np.mean(resid ** 2))),
                              n_points=int(mask.sum()))


def predicted_ellipse(f0: float, v0: float, t: float) -> tuple[float, float, float]:
    """Predicted ``(a_axis, b_axis, k_center) = (t, v0^2 t^2/(4 f0), f0 + v0 t)``."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    return float(t), v0 * v0 * t * t / (4.0 * f0), f0 + v0 * t


def _rel(fit, pred):
    return abs(fit - pred) / abs(pred)


@dataclass
class ComparisonReport:
    """Fits of one run against the geodesic and ansatz predictions.

    Components that could not be computed are ``None`` and their reason is
    recorded in ``absent``.
    """

    model: str
    f0: float
    v0: float
    termination: str
    origin_fit: ParabolaFit | None = None
    a_pred: float | None = None
    T_pred: float | None = None
    rel_err_a: float | None = None
    rel_err_T: float | None = None
    slice_fits: list = field(default_factory=list)
    residual_samples: list = field(default_factory=list)
    absent: dict = field(default_factory=dict)

    @property
    def no_fit(self) -> bool:
        return self.origin_fit is None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["no_fit"] = self.no_fit
        return out


def _slice_fit(record: RunRecord, t: float, values: np.ndarray) -> dict:
    cfg = record.config
    if cfg.profile is Profile.LINE:
        fit = fit_ellipse(values, float(values[-1]), cfg.dr)
        a_p, b_p, k_p = predicted_ellipse(cfg.f0, cfg.v0, t)
        return {"t": t, "kind": "ellipse", "a_axis": fit.a_axis, "b_axis": fit.b_axis,
                "k_center": fit.k_center, "rms_residual": fit.rms_residual,
                "a_axis_pred": a_p, "b_axis_pred": b_p, "k_center_pred": k_p}
    fit = fit_profile_parabola(values, cfg.dr)
    ans = ParabolicAnsatz(cfg.f0, cfg.v0)
    return {"t": t, "kind": "parabola", "p": fit.p, "h": fit.h,
            "rms_residual": fit.rms_residual, "p_pred": ans.p, "h_pred": float(ans.h(t))}


def compare_run(record: RunRecord, threshold: float = DEFAULT_ORIGIN_THRESHOLD,
                max_slices: int = 8) -> ComparisonReport:
    """Fit the origin trace and a few snapshots of ``record`` and compare with predictions."""
    cfg = record.config
    report = ComparisonReport(model=cfg.model.value, f0=cfg.f0, v0=cfg.v0,
                              termination=record.termination.value)
    if cfg.v0 >= 0:
        for key in ("origin_fit", "slice_fits", "residual_samples"):
            report.absent[key] = "stationary run (v0 = 0): nothing to fit"
        return report
    pred = geodesic_prediction(cfg.f0, cfg.v0)
    report.a_pred, report.T_pred = pred.a, pred.T
    try:
        fit = fit_origin_parabola(record.origin_trace, cfg.f0, threshold)
    except SolitonLabError as exc:
        report.absent["origin_fit"] = str(exc)
    else:
        report.origin_fit = fit
        report.rel_err_a = _rel(fit.a, pred.a)
        report.rel_err_T = _rel(fit.T, pred.T)

    positive = np.flatnonzero(record.snapshot_t > 0)
    if cfg.profile is Profile.LINE:
        # the predicted bump edge sits at r = t; past the grid there is no ellipse to fit
        t_edge = ELLIPSE_EDGE_FRACTION * cfg.r_max
        late = record.snapshot_t[positive] > t_edge
        if late.any():
            report.absent["late_slices"] = (f"{int(late.sum())} snapshots after t = {t_edge:g}: "
                                            "bump edge beyond the grid")
        positive = positive[~late]
    if positive.size:
        pick = positive[np.unique(np.linspace(0, positive.size - 1,
                                              min(max_slices, positive.size)).astype(int))]
        for idx in pick:
            t = float(record.snapshot_t[idx])
            try:
                report.slice_fits.append(_slice_fit(record, t, record.snapshots[idx]))
            except SolitonLabError as exc:
                report.slice_fits.append({"t": t, "absent": str(exc)})
    else:
        report.absent["slice_fits"] = "no snapshots after t = 0"

    r_hi = min(5.0, cfg.r_max)
    for frac in (0.2, 0.5, 0.8):
        for r in (0.0, 0.5 * r_hi, r_hi):
            t = frac * pred.T
            try:
                res = ansatz_residual(cfg.model, cfg.f0, cfg.v0, r, t)
            except SolitonLabError as exc:
                report.residual_samples.append({"r": r, "t": t, "absent": str(exc)})
            else:
                report.residual_samples.append({"r": r, "t": t, "residual": res})
    return report
