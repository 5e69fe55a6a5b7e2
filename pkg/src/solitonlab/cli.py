"""Command-line entry points: ``run``, ``sweep`` and ``slices``.

Output layout under the output directory::

    manifest.json         config echo, termination, fitted vs predicted values
    timing.json           wall-clock seconds (kept apart so manifests are reproducible)
    origin.csv            t,f0_t
    slices/t_<time>.csv   r,f[,f_ellipse,f_parabola,f_ellipse_pred,f_parabola_pred]
    slices/index.csv      t,file,status
    table.csv             sweep only: one row per case

Exit codes: 0 success, 1 configuration error, 2 numerical failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunRequest, SweepSpec, config_to_dict, parse_config
from .errors import ConfigurationError, SolitonLabError
from .fitting import compare_run, fit_ellipse, fit_profile_parabola, predicted_ellipse
from .models import ParabolicAnsatz
from .stepper import Profile, RunConfig, RunRecord, Termination, run

log = logging.getLogger("solitonlab")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3
TABLE_COLUMNS = ("f0", "v0", "a_fit", "T_fit", "a_pred", "T_pred",
                 "rel_err_a", "rel_err_T", "status")


def fmt(x) -> str:
    """Round-trip float formatting (17 significant digits); blank for missing."""
    if x is None:
        return ""
    return format(float(x), ".17g")


def _finite_or_none(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _clean(obj):
    """Replace non-finite floats by None so JSON output stays strict."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return _finite_or_none(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def build_manifest(record: RunRecord) -> dict:
    report = compare_run(record)
    fit = report.origin_fit
    return _clean({
        "tool": "solitonlab",
        "version": __version__,
        "config": config_to_dict(record.config),
        "termination": record.termination.value,
        "termination_message": record.message,
        "final_time": record.final_time,
        "steps": len(record.origin_t) - 1,
        "no_fit": report.no_fit,
        "fit": None if fit is None else {
            "a": fit.a, "T": fit.T, "rms_residual": fit.rms_residual,
            "n_points": fit.n_points, "vertex_offset": fit.vertex_offset},
        "predicted": None if report.a_pred is None else {"a": report.a_pred, "T": report.T_pred},
        "rel_err": None if fit is None else {"a": report.rel_err_a, "T": report.rel_err_T},
        "slice_fits": report.slice_fits,
        "ansatz_residuals": report.residual_samples,
        "absent": report.absent,
    })


def write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, allow_nan=False) + "\n")


def write_run_outputs(record: RunRecord, out: Path, wall_seconds: float) -> dict:
    manifest = build_manifest(record)
    write_json(out / "manifest.json", manifest)
    write_json(out / "timing.json", {"wall_clock_seconds": wall_seconds})
    write_csv(out / "origin.csv", ("t", "f0_t"), zip(record.origin_t, record.origin_f))
    return manifest


def slice_filename(t: float) -> str:
    return f"t_{float(t):g}.csv"


def _slice_columns(config: RunConfig, t: float, r, values):
    """Fitted and predicted overlays for one slice; failed fits give NaN columns."""
    cols = {}
    nan = np.full_like(r, np.nan)
    try:
        ell = fit_ellipse(values, float(values[-1]), config.dr)
        cols["f_ellipse"] = ell.curve(r)
    except SolitonLabError:
        cols["f_ellipse"] = nan
    try:
        cols["f_parabola"] = fit_profile_parabola(values, config.dr).curve(r)
    except SolitonLabError:
        cols["f_parabola"] = nan
    if config.v0 < 0 and t > 0:
        a, b, k = predicted_ellipse(config.f0, config.v0, t)
        cols["f_ellipse_pred"] = k + b * np.sqrt(np.clip(1 - (r / a) ** 2, 0, None))
        cols["f_parabola_pred"] = ParabolicAnsatz(config.f0, config.v0).value(r, t)
    else:
        cols["f_ellipse_pred"] = nan
        cols["f_parabola_pred"] = nan
    return cols


def write_slices(record: RunRecord, times, out: Path, analyze: bool) -> int:
    """Write one CSV per requested time plus ``index.csv``; returns the number written."""
    slice_dir = out / "slices"
    index_rows = []
    written = 0
    for t in times:
        t = float(t)
        values = record.slices.get(t)
        name = slice_filename(t)
        if values is None:
            index_rows.append((t, name, "absent"))
            continue
        r = record.r
        header = ["r", "f"]
        columns = [r, values]
        if analyze:
            extra = _slice_columns(record.config, t, r, values)
            header += list(extra)
            columns += list(extra.values())
        write_csv(slice_dir / name, header, zip(*columns))
        index_rows.append((t, name, "present"))
        written += 1
    write_csv(slice_dir / "index.csv", ("t", "file", "status"), index_rows)
    return written


def _exit_for(record: RunRecord) -> int:
    return EXIT_NUMERIC if record.termination is Termination.NUMERICAL_INSTABILITY else EXIT_OK


def cmd_run(request: RunRequest, out: Path | None = None) -> int:
    out = Path(out or request.output_dir or "out")
    start = time.perf_counter()
    record = run(request.config)
    wall = time.perf_counter() - start
    manifest = write_run_outputs(record, out, wall)
    log.info("run finished: %s at t=%.6g; fit=%s", record.termination.value,
             record.final_time, manifest["fit"])
    return _exit_for(record)


def cmd_slices(request: RunRequest, times, out: Path | None = None, analyze: bool = False) -> int:
    out = Path(out or request.output_dir or "out")
    config = request.config
    t_end = config.effective_t_max
    for t in times:
        if not 0 <= t <= t_end:
            raise ConfigurationError(f"slice time {t} outside [0, {t_end}]", key="times")
    start = time.perf_counter()
    record = run(config, slice_times=times)
    write_run_outputs(record, out, time.perf_counter() - start)
    write_slices(record, times, out, analyze)
    return _exit_for(record)


def _case_dir(index: int, config: RunConfig) -> str:
    return f"case_{index:02d}_f0_{config.f0:g}_v0_{config.v0:g}"


def _run_case(job):
    index, config, out = job
    start = time.perf_counter()
    try:
        record = run(config)
        manifest = write_run_outputs(record, Path(out) / _case_dir(index, config),
                                     time.perf_counter() - start)
    except Exception as exc:  # one case must not sink the sweep
        return index, None, f"error: {exc}"
    return index, manifest, manifest["termination"]


def _table_row(config: RunConfig, manifest, status):
    a_pred = config.v0 ** 2 / (4 * config.f0) if config.v0 < 0 else None
    T_pred = 2 * config.f0 / abs(config.v0) if config.v0 < 0 else None
    fit = manifest.get("fit") if manifest else None
    rel = manifest.get("rel_err") if manifest else None
    if manifest is not None and fit is None:
        status = f"{status}; no fit"
    return (config.f0, config.v0,
            fit["a"] if fit else None, fit["T"] if fit else None,
            a_pred, T_pred,
            rel["a"] if rel else None, rel["T"] if rel else None,
            status)


def cmd_sweep(spec: SweepSpec, out: Path | None = None, workers: int | None = None) -> int:
    out = Path(out or spec.output_dir or "out")
    configs = spec.configs()
    if not configs:
        raise ConfigurationError("sweep has no cases", key="cases")
    workers = workers or spec.workers
    jobs = [(i, c, str(out)) for i, c in enumerate(configs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_case, jobs))
    else:
        results = [_run_case(job) for job in jobs]
    results.sort(key=lambda item: item[0])
    rows = [_table_row(configs[i], manifest, status) for i, manifest, status in results]
    write_csv(out / "table.csv", TABLE_COLUMNS, rows)
    failed = sum(1 for _, manifest, status in results
                 if manifest is None or manifest["fit"] is None
                 or status == Termination.NUMERICAL_INSTABILITY.value)
    log.info("sweep finished: %d/%d cases fitted", len(results) - failed, len(results))
    return EXIT_NUMERIC if failed == len(results) else EXIT_OK


_OVERRIDES = {"f0": "f0", "v0": "v0", "dr": "dr", "dt": "dt", "rmax": "r_max",
              "model": "model", "profile": "profile", "tmax": "t_max"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="solitonlab",
        description="Evolve radial Yang-Mills / sigma-model solitons toward blow-up "
                    "and compare with geodesic predictions.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML configuration document")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--f0", type=float)
        p.add_argument("--v0", type=float)
        p.add_argument("--dr", type=float)
        p.add_argument("--dt", type=float)
        p.add_argument("--rmax", type=float)
        p.add_argument("--model")
        p.add_argument("--profile")
        p.add_argument("--tmax", type=float)

    common(sub.add_parser("run", help="single run"))
    p_sweep = sub.add_parser("sweep", help="run every case of a sweep document")
    common(p_sweep)
    p_sweep.add_argument("--workers", type=int)
    p_slices = sub.add_parser("slices", help="write profile slices at given times")
    common(p_slices)
    p_slices.add_argument("--times", type=float, nargs="+", required=True)
    p_slices.add_argument("--analyze", action="store_true",
                          help="add fitted and predicted ellipse/parabola columns")
    return parser


def _read_source(path: str | None) -> str:
    if path is None:
        return "{}"
    return Path(path).read_text()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    overrides = {key: getattr(args, flag) for flag, key in _OVERRIDES.items()}
    try:
        source = _read_source(args.config)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        parsed = parse_config(source, overrides)
        if args.command == "sweep":
            if not isinstance(parsed, SweepSpec):
                raise ConfigurationError("sweep needs a document with 'cases'", key="cases")
            return cmd_sweep(parsed, args.out, args.workers)
        if not isinstance(parsed, RunRequest):
            raise ConfigurationError(f"{args.command} needs a single-run document", key="cases")
        if args.command == "run":
            return cmd_run(parsed, args.out)
        return cmd_slices(parsed, args.times, args.out, args.analyze)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
