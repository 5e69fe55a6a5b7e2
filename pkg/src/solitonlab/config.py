"""YAML configuration documents for single runs and sweeps.

A run document is a flat mapping using exactly these keys (all but
``model``, ``f0`` and ``v0`` optional)::

    model, f0, v0, dr, dt, r_max, profile, boundary_outer, t_max,
    stop_fraction, snapshot_stride, corrector_tolerance,
    corrector_max_iters, output_dir

A sweep document replaces ``f0``/``v0`` with ``cases``, a list of
``[f0, v0]`` pairs, and may add ``workers``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import yaml

from .errors import ConfigurationError
from .models import ModelKind
from .stepper import RunConfig

RUN_KEYS = (
    "model", "f0", "v0", "dr", "dt", "r_max", "profile", "boundary_outer",
    "t_max", "stop_fraction", "snapshot_stride", "corrector_tolerance",
    "corrector_max_iters", "output_dir",
)
_NUMERIC_KEYS = {"f0", "v0", "dr", "dt", "r_max", "t_max", "stop_fraction",
                 "corrector_tolerance"}
SWEEP_KEYS = tuple(k for k in RUN_KEYS if k not in ("f0", "v0")) + ("cases", "workers")


@dataclass(frozen=True)
class RunRequest:
    """A run configuration together with where to write its outputs."""

    config: RunConfig
    output_dir: str | None = None


@dataclass(frozen=True)
class SweepSpec:
    model: ModelKind
    cases: tuple
    shared: dict = field(default_factory=dict)
    output_dir: str | None = None
    workers: int = 1

    def configs(self) -> list[RunConfig]:
        return [RunConfig(model=self.model, f0=f0, v0=v0, **self.shared)
                for f0, v0 in self.cases]


def _load(source) -> dict:
    try:
        doc = yaml.safe_load(source)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"malformed configuration: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigurationError("configuration must be a mapping of keys to values")
    for key, value in doc.items():
        if not isinstance(key, str):
            raise ConfigurationError(f"configuration key {key!r} is not a string", key=str(key))
        if key in _NUMERIC_KEYS and isinstance(value, str):
            # YAML 1.1 reads 1e-12 (no dot) as a string
            try:
                doc[key] = float(value)
            except ValueError:
                raise ConfigurationError(f"{key} must be a number, got {value!r}",
                                         key=key) from None
    return doc


def _reject_unknown(doc: dict, allowed) -> None:
    for key in doc:
        if key not in allowed:
            raise ConfigurationError(f"unknown configuration key {key!r}", key=key)


def _run_config(values: dict) -> RunConfig:
    for key in ("model", "f0", "v0"):
        if key not in values:
            raise ConfigurationError(f"missing required key {key!r}", key=key)
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None


def _check_dir(value):
    if value is not None and not isinstance(value, str):
        raise ConfigurationError("output_dir must be a string", key="output_dir")
    return value


def parse_config(source, overrides: dict | None = None) -> RunRequest | SweepSpec:
    """Parse a YAML run or sweep document; ``overrides`` win over document keys."""
    doc = _load(source)
    if overrides:
        doc.update({k: v for k, v in overrides.items() if v is not None})
    if "cases" in doc:
        _reject_unknown(doc, SWEEP_KEYS)
        cases = doc.pop("cases")
        workers = doc.pop("workers", 1)
        output_dir = _check_dir(doc.pop("output_dir", None))
        if not isinstance(cases, list) or not cases:
            raise ConfigurationError("cases must be a non-empty list of [f0, v0] pairs",
                                     key="cases")
        parsed = []
        for case in cases:
            if not isinstance(case, (list, tuple)) or len(case) != 2:
                raise ConfigurationError(f"case {case!r} is not an [f0, v0] pair", key="cases")
            parsed.append((case[0], case[1]))
        if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
            raise ConfigurationError("workers must be a positive integer", key="workers")
        if "model" not in doc:
            raise ConfigurationError("missing required key 'model'", key="model")
        model = ModelKind.parse(doc.pop("model"))
        spec = SweepSpec(model=model, cases=tuple(parsed), shared=doc,
                         output_dir=output_dir, workers=workers)
        try:
            configs = spec.configs()
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from None
        return replace(spec, cases=tuple((c.f0, c.v0) for c in configs))
    _reject_unknown(doc, RUN_KEYS)
    output_dir = _check_dir(doc.pop("output_dir", None))
    return RunRequest(config=_run_config(doc), output_dir=output_dir)


def config_to_dict(config: RunConfig, output_dir: str | None = None) -> dict:
    """Flat document for ``config``; defaults are written out explicitly."""
    doc = {
        "model": config.model.value,
        "f0": config.f0,
        "v0": config.v0,
        "dr": config.dr,
        "dt": config.dt,
        "r_max": config.r_max,
        "profile": config.profile.value,
        "boundary_outer": config.boundary_outer.value,
        "t_max": config.t_max,
        "stop_fraction": config.stop_fraction,
        "snapshot_stride": config.snapshot_stride,
        "corrector_tolerance": config.corrector_tolerance,
        "corrector_max_iters": config.corrector_max_iters,
    }
    if output_dir is not None:
        doc["output_dir"] = output_dir
    return doc


def render_config(item) -> str:
    """Serialise a RunConfig, RunRequest or SweepSpec back to YAML."""
    if isinstance(item, RunConfig):
        doc = config_to_dict(item)
    elif isinstance(item, RunRequest):
        doc = config_to_dict(item.config, item.output_dir)
    elif isinstance(item, SweepSpec):
        doc = {"model": item.model.value, **item.shared,
               "cases": [[float(f0), float(v0)] for f0, v0 in item.cases],
               "workers": item.workers}
        if item.output_dir is not None:
            doc["output_dir"] = item.output_dir
    else:
        raise TypeError(f"cannot render {type(item).__name__}")
    return yaml.safe_dump(doc, sort_keys=False)
