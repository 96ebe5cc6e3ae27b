"""TOML run configurations.

A configuration file describes exactly one run::

    [kernel]
    name = "smoluchowski"          # see kernels.KERNELS
    # beta = 0.3333333333333333    # optional overrides of the growth constants
    # k = 4.0
    [kernel.params]                # keyword arguments of the kernel factory

    [truncation]
    n = 1000.0
    theta = 1                      # 1 conservative, 0 non-conservative

    [grid]
    min = 1e-4
    max = 1e3
    cells = 400

    [initial]
    kind = "exponential"           # exponential | constant | tabulated
    amplitude = 1.0
    rate = 1.0
    # path = "g_in.csv"            # tabulated: two columns, relative to this file

    [time]
    T = 1.0
    dt = 1e-3                      # omit for the automatic fixed step
    method = "rk4"                 # rk4 | bs23
    snapshots = 10                 # count of equal intervals, list of times, or omit for every step

    [diagnostics]
    enabled = true
    q = 5.0
    lam = 2.0

    [study]
    n = [10.0, 100.0, 1000.0]

Unknown keys are rejected so that typos do not silently fall back to
defaults.
"""
from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError, SmoluchowskiError
from .grid import Density, constant_density, exponential_density, read_density_csv
from .kernels import Kernel, TruncationParams, from_name
from .solver import RunConfig

__all__ = ["RunSpec", "DiagnosticsSpec", "load_config", "parse_config", "config_hash"]

_SECTIONS = {
    "kernel": {"name", "beta", "k", "params"},
    "truncation": {"n", "theta"},
    "grid": {"min", "max", "cells"},
    "initial": {"kind", "amplitude", "rate", "value", "path"},
    "time": {"T", "dt", "method", "rtol", "snapshots", "dt_min", "dt_safety"},
    "diagnostics": {"enabled", "q", "lam", "weak_form", "bounds"},
    "study": {"n"},
}
_REQUIRED = ("kernel", "truncation", "grid", "initial", "time")


@dataclass(frozen=True)
class DiagnosticsSpec:
    enabled: bool = True
    q: float = 5.0
    lam: float = 2.0
    weak_form: bool = True
    bounds: bool = True


@dataclass(frozen=True)
class RunSpec:
    """A parsed configuration: the solver config plus everything around it."""

    run: RunConfig
    diagnostics: DiagnosticsSpec
    study_n: tuple[float, ...] = ()
    raw: dict = field(default_factory=dict, repr=False)
    source: Path | None = None

    @property
    def hash(self) -> str:
        raw = self.raw
        init = raw.get("initial", {})
        if init.get("kind") == "tabulated" and self.source is not None:
            # a tabulated density is part of the configuration
            p = Path(init["path"])
            p = p if p.is_absolute() else self.source.parent / p
            raw = {**raw, "_table_sha256": hashlib.sha256(p.read_bytes()).hexdigest()}
        return config_hash(raw)

    def with_truncation(self, n: float, theta: int) -> "RunSpec":
        raw = copy.deepcopy(self.raw)
        raw["truncation"] = {"n": float(n), "theta": int(theta)}
        return self._reparse(raw)

    def with_time_step(self, dt: float) -> "RunSpec":
        raw = copy.deepcopy(self.raw)
        raw.setdefault("time", {})["dt"] = float(dt)
        return self._reparse(raw)

    def _reparse(self, raw: dict) -> "RunSpec":
        return parse_config(raw, base_dir=self.source.parent if self.source else None,
                            source=self.source)


def config_hash(raw: dict) -> str:
    """sha256 of the canonical JSON form of a parsed configuration."""
    text = json.dumps(raw, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def load_config(path: str | Path) -> RunSpec:
    """Read and validate a TOML configuration file."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        # the message carries "(at line L, column C)"
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(raw, base_dir=path.parent, source=path)


def _section(raw: dict, name: str) -> dict:
    sec = raw.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    extra = set(sec) - _SECTIONS[name]
    if extra:
        raise ConfigError(f"[{name}]: unknown key(s) {sorted(extra)}")
    return sec


def _need(sec: dict, section: str, key: str):
    if key not in sec:
        raise ConfigError(f"[{section}]: missing required key {key!r}")
    return sec[key]


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    return float(value)


def _kernel(sec: dict) -> Kernel:
    name = _need(sec, "kernel", "name")
    params = sec.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("[kernel.params] must be a table")
    try:
        kernel = from_name(name, **params)
    except TypeError as exc:
        raise ConfigError(f"[kernel.params]: {exc}") from None
    except SmoluchowskiError as exc:
        raise ConfigError(f"[kernel]: {exc}") from None
    changes = {}
    if "beta" in sec:
        changes["beta"] = _number(sec["beta"], "[kernel] beta")
    if "k" in sec:
        changes["k_bound"] = _number(sec["k"], "[kernel] k")
    return dataclasses.replace(kernel, **changes) if changes else kernel


def _initial(sec: dict, base_dir: Path | None) -> Density:
    kind = _need(sec, "initial", "kind")
    if kind == "exponential":
        return exponential_density(_number(sec.get("amplitude", 1.0), "[initial] amplitude"),
                                   _number(sec.get("rate", 1.0), "[initial] rate"))
    if kind == "constant":
        return constant_density(_number(_need(sec, "initial", "value"), "[initial] value"))
    if kind == "tabulated":
        p = Path(_need(sec, "initial", "path"))
        if not p.is_absolute() and base_dir is not None:
            p = base_dir / p
        if not p.exists():
            raise ConfigError(f"[initial] path {p} does not exist")
        return read_density_csv(p)
    raise ConfigError(f"[initial] kind must be exponential, constant or tabulated, got {kind!r}")


def _snapshots(value):
    if value is None:
        return None
    if isinstance(value, bool):
        raise ConfigError("[time] snapshots must be an integer or a list of times")
    if isinstance(value, int):
        return value
    if isinstance(value, list):
        return tuple(_number(v, "[time] snapshots entry") for v in value)
    raise ConfigError("[time] snapshots must be an integer or a list of times")


def parse_config(raw: dict[str, Any], *, base_dir: Path | None = None,
                 source: Path | None = None) -> RunSpec:
    """Validate a configuration mapping (as produced by a TOML parser)."""
    extra = set(raw) - set(_SECTIONS)
    if extra:
        raise ConfigError(f"unknown section(s) {sorted(extra)}")
    for name in _REQUIRED:
        if name not in raw:
            raise ConfigError(f"missing section [{name}]")
    ks, ts, gs, ins, tm = (_section(raw, s) for s in _REQUIRED)
    ds, ss = _section(raw, "diagnostics"), _section(raw, "study")

    try:
        kernel = _kernel(ks)
        theta = _need(ts, "truncation", "theta")
        if isinstance(theta, bool) or theta not in (0, 1):
            raise ConfigError("[truncation] theta must be 0 or 1")
        trunc = TruncationParams(_number(_need(ts, "truncation", "n"), "[truncation] n"), int(theta))
        cells = _need(gs, "grid", "cells")
        if isinstance(cells, bool) or not isinstance(cells, int):
            raise ConfigError("[grid] cells must be an integer")
        dt = tm.get("dt")
        run = RunConfig(
            kernel=kernel,
            truncation=trunc,
            grid_min=_number(_need(gs, "grid", "min"), "[grid] min"),
            grid_max=_number(_need(gs, "grid", "max"), "[grid] max"),
            cells=cells,
            initial=_initial(ins, base_dir),
            T=_number(_need(tm, "time", "T"), "[time] T"),
            dt=None if dt is None else _number(dt, "[time] dt"),
            method=str(tm.get("method", "rk4")),
            rtol=_number(tm.get("rtol", 1e-8), "[time] rtol"),
            snapshots=_snapshots(tm.get("snapshots")),
            dt_min=_number(tm.get("dt_min", 1e-12), "[time] dt_min"),
            dt_safety=_number(tm.get("dt_safety", 0.1), "[time] dt_safety"),
        )
        diag = DiagnosticsSpec(
            enabled=bool(ds.get("enabled", True)),
            q=_number(ds.get("q", 5.0), "[diagnostics] q"),
            lam=_number(ds.get("lam", 2.0), "[diagnostics] lam"),
            weak_form=bool(ds.get("weak_form", True)),
            bounds=bool(ds.get("bounds", True)),
        )
        study_n = tuple(_number(v, "[study] n entry") for v in ss.get("n", []))
    except ConfigError:
        raise
    except SmoluchowskiError as exc:
        raise ConfigError(str(exc)) from None
    return RunSpec(run, diag, study_n, raw=copy.deepcopy(raw), source=source)
