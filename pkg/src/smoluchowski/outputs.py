"""Run directories: CSV/JSON writers and a loader for ``compare``.

A run directory holds

``moments.csv``
    ``t, M_-2beta, M_-beta, M_0, M_1, M_2, loss`` at every time step.
``snapshots.csv``
    long format ``t, zeta_pivot, g``, one row per (snapshot, cell).
``report.json``
    configuration hash, residuals, a priori bound report.
``config.toml``
    a verbatim copy of the input configuration.

Floats are written with ``repr`` so that they round-trip exactly; the
first line of each CSV is a ``# config_sha256=...`` comment.
"""
from __future__ import annotations

import csv
import json
import math
import shutil
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .grid import DistributionState
from .solver import MOMENT_NAMES, Trajectory

__all__ = [
    "write_moments",
    "write_snapshots",
    "write_report",
    "write_run_dir",
    "load_run_dir",
    "jsonable",
]


def _f(x: float) -> str:
    return repr(float(x))


def _open_csv(path: Path, config_hash: str):
    fh = open(path, "w", newline="", encoding="utf-8")
    fh.write(f"# config_sha256={config_hash}\n")
    return fh, csv.writer(fh, lineterminator="\n")


def write_moments(path: Path, traj: Trajectory, config_hash: str) -> None:
    fh, w = _open_csv(path, config_hash)
    with fh:
        w.writerow(["t", *MOMENT_NAMES, "loss"])
        for t, m, loss in zip(traj.times, traj.moments, traj.loss):
            w.writerow([_f(t), *(_f(v) for v in m), _f(loss)])


def write_snapshots(path: Path, traj: Trajectory, config_hash: str) -> None:
    fh, w = _open_csv(path, config_hash)
    x = traj.grid.pivots
    with fh:
        w.writerow(["t", "zeta_pivot", "g"])
        for s in traj.snapshots:
            ts = _f(s.time)
            for xi, gi in zip(x, s.values):
                w.writerow([ts, _f(xi), _f(gi)])


def jsonable(obj):
    """Recursively convert numpy scalars and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    return obj


def write_report(path: Path, report: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(jsonable(report), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def write_run_dir(out: Path, traj: Trajectory, report: dict, config_hash: str,
                  config_path: Path | None = None) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_moments(out / "moments.csv", traj, config_hash)
    write_snapshots(out / "snapshots.csv", traj, config_hash)
    write_report(out / "report.json", report)
    if config_path is not None:
        shutil.copyfile(config_path, out / "config.toml")


def _read_csv(path: Path) -> tuple[str | None, list[str], np.ndarray]:
    h = None
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline()
        if first.startswith("# config_sha256="):
            h = first.strip().split("=", 1)[1]
        else:
            fh.seek(0)
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path} is empty")
    return h, rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))


def load_run_dir(path: str | Path) -> tuple[Trajectory, "RunSpec"]:
    """Rebuild a trajectory (and its configuration) from a run directory."""
    from .config import load_config

    path = Path(path)
    cfg = path / "config.toml"
    if not cfg.exists():
        raise ConfigError(f"{path} is not a run directory (no config.toml)")
    spec = load_config(cfg)
    grid = spec.run.build_grid()
    h_m, _, mom = _read_csv(path / "moments.csv")
    h_s, _, snap = _read_csv(path / "snapshots.csv")
    if h_m != spec.hash or h_s != spec.hash:
        raise DataError(f"{path}: outputs were not produced by the stored config.toml")
    times = np.unique(snap[:, 0])
    snaps = []
    for t in times:
        rows = snap[snap[:, 0] == t]
        if len(rows) != grid.cells or not np.allclose(rows[:, 1], grid.pivots, rtol=1e-15, atol=0):
            raise DataError(f"{path}: snapshot at t={t} does not match the configured grid")
        snaps.append(DistributionState(grid, rows[:, 2], float(t)))
    traj = Trajectory(
        grid=grid,
        kernel=spec.run.kernel,
        truncation=spec.run.truncation,
        snapshots=snaps,
        times=mom[:, 0],
        moments=mom[:, 1:6],
        loss=mom[:, 6],
        dt=float(np.max(np.diff(mom[:, 0]))) if len(mom) > 1 else 0.0,
        config=spec.run,
    )
    return traj, spec
