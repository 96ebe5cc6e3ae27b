"""Convergence in the truncation level: conservative against non-conservative runs."""
from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .config import RunSpec
from .diagnostics import check_apriori_bounds, one, weak_form_residual
from .convex import build_vallee_poussin
from .errors import ConfigError
from .oracle import l1_distance, run_dt
from .solver import MOMENT_NAMES, Trajectory, run

logger = logging.getLogger(__name__)

__all__ = ["StudyRow", "StudyReport", "convergence_study", "thread_count", "THREADS_ENV"]

THREADS_ENV = "SMOLUCHOWSKI_THREADS"


def thread_count() -> int:
    """Worker threads for independent runs, from ``SMOLUCHOWSKI_THREADS`` (default 1)."""
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


@dataclass
class StudyRow:
    n: float
    theta: int
    config_hash: str
    final_moments: dict[str, float]
    loss: float
    l1_theta0_theta1: float
    mass_drift: float
    weak_form_residual: float
    bounds_passed: bool | None
    wall_time: float


@dataclass
class StudyReport:
    """Rows sorted by truncation level, then by theta."""

    base_hash: str
    T: float
    rows: list[StudyRow] = field(default_factory=list)

    @property
    def levels(self) -> list[float]:
        return sorted({r.n for r in self.rows})

    @property
    def distances(self) -> list[float]:
        by_n = {r.n: r.l1_theta0_theta1 for r in self.rows}
        return [by_n[n] for n in self.levels]

    @property
    def decreasing(self) -> bool | None:
        """Strict decrease of the theta0/theta1 distance along n; ``None`` for one level."""
        d = self.distances
        if len(d) < 2:
            return None
        return bool(all(b < a for a, b in zip(d[:-1], d[1:])))

    def to_dict(self) -> dict:
        return {
            "base_hash": self.base_hash,
            "T": self.T,
            "decreasing": self.decreasing,
            "rows": [asdict(r) for r in self.rows],
        }

    def format_table(self) -> str:
        lines = [f"{'n':>10} {'theta':>5} {'L1(th0,th1)':>14} {'M_1(T)':>14} {'loss':>12} "
                 f"{'drift':>10} {'weak[1]':>10} {'bounds':>7} {'sec':>7}"]
        for r in self.rows:
            b = "-" if r.bounds_passed is None else ("pass" if r.bounds_passed else "FAIL")
            lines.append(f"{r.n:>10g} {r.theta:>5d} {r.l1_theta0_theta1:>14.6e} "
                         f"{r.final_moments['M_1']:>14.10f} {r.loss:>12.4e} {r.mass_drift:>10.2e} "
                         f"{r.weak_form_residual:>10.2e} {b:>7} {r.wall_time:>7.2f}")
        trend = {None: "single level, no trend", True: "strictly decreasing",
                 False: "NOT strictly decreasing"}[self.decreasing]
        lines.append(f"theta0/theta1 distance at T={self.T:g}: {trend}")
        return "\n".join(lines)


def _one_run(spec: RunSpec) -> tuple[Trajectory, float]:
    t0 = time.perf_counter()
    traj = run(spec.run)
    return traj, time.perf_counter() - t0


def _bounds(traj: Trajectory, lam: float, T: float) -> bool | None:
    if not traj.kernel.linear_growth or not 1 < lam < traj.truncation.n:
        return None
    init = traj.snapshots[0]
    weights = (build_vallee_poussin(init, "sigma1"),
               build_vallee_poussin(init, "sigma2", beta=traj.beta))
    return check_apriori_bounds(traj, weights, lam, T).passed


def convergence_study(base: RunSpec, n_list: Sequence[float], threads: int | None = None) -> StudyReport:
    """Run both truncation modes for every level in ``n_list``.

    All runs share the base grid and time step, so the distance at each level
    measures the truncation only.  Every level is validated against the grid
    before any run starts.
    """
    levels = [float(n) for n in n_list]
    if not levels:
        raise ConfigError("n_list is empty")
    if any(n <= 1 for n in levels):
        raise ConfigError("every truncation level must exceed 1")
    if any(b <= a for a, b in zip(levels[:-1], levels[1:])):
        raise ConfigError("n_list must be strictly increasing")
    specs = {(n, th): base.with_truncation(n, th) for n in levels for th in (0, 1)}
    if base.run.dt is None:
        # one step for every member: the smallest any of them would pick alone
        dt = min(run_dt(s.run) for s in specs.values())
        specs = {key: s.with_time_step(dt) for key, s in specs.items()}
    threads = thread_count() if threads is None else threads

    keys = sorted(specs)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = dict(zip(keys, pool.map(lambda k: _one_run(specs[k]), keys)))
    else:
        results = {k: _one_run(specs[k]) for k in keys}

    T = base.run.T
    report = StudyReport(base_hash=base.hash, T=T)
    for n in levels:
        s0 = results[(n, 0)][0].snapshot_at(T)
        s1 = results[(n, 1)][0].snapshot_at(T)
        dist = l1_distance(s0.values, s1.values, s0.grid)
        for th in (0, 1):
            traj, wall = results[(n, th)]
            m = traj.moments
            drift = float(np.max(np.abs(m[:, 3] - m[0, 3])) / m[0, 3])
            weak = weak_form_residual(traj, one(), T).scaled
            report.rows.append(StudyRow(
                n=n,
                theta=th,
                config_hash=specs[(n, th)].hash,
                final_moments={name: float(v) for name, v in zip(MOMENT_NAMES, m[-1])},
                loss=float(traj.loss[-1]),
                l1_theta0_theta1=dist,
                mass_drift=drift,
                weak_form_residual=weak,
                bounds_passed=_bounds(traj, base.diagnostics.lam, T),
                wall_time=wall,
            ))
        logger.info("n=%g: L1(theta0, theta1) = %.6e", n, dist)
    return report
