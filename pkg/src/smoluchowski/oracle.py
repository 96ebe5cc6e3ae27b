"""Independent ground truths for the solver.

* the exact constant-kernel solution for g_in = exp(-zeta),
* closed-form moment ODE solutions for the constant, additive and
  multiplicative kernels (the last one only before its gelation time),
* gelation-time estimates from the loss ledger of a theta = 0 run,
* refined reference runs for self-convergence.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BlowUpError, DomainError
from .grid import Grid
from .solver import RunConfig, Trajectory, run

__all__ = [
    "OracleSpec",
    "constant_kernel_exact",
    "constant_kernel_cell_averages",
    "moment_ode",
    "gelation_time",
    "gelation_time_estimate",
    "reference_run",
    "l1_distance",
    "compare_oracle",
]


@dataclass(frozen=True)
class OracleSpec:
    """What to compare a trajectory with.

    kind is ``constant_exact``, ``moment_ode`` (with ``kernel_class``) or
    ``reference_run`` (with ``config`` and ``refinement``).
    """

    kind: str
    kernel_class: str | None = None
    initial_moments: tuple[float, float, float] | None = None
    config: RunConfig | None = None
    refinement: int = 1
    t_max: float | None = None

    def __post_init__(self):
        if self.kind not in ("constant_exact", "moment_ode", "reference_run"):
            raise DomainError(f"unknown oracle kind {self.kind!r}")
        if self.refinement < 1:
            raise DomainError("refinement factor must be >= 1")


def _a(t):
    return 2.0 / (2.0 + t)


def constant_kernel_exact(zeta, t: float):
    """a(t)^2 exp(-a(t) zeta), a(t) = 2 / (2 + t): unit rate, g_in = exp(-zeta)."""
    if t < 0:
        raise DomainError("t must be non-negative")
    zeta = np.asarray(zeta, dtype=float)
    if np.any(zeta <= 0):
        raise DomainError("zeta must be positive")
    a = _a(t)
    out = a * a * np.exp(-a * zeta)
    return float(out) if out.ndim == 0 else out


def constant_kernel_cell_averages(grid: Grid, t: float) -> np.ndarray:
    """Exact cell averages of :func:`constant_kernel_exact` on ``grid``."""
    if t < 0:
        raise DomainError("t must be non-negative")
    a = _a(t)
    e = grid.edges
    return a * (np.exp(-a * e[:-1]) - np.exp(-a * e[1:])) / grid.widths


def gelation_time(M2_0: float) -> float:
    """Blow-up time 1/M2(0) of the second moment for the multiplicative kernel."""
    return 1.0 / M2_0


def moment_ode(kernel_class: str, initial_moments: Sequence[float], t: float) -> tuple[float, float, float]:
    """(M0, M1, M2) at time ``t`` from the closed-form moment equations.

    constant:        M0' = -M0^2/2,  M1' = 0, M2' = M1^2
    additive:        M0' = -M0 M1,   M1' = 0, M2' = 2 M1 M2
    multiplicative:  M0' = -M1^2/2,  M1' = 0, M2' = M2^2   (t < 1/M2(0))
    """
    M0, M1, M2 = (float(m) for m in initial_moments)
    if t < 0:
        raise DomainError("t must be non-negative")
    if kernel_class == "constant":
        return 2.0 * M0 / (2.0 + M0 * t), M1, M2 + M1 * M1 * t
    if kernel_class == "additive":
        return M0 * math.exp(-M1 * t), M1, M2 * math.exp(2.0 * M1 * t)
    if kernel_class == "multiplicative":
        Tg = gelation_time(M2)
        if t >= Tg:
            raise BlowUpError(f"t={t} is past the gelation time {Tg}", Tg)
        return M0 - 0.5 * M1 * M1 * t, M1, M2 / (1.0 - M2 * t)
    raise DomainError(f"no moment closure for kernel class {kernel_class!r}")


def gelation_time_estimate(traj: Trajectory, threshold: float) -> float | None:
    """First time the ledger loss exceeds ``threshold * M1(0)``.

    Linear interpolation between recorded steps; ``None`` if never exceeded.
    With ``threshold = 0`` this is the end of the first step showing any
    positive loss.
    """
    if traj.truncation.theta != 0:
        raise DomainError("gelation estimates need a theta = 0 trajectory")
    if threshold < 0:
        raise DomainError("threshold must be non-negative")
    level = threshold * float(traj.moments[0, 3])
    loss = traj.loss
    above = np.nonzero(loss > level)[0]
    if len(above) == 0:
        return None
    j = int(above[0])
    if threshold == 0 or j == 0:
        return float(traj.times[j])
    t0, t1, l0, l1 = traj.times[j - 1], traj.times[j], loss[j - 1], loss[j]
    return float(t0 + (level - l0) * (t1 - t0) / (l1 - l0))


def reference_run(config: RunConfig, refinement: int) -> Trajectory:
    """Re-run with ``cells * refinement`` cells and ``dt / refinement``."""
    if int(refinement) != refinement or refinement < 1:
        raise DomainError("refinement must be a positive integer")
    if refinement == 1:
        return run(config)
    dt = config.dt
    if dt is None:
        dt = run_dt(config)
    refined = dataclasses.replace(config, cells=config.cells * refinement, dt=dt / refinement)
    return run(refined)


def run_dt(config: RunConfig) -> float:
    """The fixed step the default policy would choose for ``config``."""
    from .grid import project_initial
    from .solver import PairOperator, initial_dt

    grid = config.build_grid()
    state = project_initial(config.initial, grid)
    op = PairOperator(grid, config.kernel, config.truncation)
    dt = min(initial_dt(op, state.numbers, config.dt_safety), config.T)
    nsteps = max(1, int(math.ceil(config.T / dt - 1e-9)))
    return config.T / nsteps


def l1_distance(a, b, grid: Grid) -> float:
    """sum_i |a_i - b_i| w_i for two cell-average vectors on the same grid."""
    return float(np.sum(np.abs(np.asarray(a) - np.asarray(b)) * grid.widths))


def _resample(fine: Trajectory, grid: Grid, t: float) -> np.ndarray:
    """Cell averages of a finer trajectory's snapshot on ``grid`` by mass-free
    number conservation (overlap-weighted)."""
    src = fine.snapshot_at(t)
    fe = fine.grid.edges
    ce = grid.edges
    lo = np.maximum(fe[:-1][None, :], ce[:-1][:, None])
    hi = np.minimum(fe[1:][None, :], ce[1:][:, None])
    overlap = np.clip(hi - lo, 0.0, None)
    return overlap @ src.values / grid.widths


def compare_oracle(traj: Trajectory, spec: OracleSpec) -> dict:
    """Error norms of ``traj`` against an oracle.

    Returns ``{"times": [...], "l1": [...] | None, "moments": {name: [...]}}``
    where ``l1`` holds density L1 errors per snapshot when a density oracle
    exists and ``moments`` relative moment errors.
    """
    times = traj.snapshot_times
    if spec.t_max is not None:
        times = times[times <= spec.t_max * (1 + 1e-12)]
    grid = traj.grid
    out: dict = {"times": times.tolist(), "l1": None, "moments": {}}
    if spec.kind == "constant_exact":
        out["l1"] = [l1_distance(traj.snapshot_at(t).values, constant_kernel_cell_averages(grid, t), grid)
                     for t in times]
        M = [moment_ode("constant", (1.0, 1.0, 2.0), t) for t in times]
        out["moments"] = _moment_errors(traj, times, M)
    elif spec.kind == "moment_ode":
        if spec.kernel_class is None:
            raise DomainError("moment_ode oracle needs a kernel class")
        m0 = spec.initial_moments or tuple(float(v) for v in traj.moments[0, 2:5])
        M = []
        kept = []
        for t in times:
            try:
                M.append(moment_ode(spec.kernel_class, m0, t))
                kept.append(t)
            except BlowUpError:
                break
        out["times"] = kept
        out["moments"] = _moment_errors(traj, np.array(kept), M)
    else:
        if spec.config is None:
            raise DomainError("reference_run oracle needs a config")
        ref = reference_run(spec.config, spec.refinement)
        if ref.grid.cells == grid.cells and np.array_equal(ref.grid.edges, grid.edges):
            out["l1"] = [l1_distance(traj.snapshot_at(t).values, ref.snapshot_at(t).values, grid)
                         for t in times]
        else:
            out["l1"] = [l1_distance(traj.snapshot_at(t).values, _resample(ref, grid, t), grid)
                         for t in times]
        M = [tuple(np.interp(t, ref.times, ref.moments[:, c]) for c in (2, 3, 4)) for t in times]
        out["moments"] = _moment_errors(traj, times, M)
    return out


def _moment_errors(traj: Trajectory, times, reference) -> dict:
    errs = {"M_0": [], "M_1": [], "M_2": []}
    for t, ref in zip(times, reference):
        for c, name in enumerate(("M_0", "M_1", "M_2")):
            got = float(np.interp(t, traj.times, traj.moments[:, 2 + c]))
            errs[name].append(abs(got - ref[c]) / abs(ref[c]) if ref[c] != 0 else abs(got))
    return errs
