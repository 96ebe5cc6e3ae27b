"""Fixed-pivot sectional solver for the truncated coagulation equation.

Particles in cell ``i`` are lumped at the pivot ``x_i``.  Every unordered
pair of cells ``(i, j)`` interacts at rate

    R_ij = K(x_i, x_j) N_i N_j        (i < j)
    R_ii = K(x_i, x_i) N_i^2 / 2

with ``K`` the truncated kernel and ``N_i = g_i w_i`` the cell number.  Both
partners die; the newborn volume ``v = x_i + x_j`` is split between the two
pivots bracketing it so that number and mass are both preserved.  In the
non-conservative mode (theta = 0) a pair with ``v >= n`` (or ``v`` beyond the
grid) still dies but gives no newborn, and ``v R_ij`` is booked as lost mass.
In the conservative mode pairs with ``v >= n`` have zero rate; a newborn past
the last pivot (possible only on a grid that stops short of ``n``) joins the
last cell with weight ``v / x_last``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import sparse

from .errors import ConfigError, DomainError, NumericalError, StiffnessError
from .grid import Density, DistributionState, Grid, build_grid, project_initial
from .kernels import Kernel, TruncationParams, eval_truncated

logger = logging.getLogger(__name__)

__all__ = [
    "PairOperator",
    "RunConfig",
    "Trajectory",
    "MOMENT_NAMES",
    "coagulation_rhs",
    "step",
    "advance",
    "run",
]

MOMENT_NAMES = ("M_-2beta", "M_-beta", "M_0", "M_1", "M_2")


class PairOperator:
    """Precomputed pair interaction tables for one (grid, kernel, truncation)."""

    def __init__(self, grid: Grid, kernel: Kernel, params: TruncationParams):
        self.grid = grid
        self.kernel = kernel
        self.params = params
        x = grid.pivots
        m = grid.cells
        Z, E = np.meshgrid(x, x, indexing="ij")
        # rate matrix; symmetric because every built-in kernel is
        self.K = np.asarray(eval_truncated(kernel, params, Z, E), dtype=float)
        if not np.all(np.isfinite(self.K)):
            i, j = np.argwhere(~np.isfinite(self.K))[0]
            raise NumericalError(f"kernel not finite at pivot pair ({x[i]:g}, {x[j]:g})")

        iu, ju = np.triu_indices(m)
        coeff = self.K[iu, ju] * np.where(iu == ju, 0.5, 1.0)
        active = coeff > 0
        iu, ju, coeff = iu[active], ju[active], coeff[active]
        v = x[iu] + x[ju]
        # beyond the grid: lost for theta = 0, kept in the last cell for theta = 1
        escape = (v >= params.n) | ((v > grid.hi) & (params.theta == 0))
        self.pair_i, self.pair_j, self.coeff = iu, ju, coeff
        self.newborn = v
        self.escape = escape
        self.loss_weight = np.where(escape, v, 0.0) if params.theta == 0 else np.zeros_like(v)

        keep = ~escape
        pairs = np.nonzero(keep)[0]
        vb = v[keep]
        k = np.searchsorted(x, vb, side="right") - 1
        last = k >= m - 1
        k_lo = np.minimum(k, m - 2) if m > 1 else np.zeros_like(k)
        k_hi = k_lo + 1
        if m > 1:
            a = (x[k_hi] - vb) / (x[k_hi] - x[k_lo])
        else:
            a = np.ones_like(vb)
        b = 1.0 - a
        # above the last pivot: everything goes to the last cell, mass-weighted
        a = np.where(last, vb / x[-1], a)
        b = np.where(last, 0.0, b)
        tgt_lo = np.where(last, m - 1, k_lo)
        tgt_hi = np.minimum(k_hi, m - 1)
        rows = np.concatenate([tgt_lo, tgt_hi])
        cols = np.concatenate([pairs, pairs])
        data = np.concatenate([a, b])
        nz = data != 0
        self.birth = sparse.csr_matrix(
            (data[nz], (rows[nz], cols[nz])), shape=(m, len(coeff))
        )
        self.birth.sum_duplicates()

    def pair_rates(self, numbers: np.ndarray) -> np.ndarray:
        return self.coeff * numbers[self.pair_i] * numbers[self.pair_j]

    def number_rate(self, numbers: np.ndarray) -> tuple[np.ndarray, float]:
        """d N_i / dt and the instantaneous mass-loss rate."""
        R = self.pair_rates(numbers)
        death = numbers * (self.K @ numbers)
        dN = self.birth @ R - death
        loss = float(self.loss_weight @ R)
        if not (np.all(np.isfinite(dN)) and math.isfinite(loss)):
            bad = np.nonzero(~np.isfinite(R))[0]
            if len(bad):
                p = bad[0]
                xi, xj = self.grid.pivots[self.pair_i[p]], self.grid.pivots[self.pair_j[p]]
                raise NumericalError(f"non-finite pair rate at pivots ({xi:g}, {xj:g})")
            raise NumericalError("non-finite coagulation rate")
        return dN, loss

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        """Right-hand side for the augmented vector ``[N_0, ..., N_{m-1}, loss]``."""
        dN, loss = self.number_rate(y[:-1])
        out = np.empty_like(y)
        out[:-1] = dN
        out[-1] = loss
        return out


def coagulation_rhs(state: DistributionState, kernel: Kernel, params: TruncationParams):
    """Per-cell d g_i / dt and the mass-loss rate for one state.

    Builds the pair tables on every call; use :class:`PairOperator` directly
    inside loops.
    """
    op = PairOperator(state.grid, kernel, params)
    dN, loss = op.number_rate(state.numbers)
    return dN / state.grid.widths, loss


# -- time stepping ----------------------------------------------------------

_RK4_NAMES = ("rk4",)
_ADAPTIVE_NAMES = ("adaptive", "bs23")


def _rk4(f, t, y, dt):
    k1 = f(t, y)
    k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _bs23(f, t, y, dt, k1=None):
    """Bogacki-Shampine 3(2) pair: third-order solution and error estimate."""
    if k1 is None:
        k1 = f(t, y)
    k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = f(t + 0.75 * dt, y + 0.75 * dt * k2)
    y3 = y + dt * (2.0 / 9.0 * k1 + 1.0 / 3.0 * k2 + 4.0 / 9.0 * k3)
    k4 = f(t + dt, y3)
    y2 = y + dt * (7.0 / 24.0 * k1 + 0.25 * k2 + 1.0 / 3.0 * k3 + 0.125 * k4)
    return y3, y3 - y2, k4


def _is_nonneg(y, n_nonneg):
    return bool(np.all(y[:n_nonneg] >= 0)) if n_nonneg else True


def advance(f, t: float, y: np.ndarray, dt: float, method: str = "rk4", *,
            dt_min: float = 1e-12, rtol: float = 1e-8, atol: float = 1e-14,
            n_nonneg: int | None = None) -> np.ndarray:
    """Advance ``y' = f(t, y)`` from ``t`` to ``t + dt``.

    The first ``n_nonneg`` components (all by default) must stay
    non-negative; a step that would make one negative is redone as two
    half steps, recursively, down to ``dt_min``.
    """
    y = np.asarray(y, dtype=float)
    if dt < 0:
        raise DomainError("dt must be non-negative")
    if dt == 0:
        return y.copy()
    if n_nonneg is None:
        n_nonneg = y.size
    if method in _RK4_NAMES:
        return _advance_rk4(f, t, y, dt, dt_min, n_nonneg)
    if method in _ADAPTIVE_NAMES:
        return _advance_adaptive(f, t, y, dt, dt_min, rtol, atol, n_nonneg)
    raise ConfigError(f"unknown time stepping method {method!r}")


def _advance_rk4(f, t, y, dt, dt_min, n_nonneg):
    y_new = _rk4(f, t, y, dt)
    if _is_nonneg(y_new, n_nonneg):
        return y_new
    half = 0.5 * dt
    if half < dt_min:
        raise StiffnessError(f"positivity lost at t={t:g} even with dt={dt:g} (dt_min={dt_min:g})")
    logger.debug("negative value at t=%g, halving dt=%g", t, dt)
    y_mid = _advance_rk4(f, t, y, half, dt_min, n_nonneg)
    return _advance_rk4(f, t + half, y_mid, half, dt_min, n_nonneg)


def _advance_adaptive(f, t, y, dt, dt_min, rtol, atol, n_nonneg):
    t_end = t + dt
    h = dt
    while t < t_end:
        h = min(h, t_end - t)
        y_new, err, _ = _bs23(f, t, y, h)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = float(np.sqrt(np.mean((err / scale) ** 2)))
        if err_norm <= 1.0 and _is_nonneg(y_new, n_nonneg):
            t = t + h if t_end - t > h else t_end
            y = y_new
            factor = 5.0 if err_norm == 0 else min(5.0, 0.9 * err_norm ** (-1.0 / 3.0))
            h = h * factor
        else:
            factor = 0.5 if err_norm <= 1.0 else max(0.2, 0.9 * err_norm ** (-1.0 / 3.0))
            h = h * factor
            if h < dt_min:
                raise StiffnessError(f"step size underflow at t={t:g} (dt_min={dt_min:g})")
    return y


def step(state: DistributionState, rhs: Callable, dt: float, method: str = "rk4", *,
         dt_min: float = 1e-12, rtol: float = 1e-8) -> DistributionState:
    """Advance a state by ``dt`` with a positivity guard.

    ``rhs(t, values)`` returns d values / dt.
    """
    values = advance(rhs, state.time, state.values, dt, method, dt_min=dt_min, rtol=rtol)
    return DistributionState(state.grid, values, state.time + dt)


# -- runs -------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    """Everything needed for one deterministic run.

    ``dt=None`` picks a fixed step with ``dt * max_i sum_j K_ij N_j <= 0.1``
    at t = 0 (see :func:`initial_dt`), rounded so that an integer number of
    steps reaches ``T``.
    ``snapshots`` is ``None`` (every step), an integer count of equal
    intervals, or an explicit sequence of times in (0, T].
    """

    kernel: Kernel
    truncation: TruncationParams
    grid_min: float
    grid_max: float
    cells: int
    initial: Density
    T: float
    dt: float | None = None
    method: str = "rk4"
    rtol: float = 1e-8
    snapshots: int | Sequence[float] | None = None
    dt_min: float = 1e-12
    dt_safety: float = 0.1

    def __post_init__(self):
        if not self.T > 0:
            raise ConfigError("T must be positive")
        if self.dt is not None and not self.dt > 0:
            raise ConfigError("fixed dt must be positive")
        if self.method not in _RK4_NAMES + _ADAPTIVE_NAMES:
            raise ConfigError(f"unknown method {self.method!r}")
        n = self.truncation.n
        if self.grid_min > 1.0 / n or self.grid_max < n:
            raise ConfigError(
                f"grid [{self.grid_min:g}, {self.grid_max:g}] must cover [1/n, n] = "
                f"[{1.0 / n:g}, {n:g}]"
            )

    def build_grid(self) -> Grid:
        return build_grid(self.grid_min, self.grid_max, self.cells)


@dataclass(eq=False)
class Trajectory:
    """Snapshots plus per-step moments and the cumulative mass-loss ledger.

    ``moments[:, c]`` follows ``MOMENT_NAMES``; ``loss`` is zero for theta = 1.
    """

    grid: Grid
    kernel: Kernel
    truncation: TruncationParams
    snapshots: list[DistributionState]
    times: np.ndarray
    moments: np.ndarray
    loss: np.ndarray
    dt: float
    config: RunConfig | None = field(default=None, repr=False)

    @property
    def beta(self) -> float:
        return self.kernel.beta

    @property
    def snapshot_times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])

    def moment(self, name: str) -> np.ndarray:
        return self.moments[:, MOMENT_NAMES.index(name)]

    def snapshot_at(self, t: float, atol: float = 1e-12) -> DistributionState:
        """The snapshot at time ``t``, linearly interpolated if ``t`` is not recorded."""
        st = self.snapshot_times
        if t < st[0] - atol or t > st[-1] + atol:
            raise DomainError(f"t={t} outside the trajectory [{st[0]}, {st[-1]}]")
        j = int(np.argmin(np.abs(st - t)))
        if abs(st[j] - t) <= atol:
            return self.snapshots[j]
        logger.info("t=%g is not a snapshot time; interpolating linearly", t)
        hi = int(np.searchsorted(st, t))
        lo = hi - 1
        s = (t - st[lo]) / (st[hi] - st[lo])
        vals = (1 - s) * self.snapshots[lo].values + s * self.snapshots[hi].values
        return DistributionState(self.grid, vals, t)

    def loss_at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.loss))


def moment_vector(grid: Grid, numbers: np.ndarray, beta: float) -> np.ndarray:
    x = grid.pivots
    return np.array([
        np.sum(x ** (-2 * beta) * numbers),
        np.sum(x ** (-beta) * numbers),
        np.sum(numbers),
        np.sum(x * numbers),
        np.sum(x * x * numbers),
    ])


def _time_nodes(config: RunConfig, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Step boundaries and a mask of which of them are snapshots."""
    T = config.T
    nsteps = max(1, int(math.ceil(T / dt - 1e-9)))
    base = T * np.arange(nsteps + 1) / nsteps
    snaps = config.snapshots
    if snaps is None:
        return base, np.ones(len(base), dtype=bool)
    if isinstance(snaps, (int, np.integer)):
        if snaps < 1:
            raise ConfigError("snapshot count must be >= 1")
        want = T * np.arange(snaps + 1) / snaps
    else:
        want = np.asarray(sorted(set(float(s) for s in snaps)), dtype=float)
        if np.any(want <= 0) or np.any(want > T * (1 + 1e-12)):
            raise ConfigError("snapshot times must lie in (0, T]")
        want = np.concatenate([[0.0], want])
    nodes = np.union1d(base, want)
    # merge nodes closer than round-off so no zero-length steps appear
    keep = np.concatenate([[True], np.diff(nodes) > 1e-12 * max(T, 1.0)])
    nodes = nodes[keep]
    mask = np.zeros(len(nodes), dtype=bool)
    for w in want:
        mask[int(np.argmin(np.abs(nodes - w)))] = True
    return nodes, mask


def initial_dt(op: PairOperator, numbers: np.ndarray, safety: float = 0.1) -> float:
    """``safety`` over the largest per-particle collision frequency sum_j K_ij N_j.

    This is the loss part of |g_i'/g_i|.  The birth part is left out: in
    nearly empty tail cells it is enormous without limiting stability.
    """
    pos = numbers > 0
    rate = float(np.max((op.K @ numbers)[pos])) if np.any(pos) else 0.0
    return safety / rate if rate > 0 else np.inf


def run(config: RunConfig, *, initial_state: DistributionState | None = None) -> Trajectory:
    """Integrate the truncated equation on [0, T]."""
    grid = config.build_grid()
    state0 = initial_state if initial_state is not None else project_initial(config.initial, grid)
    beta = config.kernel.beta
    m0 = moment_vector(grid, state0.numbers, beta)
    if not (np.isfinite(m0[0]) and np.isfinite(m0[3])):
        raise ConfigError("initial data has no finite M_-2beta + M_1 on the grid")

    op = PairOperator(grid, config.kernel, config.truncation)
    numbers = state0.numbers
    dt = config.dt
    if dt is None:
        dt = min(initial_dt(op, numbers, config.dt_safety), config.T)
    nodes, is_snap = _time_nodes(config, dt)
    dt = config.T / max(1, int(math.ceil(config.T / dt - 1e-9)))    # the step actually taken

    y = np.concatenate([numbers, [0.0]])
    m = grid.cells
    snaps = [DistributionState(grid, state0.values, 0.0, lost_mass=state0.lost_mass)]
    moments = [m0]
    loss = [0.0]
    for k in range(1, len(nodes)):
        t0, t1 = nodes[k - 1], nodes[k]
        try:
            y = advance(op.rhs, t0, y, t1 - t0, config.method,
                        dt_min=config.dt_min, rtol=config.rtol, n_nonneg=m)
        except StiffnessError as exc:
            raise StiffnessError(f"{exc} (step {k} of {len(nodes) - 1}, t={t0:g})") from exc
        N = y[:m]
        moments.append(moment_vector(grid, N, beta))
        loss.append(y[m])
        if is_snap[k]:
            snaps.append(DistributionState(grid, N / grid.widths, float(t1)))
    return Trajectory(
        grid=grid,
        kernel=config.kernel,
        truncation=config.truncation,
        snapshots=snaps,
        times=nodes.copy(),
        moments=np.array(moments),
        loss=np.array(loss),
        dt=float(dt),
        config=config,
    )
