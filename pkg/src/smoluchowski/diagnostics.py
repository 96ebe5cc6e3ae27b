"""Certificates for computed trajectories.

Every check compares two independently evaluated sides: a change of a
weighted integral of the state and a time integral of a pairwise collision
integral.  Test functions are integrated exactly over each cell against the
cell averages of the state; collision integrals use the midpoint rule at
pivot pairs; time integrals use the trapezoid rule over the trajectory
snapshots, so snapshot density controls their accuracy.  The collision integrals are evaluated from
the kernel directly and never touch the solver's birth tables.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .convex import ConvexWeight
from .errors import DomainError
from .grid import Density
from .kernels import eval_truncated
from .solver import Trajectory

logger = logging.getLogger(__name__)

__all__ = [
    "Residual",
    "TestFunction",
    "BoundCheck",
    "BoundReport",
    "EquicontinuityResult",
    "h_matrix",
    "omega_tilde",
    "mass_balance_finite_q",
    "tail_identity",
    "tail_brackets",
    "weak_form_residual",
    "check_apriori_bounds",
    "equicontinuity_modulus",
    "initial_norm",
    "gamma_constant",
    "l1_constant",
    "l2_constant",
    "one",
    "identity",
    "capped",
    "indicator_above",
    "mass_below",
]


@dataclass(frozen=True)
class Residual:
    """``value = lhs - rhs`` together with how it should be judged."""

    name: str
    t: float
    lhs: float
    rhs: float
    value: float
    scale: float
    estimate: float
    tolerance: float
    passed: bool
    sign_ok: bool | None = None

    @property
    def scaled(self) -> float:
        return abs(self.value) / self.scale if self.scale > 0 else abs(self.value)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TestFunction:
    """Bounded test function for the weak formulation.

    ``antiderivative`` gives exact cell averages of omega; without it cells
    are averaged with a 1024-point composite midpoint rule.  ``scale`` picks
    the natural size of the identity: ``"number"`` is the initial zeroth
    moment times sup|omega|, ``"mass"`` the initial first moment.
    """

    __test__ = False  # keep pytest from collecting this class

    omega: Callable[[np.ndarray], np.ndarray]
    name: str
    scale: str = "number"
    antiderivative: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, x):
        return self.omega(np.asarray(x, dtype=float))

    def cell_averages(self, edges: np.ndarray) -> np.ndarray:
        edges = np.asarray(edges, dtype=float)
        widths = np.diff(edges)
        if self.antiderivative is not None:
            F = self.antiderivative(edges)
            return np.diff(F) / widths
        sub = (np.arange(1024) + 0.5) / 1024
        pts = edges[:-1, None] + widths[:, None] * sub[None, :]
        return self.omega(pts).mean(axis=1)


def one() -> TestFunction:
    return TestFunction(lambda x: np.ones_like(x), "1", "number", lambda x: x)


def identity() -> TestFunction:
    # unbounded; only meaningful on a bounded grid
    return TestFunction(lambda x: x, "zeta", "mass", lambda x: 0.5 * x * x)


def capped(q: float) -> TestFunction:
    def anti(x):
        return np.where(x < q, 0.5 * x * x, 0.5 * q * q + q * (x - q))

    return TestFunction(lambda x: np.minimum(x, q), f"min(zeta,{q:g})", "mass", anti)


def indicator_above(q: float) -> TestFunction:
    return TestFunction(lambda x: (x >= q).astype(float), f"chi[{q:g},inf)", "number",
                        lambda x: np.maximum(x - q, 0.0))


def mass_below(q: float) -> TestFunction:
    return TestFunction(lambda x: np.where(x < q, x, 0.0), f"zeta*chi(0,{q:g})", "mass",
                        lambda x: 0.5 * np.minimum(x, q) ** 2)


# -- pairwise machinery ---------------------------------------------------


def omega_tilde(omega: Callable, zeta, eta):
    """omega(zeta + eta) - omega(zeta) - omega(eta)."""
    return omega(zeta + eta) - omega(zeta) - omega(eta)


def h_matrix(omega: Callable, zeta, eta, n: float, theta: int):
    """Truncated weak-form weight H for the test function ``omega``."""
    s = zeta + eta
    below = (s < n).astype(float)
    return omega(s) * below - (omega(zeta) + omega(eta)) * (1 - theta + theta * below)


class _Pairs:
    """Pivot-pair tables for one trajectory, cached per trajectory."""

    def __init__(self, traj: Trajectory):
        x = traj.grid.pivots
        self.x = x
        self.Z, self.E = np.meshgrid(x, x, indexing="ij")
        self.K = np.asarray(eval_truncated(traj.kernel, traj.truncation, self.Z, self.E))
        self.below_n = ((self.Z + self.E) < traj.truncation.n).astype(float)

    def quad(self, weight: np.ndarray, numbers: np.ndarray) -> float:
        """sum_ij weight_ij K_ij N_i N_j."""
        return float(numbers @ ((weight * self.K) @ numbers))

    def h_weight(self, test: TestFunction, edges: np.ndarray, theta: int) -> np.ndarray:
        """H at pivot pairs with the single-particle terms replaced by cell averages.

        Newborn volumes are taken at the pivot sum; truncation indicators are
        evaluated at pivot pairs, as in the kernel.
        """
        avg = test.cell_averages(edges)
        birth = test(self.Z + self.E) * self.below_n
        death = (avg[:, None] + avg[None, :]) * (1 - theta + theta * self.below_n)
        return birth - death


_PAIR_CACHE: dict[int, tuple[Trajectory, _Pairs]] = {}


def _pairs(traj: Trajectory) -> _Pairs:
    hit = _PAIR_CACHE.get(id(traj))
    if hit is not None and hit[0] is traj:
        return hit[1]
    p = _Pairs(traj)
    if len(_PAIR_CACHE) > 8:
        _PAIR_CACHE.clear()
    _PAIR_CACHE[id(traj)] = (traj, p)
    return p


def _states_until(traj: Trajectory, t: float):
    """Snapshots with time < t followed by the state at t (interpolated if needed)."""
    end = traj.snapshot_at(t)
    states = [s for s in traj.snapshots if s.time < end.time - 1e-12]
    states.append(end)
    return states, end


def _time_integral(traj: Trajectory, t: float, f: Callable) -> tuple[float, float]:
    """Trapezoid integral of f(numbers) over [0, t]; also the largest time step."""
    states, _ = _states_until(traj, t)
    if len(states) == 1:
        return 0.0, 0.0
    times = np.array([s.time for s in states])
    vals = np.array([f(s.numbers) for s in states])
    return float(integrate.trapezoid(vals, times)), float(np.max(np.diff(times)))


def _estimate(traj: Trajectory, scale: float, dt_snap: float) -> float:
    return scale * ((traj.grid.ratio - 1.0) + dt_snap)


def _finish(name, traj, t, lhs, rhs, scale, dt_snap, tol, sign_ok=None) -> Residual:
    est = _estimate(traj, scale, dt_snap)
    tolerance = max(1e-6, est) if tol is None else tol
    value = lhs - rhs
    passed = abs(value) <= tolerance and (sign_ok is None or sign_ok)
    return Residual(name, float(t), float(lhs), float(rhs), float(value), float(scale),
                    float(est), float(tolerance), bool(passed), sign_ok)


def _initial_moment(traj: Trajectory, p: int) -> float:
    return float(traj.moments[0, 2 + p])


def _weak_sides(traj: Trajectory, test: TestFunction, t: float):
    P = _pairs(traj)
    _, end = _states_until(traj, t)
    avg = test.cell_averages(traj.grid.edges)
    lhs = float(avg @ (end.numbers - traj.snapshots[0].numbers))
    H = P.h_weight(test, traj.grid.edges, traj.truncation.theta)
    rhs, dt_snap = _time_integral(traj, t, lambda N: 0.5 * P.quad(H, N))
    return lhs, rhs, dt_snap


def _scale(traj: Trajectory, test: TestFunction) -> float:
    if test.scale == "mass":
        return _initial_moment(traj, 1)
    sup = float(np.max(np.abs(test(traj.grid.pivots))))
    return _initial_moment(traj, 0) * (sup if sup > 0 else 1.0)


# -- identities -------------------------------------------------------------
#
# Volume integrals of omega against the state integrate omega exactly over
# each cell (the state holds cell averages); collision integrals use the
# midpoint rule at pivot pairs.  Evaluating a discontinuous omega at the
# pivots alone would make the residual depend at first order on where the
# jump falls inside its cell.


def weak_form_residual(traj: Trajectory, test: TestFunction, t: float,
                       tol: float | None = None) -> Residual:
    """int (g(t) - g_in) omega  versus  1/2 int_0^t int int H K g g."""
    lhs, rhs, dt_snap = _weak_sides(traj, test, t)
    return _finish(f"weak_form[{test.name}]", traj, t, lhs, rhs, _scale(traj, test), dt_snap, tol)


def mass_balance_finite_q(traj: Trajectory, q: float, t: float, tol: float | None = None) -> Residual:
    """Mass below ``q``: its change versus the flux of pairs whose sum reaches ``q``.

    lhs = int_0^q zeta (g(t) - g(0)),
    rhs = -int_0^t int_0^q int_{q - zeta}^inf zeta K g g  (the weak form with
    omega = zeta chi(0, q)).  ``sign_ok`` reports lhs <= 0.
    """
    if not 0 < q <= traj.grid.hi * (1 + 1e-12):
        raise DomainError(f"q must lie in (0, grid max], got {q}")
    test = mass_below(q)
    lhs, rhs, dt_snap = _weak_sides(traj, test, t)
    scale = _initial_moment(traj, 1)
    # allowance for round-off in a quantity that is exactly 0 for conservative runs
    sign_ok = lhs <= 1e-12 * scale
    return _finish(f"mass_balance(q={q:g})", traj, t, lhs, rhs, scale, dt_snap, tol, sign_ok)


def tail_identity(traj: Trajectory, q: float, t: float, tol: float | None = None) -> Residual:
    """Number above ``q``: its change versus coalescence into and within the tail.

    lhs = int_q^inf (g(t) - g(0)),
    rhs = -1/2 int int_{>=q} int_{>=q} K g g + 1/2 int int_{<q} int_{q-zeta}^{q} K g g
    (the weak form with omega = chi[q, inf)).
    """
    test = indicator_above(q)
    lhs, rhs, dt_snap = _weak_sides(traj, test, t)
    return _finish(f"tail(q={q:g})", traj, t, lhs, rhs, _initial_moment(traj, 0), dt_snap, tol)


def tail_brackets(traj: Trajectory, q: float, t: float) -> tuple[float, float]:
    """q * int_0^t of the two collision integrals of the tail identity.

    Returns (q * inflow, q * within-tail); both vanish as q grows for a
    mass-conserving solution.
    """
    P = _pairs(traj)
    both_above = ((P.Z >= q) & (P.E >= q)).astype(float)
    into = ((P.Z < q) & (P.E < q) & (P.E >= q - P.Z)).astype(float)
    a, _ = _time_integral(traj, t, lambda N: P.quad(into, N))
    b, _ = _time_integral(traj, t, lambda N: P.quad(both_above, N))
    return q * a, q * b


# -- explicit constants -----------------------------------------------------


def gamma_constant(I1: float, sigma1_second_at_0: float, sigma1_at_1: float,
                   B: float, k: float, T: float) -> float:
    """[I1 + (sigma1''(0) + sigma1(1)) B] exp(4 k B T)."""
    return (I1 + (sigma1_second_at_0 + sigma1_at_1) * B) * math.exp(4.0 * k * B * T)


def l1_constant(I2: float, k: float, lam: float, beta: float, B: float, T: float) -> float:
    """I2 exp(2 k lam^(1 + 2 beta) B T)."""
    return I2 * math.exp(2.0 * k * lam ** (1.0 + 2.0 * beta) * B * T)


def l2_constant(k: float, B: float, lam: float, beta: float) -> float:
    """k B^2 (2 + 2 lam^(1 + beta) + lam^(1 + 2 beta)) lam^beta."""
    return k * B * B * (2.0 + 2.0 * lam ** (1.0 + beta) + lam ** (1.0 + 2.0 * beta)) * lam**beta


def _quad_0_inf(f: Callable[[float], float]) -> float:
    a = integrate.quad(f, 0.0, 1.0, limit=400)[0]
    b = integrate.quad(f, 1.0, np.inf, limit=400)[0]
    return a + b


def initial_norm(density: Density | Callable, beta: float) -> float:
    """int_0^inf (zeta^(-2 beta) + zeta) g_in(zeta) d zeta by adaptive quadrature."""
    return _quad_0_inf(lambda z: (z ** (-2 * beta) + z) * float(density(z)))


@dataclass(frozen=True)
class BoundCheck:
    name: str
    constant: float
    observed: float
    tolerance: float
    passed: bool


@dataclass
class BoundReport:
    """Explicit constants next to the matching observed trajectory quantities."""

    I1: float
    I2: float
    B: float
    k: float
    beta: float
    lam: float
    T: float
    checks: dict[str, BoundCheck] = field(default_factory=dict)

    @property
    def Gamma_T(self) -> float:
        return self.checks["sigma1_moment"].constant

    @property
    def L1_lambda_T(self) -> float:
        return self.checks["sigma2_integrability"].constant

    @property
    def L2_lambda(self) -> float:
        return self.checks["equicontinuity"].constant

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("I1", "I2", "B", "k", "beta", "lam", "T")}
        d["checks"] = {name: asdict(c) for name, c in self.checks.items()}
        d["passed"] = self.passed
        return d

    def format_table(self) -> str:
        lines = [f"B = {self.B:.6g}   I1 = {self.I1:.6g}   I2 = {self.I2:.6g}   "
                 f"k = {self.k:g}   beta = {self.beta:.6g}   lambda = {self.lam:g}   T = {self.T:g}",
                 f"{'check':<22}{'observed':>16}{'bound':>16}  result"]
        for c in self.checks.values():
            lines.append(f"{c.name:<22}{c.observed:>16.6g}{c.constant:>16.6g}  "
                         f"{'pass' if c.passed else 'FAIL'}")
        return "\n".join(lines)


@dataclass(frozen=True)
class EquicontinuityResult:
    max_quotient: float
    L2: float
    passed: bool


def equicontinuity_modulus(traj: Trajectory, lam: float, B: float | None = None,
                           k: float | None = None) -> EquicontinuityResult:
    """Largest snapshot difference quotient of int_0^lam zeta^-beta |g(t2) - g(t1)|.

    Cells count as inside (0, lam) when their pivot is below ``lam``.
    """
    snaps = traj.snapshots
    if len(snaps) < 2:
        raise DomainError("need at least two snapshots")
    if not 1 < lam < traj.truncation.n:
        raise DomainError(f"lambda must lie in (1, n), got {lam}")
    beta = traj.beta
    g = traj.grid
    weight = np.where(g.pivots < lam, g.pivots ** (-beta) * g.widths, 0.0)
    best = 0.0
    for a, b in zip(snaps[:-1], snaps[1:]):
        num = float(weight @ np.abs(b.values - a.values))
        dt = b.time - a.time
        if dt > 0:
            best = max(best, num / dt)
        elif num > 0:
            best = math.inf
    if B is None:
        B = _discrete_norm(traj, 0)
    k = traj.kernel.k_bound if k is None else k
    L2 = l2_constant(k, B, lam, beta)
    return EquicontinuityResult(best, L2, best <= L2)


def _discrete_norm(traj: Trajectory, row: int) -> float:
    return float(traj.moments[row, 0] + traj.moments[row, 3])


def check_apriori_bounds(traj: Trajectory, weights: Sequence[ConvexWeight], lam: float,
                         T: float | None = None, *, density: Density | Callable | None = None,
                         k: float | None = None, rtol: float = 1e-6) -> BoundReport:
    """Evaluate the explicit a priori constants and test the trajectory against them.

    With ``density`` the constants B, I1, I2 are integrals of the continuous
    initial density over (0, inf); otherwise they are evaluated on the
    trajectory's initial state.
    """
    sigma1, sigma2 = weights
    beta = traj.beta
    for w in (sigma1, sigma2):
        if w.beta is not None and not math.isclose(w.beta, beta, rel_tol=1e-12):
            raise DomainError(f"weight {w.name} was built for beta={w.beta}, trajectory has {beta}")
    if not lam > 1:
        raise DomainError("lambda must exceed 1")
    T = float(traj.snapshots[-1].time) if T is None else float(T)
    if traj.snapshots[-1].time < T * (1 - 1e-12):
        raise DomainError(f"trajectory ends at {traj.snapshots[-1].time}, before T={T}")
    k = traj.kernel.k_bound if k is None else k

    g = traj.grid
    x, w = g.pivots, g.widths
    init = traj.snapshots[0]
    if density is not None:
        B = initial_norm(density, beta)
        I1 = _quad_0_inf(lambda z: float(sigma1(z)) * float(density(z)))
        I2 = _quad_0_inf(lambda z: float(sigma2(z ** (-beta) * float(density(z)))))
    else:
        B = _discrete_norm(traj, 0)
        I1 = float(sigma1(x) @ init.numbers)
        I2 = float(sigma2(x ** (-beta) * init.values) @ w)

    Gamma = gamma_constant(I1, sigma1.sigma_second_at_0, float(sigma1(1.0)), B, k, T)
    L1 = l1_constant(I2, k, lam, beta, B, T)

    within = traj.times <= T * (1 + 1e-12)
    snaps = [s for s in traj.snapshots if s.time <= T * (1 + 1e-12)]
    norm_obs = float(np.max(traj.moments[within, 0] + traj.moments[within, 3]))
    m2b = traj.moments[within, 0]
    sig1_obs = max(float(sigma1(x) @ s.numbers) for s in snaps)
    inside = x < lam
    sig2_obs = max(float(sigma2(x[inside] ** (-beta) * s.values[inside]) @ w[inside]) for s in snaps)
    eq = equicontinuity_modulus(traj, lam, B=B, k=k) if 1 < lam < traj.truncation.n else None

    report = BoundReport(I1=I1, I2=I2, B=B, k=k, beta=beta, lam=lam, T=T)

    def add(name, constant, observed):
        report.checks[name] = BoundCheck(name, float(constant), float(observed), rtol,
                                         bool(observed <= constant * (1 + rtol)))

    add("norm_B", B, norm_obs)
    add("small_volume_moment", m2b[0], float(np.max(m2b)))
    add("sigma1_moment", Gamma, sig1_obs)
    add("sigma2_integrability", L1, sig2_obs)
    if eq is not None:
        add("equicontinuity", eq.L2, eq.max_quotient)
    return report
