"""Coagulation kernels, their growth envelope, and the truncated rate.

A kernel is stored as a vectorised callable ``func(zeta, eta)`` together with
the pair ``(beta, k_bound)`` of its growth envelope

    rate(zeta, eta) <= k_bound * phi(zeta) * phi(eta),
    phi(x) = max(x**-beta, x).

Built-in kernels
----------------
``smoluchowski``   Brownian kernel (x^1/3 + y^1/3)(x^-1/3 + y^-1/3), beta = 1/3.
``granulation``    (x + y)^theta1 / (x y)^theta2 with theta1 <= 1, theta2 >= 0.
``product``        stirred-froth kernel (x y)^-beta.
``constant``       rate 1 (oracle kernel).
``additive``       x + y (oracle kernel).
``multiplicative`` x y (oracle kernel; grows superlinearly and gels).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import DomainError

__all__ = [
    "Kernel",
    "TruncationParams",
    "HypothesisReport",
    "SampleSpec",
    "eval_kernel",
    "eval_truncated",
    "verify_hypotheses",
    "envelope",
    "smoluchowski",
    "granulation",
    "product",
    "constant",
    "additive",
    "multiplicative",
    "from_name",
    "KERNELS",
]


@dataclass(frozen=True)
class Kernel:
    """A coagulation rate with its declared growth envelope.

    ``linear_growth`` is ``False`` for kernels known to violate the linear
    bound on (1, inf)^2 (the multiplicative kernel); such kernels are only
    meant for gelation stress tests.
    """

    name: str
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    beta: float
    k_bound: float
    params: Mapping[str, float] = field(default_factory=dict)
    linear_growth: bool = True

    def __post_init__(self):
        if not self.beta > 0:
            raise DomainError(f"beta must be positive, got {self.beta}")
        if not self.k_bound > 0:
            raise DomainError(f"k_bound must be positive, got {self.k_bound}")

    def __call__(self, zeta, eta):
        return eval_kernel(self, zeta, eta)


@dataclass(frozen=True)
class TruncationParams:
    """Truncation level ``n`` (> 1, real allowed) and mode ``theta`` in {0, 1}.

    ``theta = 1`` is the conservative approximation, ``theta = 0`` the
    non-conservative one.
    """

    n: float
    theta: int

    def __post_init__(self):
        if not self.n > 1:
            raise DomainError(f"truncation level must exceed 1, got {self.n}")
        if self.theta not in (0, 1):
            raise DomainError(f"theta must be 0 or 1, got {self.theta}")


@dataclass(frozen=True)
class SampleSpec:
    """Log-spaced audit grid: ``count`` points per axis in [lo, hi]."""

    lo: float = 1e-6
    hi: float = 1e6
    count: int = 100

    def points(self) -> np.ndarray:
        return np.geomspace(self.lo, self.hi, self.count)


@dataclass(frozen=True)
class HypothesisReport:
    symmetric: bool
    nonnegative: bool
    envelope_holds: bool
    minimal_sampled_k: float
    worst_pair: tuple[float, float]
    # three-regime form of the growth hypothesis; stricter than the envelope
    # on (1, inf)^2 where it asks for k (x + y) instead of k x y
    regimes_hold: bool = True
    minimal_regime_k: float = 0.0


def _check_volumes(zeta, eta):
    zeta = np.asarray(zeta, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if np.any(~(zeta > 0)) or np.any(~(eta > 0)):
        raise DomainError("kernel arguments must be positive volumes")
    return zeta, eta


def eval_kernel(kernel: Kernel, zeta, eta):
    """Evaluate ``kernel`` at positive volumes; scalars in, scalar out."""
    z, e = _check_volumes(zeta, eta)
    out = kernel.func(z, e)
    if np.ndim(out) == 0:
        return float(out)
    return out


def truncation_factor(params: TruncationParams, zeta, eta):
    """Indicator factor of the truncated kernel, open intervals throughout."""
    n = params.n
    zeta = np.asarray(zeta, dtype=float)
    eta = np.asarray(eta, dtype=float)
    inside = (zeta > 1.0 / n) & (zeta < n) & (eta > 1.0 / n) & (eta < n)
    if params.theta == 1:
        inside = inside & (zeta + eta < n)
    return inside.astype(float)


def eval_truncated(kernel: Kernel, params: TruncationParams, zeta, eta):
    """Rate with both volumes cut to (1/n, n) and, for theta = 1, zeta + eta < n."""
    z, e = _check_volumes(zeta, eta)
    fac = truncation_factor(params, z, e)
    rate = np.where(fac > 0, kernel.func(z, e), 0.0)
    if np.ndim(rate) == 0:
        return float(rate)
    return rate


def envelope(beta: float, zeta, eta):
    """max(x^-beta, x) * max(y^-beta, y)."""
    zeta = np.asarray(zeta, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return np.maximum(zeta**-beta, zeta) * np.maximum(eta**-beta, eta)


def _regime_bound(beta: float, zeta, eta):
    """Right-hand side of the three-regime bound with k = 1."""
    small_z = zeta < 1
    small_e = eta < 1
    return np.where(
        small_z & small_e,
        (zeta * eta) ** -beta,
        np.where(
            small_z,
            eta * zeta**-beta,
            np.where(small_e, zeta * eta**-beta, zeta + eta),
        ),
    )


def verify_hypotheses(kernel: Kernel, sample_spec: SampleSpec | None = None) -> HypothesisReport:
    """Audit symmetry, sign and growth of ``kernel`` on a log-spaced grid.

    ``minimal_sampled_k`` is the sampled supremum of rate / envelope, not a
    proven one; ``worst_pair`` says where to refine.
    """
    spec = sample_spec or SampleSpec()
    if spec.count < 1:
        raise DomainError("sample spec is empty")
    if not (0 < spec.lo < 1 < spec.hi):
        raise DomainError("sample spec must straddle 1 to cover all three regimes")
    pts = spec.points()
    Z, E = np.meshgrid(pts, pts, indexing="ij")
    rate = np.asarray(kernel.func(Z, E), dtype=float)
    rate_t = np.asarray(kernel.func(E, Z), dtype=float)

    symmetric = bool(np.array_equal(rate, rate_t))
    nonnegative = bool(np.all(rate >= 0))

    ratio = rate / envelope(kernel.beta, Z, E)
    idx = np.unravel_index(np.argmax(ratio), ratio.shape)
    k_env = float(ratio[idx])
    k_reg = float(np.max(rate / _regime_bound(kernel.beta, Z, E)))
    return HypothesisReport(
        symmetric=symmetric,
        nonnegative=nonnegative,
        envelope_holds=k_env <= kernel.k_bound,
        minimal_sampled_k=k_env,
        worst_pair=(float(Z[idx]), float(E[idx])),
        regimes_hold=k_reg <= kernel.k_bound,
        minimal_regime_k=k_reg,
    )


# -- built-in kernels -------------------------------------------------------


def _smoluchowski(z, e):
    cz, ce = np.cbrt(z), np.cbrt(e)
    return (cz + ce) * (1.0 / cz + 1.0 / ce)


def smoluchowski() -> Kernel:
    # sup of rate / envelope is 4, reached at x = y = 1
    return Kernel("smoluchowski", _smoluchowski, beta=1.0 / 3.0, k_bound=4.0)


def granulation(theta1: float = 1.0, theta2: float = 0.5, beta: float | None = None) -> Kernel:
    """(x + y)^theta1 / (x y)^theta2.

    With ``beta >= theta2 + max(0, -theta1/2)`` the envelope holds with
    ``k = max(1, 2**theta1)``.
    """
    if theta1 > 1:
        raise DomainError("granulation kernel needs theta1 <= 1")
    if theta2 < 0:
        raise DomainError("granulation kernel needs theta2 >= 0")
    beta_min = theta2 + max(0.0, -theta1 / 2.0)
    if beta is None:
        beta = beta_min if beta_min > 0 else 1.0 / 3.0
    elif beta < beta_min:
        raise DomainError(f"beta={beta} is below the admissible {beta_min}")

    def func(z, e):
        return (z + e) ** theta1 / (z * e) ** theta2

    return Kernel(
        "granulation",
        func,
        beta=beta,
        k_bound=max(1.0, 2.0**theta1),
        params={"theta1": theta1, "theta2": theta2},
    )


def product(beta: float = 1.0 / 3.0) -> Kernel:
    def func(z, e):
        return (z * e) ** -beta

    return Kernel("product", func, beta=beta, k_bound=1.0, params={"beta": beta})


def constant(beta: float = 1.0 / 3.0) -> Kernel:
    def func(z, e):
        return np.ones(np.broadcast(z, e).shape)

    return Kernel("constant", func, beta=beta, k_bound=1.0)


def additive(beta: float = 1.0 / 3.0) -> Kernel:
    def func(z, e):
        return z + e

    return Kernel("additive", func, beta=beta, k_bound=2.0)


def multiplicative(beta: float = 1.0 / 3.0) -> Kernel:
    # fits the product envelope with k = 1 but not the linear bound on (1, inf)^2
    def func(z, e):
        return z * e

    return Kernel("multiplicative", func, beta=beta, k_bound=1.0, linear_growth=False)


KERNELS = {
    "smoluchowski": smoluchowski,
    "granulation": granulation,
    "product": product,
    "constant": constant,
    "additive": additive,
    "multiplicative": multiplicative,
}


def from_name(name: str, **params) -> Kernel:
    """Build a built-in kernel from its name and keyword parameters."""
    try:
        factory = KERNELS[name]
    except KeyError:
        raise DomainError(f"unknown kernel {name!r}; choose from {sorted(KERNELS)}") from None
    return factory(**params)
