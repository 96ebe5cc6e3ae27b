"""Superlinear convex weights used for uniform-integrability bounds.

A weight sigma is convex on [0, inf) with sigma(0) = sigma'(0) = 0, a concave
non-decreasing derivative and sigma(x)/x -> inf.  :func:`build_vallee_poussin`
constructs one adapted to given data so that the weighted integral stays
finite; :func:`quadratic_weight` is the closed-form x**2 used as a checker
self-test.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DataError, DomainError
from .grid import DistributionState

__all__ = [
    "ConvexWeight",
    "build_vallee_poussin",
    "quadratic_weight",
    "check_weight_properties",
    "WeightPropertyReport",
]


@dataclass(frozen=True)
class ConvexWeight:
    """A weight sigma with its derivative and its curvature at 0.

    ``beta`` records the singularity exponent a weight was built for (the
    ``sigma2`` mode composes it with ``zeta**-beta * g``); ``None`` means
    the weight is not tied to a kernel.
    """

    sigma: Callable[[np.ndarray], np.ndarray]
    sigma_prime: Callable[[np.ndarray], np.ndarray]
    sigma_second_at_0: float
    name: str = "sigma"
    beta: float | None = None
    knots: np.ndarray | None = None

    def __call__(self, x):
        return self.sigma(x)


def quadratic_weight() -> ConvexWeight:
    return ConvexWeight(
        sigma=lambda x: np.asarray(x, dtype=float) ** 2,
        sigma_prime=lambda x: 2.0 * np.asarray(x, dtype=float),
        sigma_second_at_0=2.0,
        name="x^2",
    )


def _piecewise_weight(knots: np.ndarray, height: float, name: str, beta) -> ConvexWeight:
    """sigma' linear on each [R_k, R_{k+1}] with sigma'(R_k) = k * height."""
    R = knots
    d = np.arange(len(R), dtype=float) * height          # sigma' at knots
    L = np.diff(R)
    slope = height / L                                   # non-increasing by construction
    s = np.concatenate([[0.0], np.cumsum(L * (d[:-1] + d[1:]) / 2.0)])

    def locate(x):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise DomainError("weights are defined on [0, inf)")
        k = np.clip(np.searchsorted(R, x, side="right") - 1, 0, len(L) - 1)
        return x, k, x - R[k]

    def sigma_prime(x):
        x, k, u = locate(x)
        return d[k] + slope[k] * u

    def sigma(x):
        x, k, u = locate(x)
        return s[k] + d[k] * u + 0.5 * slope[k] * u * u

    return ConvexWeight(sigma, sigma_prime, float(slope[0]), name=name, beta=beta, knots=R)


def _tail_levels(values: np.ndarray, masses: np.ndarray, max_knots: int) -> np.ndarray:
    """Knots R_1 < R_2 < ... past which the tail integral has halved k times,
    spread so that consecutive gaps never shrink."""
    order = np.argsort(values)
    v, w = values[order], values[order] * masses[order]
    # tail[i] = integral of v over {values >= v[i]}
    tail = np.cumsum(w[::-1])[::-1]
    total = tail[0]
    vmax = v[-1]
    knots = [0.0]
    level = 1
    while knots[-1] < vmax and len(knots) < max_knots:
        # first sample at which the strict tail beyond it is below total / 2**level
        strict = np.concatenate([tail[1:], [0.0]])
        idx = int(np.argmax(strict <= total * 0.5**level))
        q = v[idx]
        gap = knots[-1] - knots[-2] if len(knots) > 1 else 0.0
        nxt = max(q, knots[-1] + gap)
        if nxt <= knots[-1]:
            nxt = knots[-1] + max(gap, vmax * 1e-12)
        knots.append(nxt)
        level += 1
    return np.array(knots)


def build_vallee_poussin(data: DistributionState, mode: str = "sigma1",
                         beta: float | None = None, *, height: float = 1.0,
                         x_max: float = 1e300) -> ConvexWeight:
    """Convex weight adapted to tabulated data.

    Modes
    -----
    ``sigma1``
        values are the volumes (pivots) weighted by cell numbers; the
        weight keeps sum sigma(x_i) N_i finite.
    ``sigma2``
        values are ``u_i = x_i**-beta * g_i`` weighted by cell widths; the
        weight keeps sum sigma(u_i) w_i finite.

    sigma' climbs by ``height`` each time the tail integral of the values
    halves; once the data are exhausted the knot gaps double, so sigma'
    grows like log(x) and sigma(x)/x is unbounded.
    """
    grid = data.grid
    if mode == "sigma1":
        values = grid.pivots
        masses = data.values * grid.widths
        wbeta = None
    elif mode == "sigma2":
        if beta is None or not beta > 0:
            raise DomainError("sigma2 mode needs beta > 0")
        values = grid.pivots ** (-beta) * data.values
        masses = grid.widths
        wbeta = beta
    else:
        raise DomainError(f"unknown mode {mode!r}; use 'sigma1' or 'sigma2'")

    integrand = values * masses
    if not np.all(np.isfinite(integrand)) or not np.isfinite(np.sum(integrand)):
        raise DataError("input is not integrable: the tail sum diverges on the grid")
    keep = integrand > 0
    if not np.any(keep):
        raise DataError("input carries no mass")
    knots = _tail_levels(values[keep], masses[keep], max_knots=4096)

    gap = knots[-1] - knots[-2]
    tail = [knots[-1]]
    while tail[-1] < x_max:
        gap *= 2.0
        tail.append(tail[-1] + gap)
    knots = np.concatenate([knots, tail[1:]])
    return _piecewise_weight(knots, height, name=f"vallee-poussin[{mode}]", beta=wbeta)


@dataclass(frozen=True)
class WeightPropertyReport:
    anchored: bool            # sigma(0) = sigma'(0) = 0
    derivative_monotone: bool
    derivative_concave: bool
    superlinear: bool         # sigma(x)/x increasing and large along x = 2**k
    prop_i: bool              # sigma <= x sigma' <= 2 sigma
    prop_ii: bool             # x sigma'(y) <= sigma(x) + sigma(y)
    prop_iii: bool            # 0 <= sigma(x+y)-sigma(x)-sigma(y) <= 2(x s(y)+y s(x))/(x+y)

    @property
    def all(self) -> bool:
        return all(vars(self).values())


def check_weight_properties(weight: ConvexWeight, rng: np.random.Generator | None = None,
                            pairs: int = 10_000, rtol: float = 1e-9,
                            lo: float = 1e-6, hi: float = 1e6) -> WeightPropertyReport:
    """Sample the weight's structural properties at random positive pairs."""
    rng = rng or np.random.default_rng(0)
    s, sp = weight.sigma, weight.sigma_prime
    x = np.exp(rng.uniform(np.log(lo), np.log(hi), pairs))
    y = np.exp(rng.uniform(np.log(lo), np.log(hi), pairs))

    def le(a, b, scale):
        return bool(np.all(a <= b + rtol * np.abs(scale)))

    anchored = float(s(0.0)) == 0.0 and float(sp(0.0)) == 0.0

    grid = np.geomspace(lo, hi, 2001)
    d = sp(grid)
    derivative_monotone = le(d[:-1], d[1:], d[1:])
    # concavity: chords lie below the graph at random midpoints
    t = rng.uniform(0, 1, pairs)
    z = t * x + (1 - t) * y
    chord = t * sp(x) + (1 - t) * sp(y)
    derivative_concave = le(chord, sp(z), sp(z))

    k = np.arange(-20, 200)
    xs = 2.0 ** k
    ratio = s(xs) / xs
    superlinear = bool(np.all(np.diff(ratio) > 0) and ratio[-1] > 2 * ratio[k == 0][0])

    sx, sy, spx, spy = s(x), s(y), sp(x), sp(y)
    prop_i = le(sx, x * spx, x * spx) and le(x * spx, 2 * sx, sx)
    prop_ii = le(x * spy, sx + sy, sx + sy)
    gap = s(x + y) - sx - sy
    big = s(x + y)
    prop_iii = le(np.zeros_like(gap), gap, big) and le(gap, 2 * (x * sy + y * sx) / (x + y), big)
    return WeightPropertyReport(anchored, derivative_monotone, derivative_concave,
                                superlinear, prop_i, prop_ii, prop_iii)
