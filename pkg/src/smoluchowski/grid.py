"""Geometric volume grids, initial densities and their cell averages."""
from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import DataError, DomainError

logger = logging.getLogger(__name__)

__all__ = [
    "Grid",
    "DistributionState",
    "Density",
    "build_grid",
    "project_initial",
    "weighted_norm",
    "exponential_density",
    "constant_density",
    "tabulated_density",
    "read_density_csv",
]


@dataclass(frozen=True, eq=False)
class Grid:
    """Cells [e_i, e_{i+1}] with arithmetic-midpoint pivots."""

    edges: np.ndarray
    pivots: np.ndarray
    widths: np.ndarray
    ratio: float

    @property
    def cells(self) -> int:
        return len(self.widths)

    @property
    def lo(self) -> float:
        return float(self.edges[0])

    @property
    def hi(self) -> float:
        return float(self.edges[-1])


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def build_grid(min_volume: float, max_volume: float, cells: int) -> Grid:
    """Geometric grid with edges ``min_volume * r**i``, ``r = (max/min)**(1/cells)``.

    The last edge is pinned to ``max_volume`` so that coverage checks against a
    truncation level are exact.
    """
    if not min_volume > 0:
        raise DomainError("min_volume must be positive")
    if not max_volume > min_volume:
        raise DomainError("max_volume must exceed min_volume")
    if int(cells) != cells or cells < 1:
        raise DomainError("cells must be a positive integer")
    cells = int(cells)
    r = (max_volume / min_volume) ** (1.0 / cells)
    edges = min_volume * r ** np.arange(cells + 1)
    edges[-1] = max_volume
    return Grid(
        edges=_frozen(edges),
        pivots=_frozen(0.5 * (edges[:-1] + edges[1:])),
        widths=_frozen(np.diff(edges)),
        ratio=float(r),
    )


@dataclass(frozen=True, eq=False)
class DistributionState:
    """Cell averages of the number density at one instant.

    ``values[i] * grid.widths[i]`` is the number of particles in cell ``i``.
    """

    grid: Grid
    values: np.ndarray
    time: float = 0.0
    lost_mass: float = field(default=0.0, compare=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.cells,):
            raise DataError(f"expected {self.grid.cells} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DataError("state values must be finite")
        if np.any(v < 0):
            raise DataError("state values must be non-negative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def numbers(self) -> np.ndarray:
        return self.values * self.grid.widths

    @classmethod
    def from_numbers(cls, grid: Grid, numbers, time: float = 0.0) -> "DistributionState":
        return cls(grid, np.asarray(numbers) / grid.widths, time)


@dataclass(frozen=True)
class Density:
    """An initial number density g_in(zeta) >= 0.

    ``antiderivative``, when given, is used for exact cell averages; otherwise
    cells are integrated adaptively.
    """

    func: Callable[[np.ndarray], np.ndarray]
    antiderivative: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = "density"
    support: tuple[float, float] = (0.0, np.inf)

    def __call__(self, zeta):
        return self.func(np.asarray(zeta, dtype=float))


def exponential_density(amplitude: float = 1.0, rate: float = 1.0) -> Density:
    """amplitude * exp(-rate * zeta)."""

    def func(z):
        return amplitude * np.exp(-rate * z)

    def anti(z):
        return -amplitude / rate * np.exp(-rate * z)

    return Density(func, anti, name=f"exponential(a={amplitude}, r={rate})")


def constant_density(value: float) -> Density:
    if value < 0:
        raise DataError("density must be non-negative")

    def func(z):
        return np.full(np.shape(z), float(value))

    def anti(z):
        return value * np.asarray(z, dtype=float)

    return Density(func, anti, name=f"constant({value})")


def tabulated_density(volumes, densities) -> Density:
    """Interpolate log(density) linearly in volume; zero outside the table.

    Segments touching a zero entry fall back to plain linear interpolation.
    """
    v = np.asarray(volumes, dtype=float)
    d = np.asarray(densities, dtype=float)
    if v.ndim != 1 or v.shape != d.shape or len(v) < 2:
        raise DataError("tabulated density needs two equal-length columns with >= 2 rows")
    if np.any(np.diff(v) <= 0) or v[0] <= 0:
        raise DataError("tabulated volumes must be positive and strictly increasing")
    if np.any(d < 0) or not np.all(np.isfinite(d)):
        raise DataError("tabulated densities must be finite and non-negative")

    def func(z):
        z = np.asarray(z, dtype=float)
        j = np.clip(np.searchsorted(v, z, side="right") - 1, 0, len(v) - 2)
        v0, v1, d0, d1 = v[j], v[j + 1], d[j], d[j + 1]
        s = (z - v0) / (v1 - v0)
        positive = (d0 > 0) & (d1 > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            logv = np.exp(np.log(np.where(positive, d0, 1.0)) * (1 - s)
                          + np.log(np.where(positive, d1, 1.0)) * s)
        out = np.where(positive, logv, d0 * (1 - s) + d1 * s)
        return np.where((z >= v[0]) & (z <= v[-1]), out, 0.0)

    return Density(func, None, name="tabulated", support=(float(v[0]), float(v[-1])))


def read_density_csv(path: str | Path) -> Density:
    """Read a two-column (volume, density) CSV; a non-numeric header row is skipped."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                if rows:
                    raise DataError(f"non-numeric row in {path}: {row}") from None
    if not rows:
        raise DataError(f"no data rows in {path}")
    arr = np.array(rows)
    return tabulated_density(arr[:, 0], arr[:, 1])


_GAUSS_NODES = 0.5 * (1.0 + np.polynomial.legendre.leggauss(5)[0])


def _cell_integrals(density: Density, edges: np.ndarray) -> np.ndarray:
    lo, hi = edges[:-1], edges[1:]
    nodes = lo[:, None] + (hi - lo)[:, None] * _GAUSS_NODES[None, :]
    if np.any(density(nodes) < 0):
        bad = nodes[density(nodes) < 0][0]
        raise DataError(f"initial density is negative at volume {bad:g}")
    if density.antiderivative is not None:
        F = density.antiderivative(edges)
        return np.maximum(np.diff(F), 0.0)
    out = np.empty(len(lo))
    for i, (a, b) in enumerate(zip(lo, hi)):
        out[i] = integrate.quad(lambda z: float(density(z)), a, b,
                                epsabs=0.0, epsrel=1e-10, limit=200)[0]
    return out


def _outside_mass(density: Density, grid: Grid) -> float:
    """Mass of the density outside the grid; ``inf`` when quadrature diverges."""
    s_lo, s_hi = density.support
    total = 0.0
    for a, b in ((s_lo, min(grid.lo, s_hi)), (max(grid.hi, s_lo), s_hi)):
        if b > a:
            with warnings.catch_warnings():
                warnings.simplefilter("error", integrate.IntegrationWarning)
                try:
                    total += integrate.quad(lambda z: z * float(density(z)), a, b, limit=200)[0]
                except integrate.IntegrationWarning:
                    return math.inf
    return total


def project_initial(density: Density | Callable, grid: Grid) -> DistributionState:
    """Cell averages of ``density`` at time 0.

    Mass of the density lying outside [e_0, e_N] is dropped; the amount is
    logged and kept on the returned state as ``lost_mass``.
    """
    if not isinstance(density, Density):
        density = Density(density)
    values = _cell_integrals(density, grid.edges) / grid.widths
    lost = _outside_mass(density, grid)
    if lost > 0:
        logger.warning("initial density outside [%g, %g] dropped; lost mass %.3e",
                       grid.lo, grid.hi, lost)
    return DistributionState(grid, values, 0.0, lost_mass=lost)


def weighted_norm(state: DistributionState, exponent: float) -> float:
    """Midpoint-rule moment sum_i x_i^p g_i w_i."""
    g = state.grid
    return float(np.sum(g.pivots**exponent * state.values * g.widths))
