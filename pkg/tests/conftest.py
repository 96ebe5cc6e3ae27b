"""Shared trajectories.

Runs are session-scoped because several test modules certify the same
trajectory from different angles.
"""
from __future__ import annotations

import logging

import pytest

from smoluchowski import grid as G
from smoluchowski import kernels as K
from smoluchowski.solver import RunConfig, run


@pytest.fixture(autouse=True)
def _quiet_projection(caplog):
    # dropped-tail warnings from project_initial are expected on every run
    caplog.set_level(logging.ERROR, logger="smoluchowski.grid")


def constant_config(cells=400, dt=1e-3, T=2.0, snapshots=None) -> RunConfig:
    return RunConfig(K.constant(), K.TruncationParams(1e3, 1), 1e-4, 1e3, cells,
                     G.exponential_density(), T=T, dt=dt, snapshots=snapshots)


@pytest.fixture(scope="session")
def constant_run():
    """Unit constant kernel, 400 cells, dt = 1e-3, T = 2, a snapshot every step."""
    return run(constant_config())


@pytest.fixture(scope="session")
def constant_run_refined():
    """Grid spacing and step halved relative to ``constant_run``, T = 1."""
    return run(constant_config(cells=800, dt=5e-4, T=1.0))


@pytest.fixture(scope="session")
def constant_run_coarse_t1():
    """``constant_run`` settings stopped at T = 1 (pairs with the refined run)."""
    return run(constant_config(T=1.0))


def smoluchowski_config(theta: int, n: float = 1e3, snapshots=100, cells=400) -> RunConfig:
    return RunConfig(K.smoluchowski(), K.TruncationParams(n, theta), 1e-4, 1e3, cells,
                     G.exponential_density(), T=1.0, dt=1e-3, snapshots=snapshots)


@pytest.fixture(scope="session")
def smoluchowski_runs():
    """Smoluchowski kernel on 400 cells to T = 1 in both truncation modes."""
    return {th: run(smoluchowski_config(th)) for th in (0, 1)}


def multiplicative_config(T=1.0, snapshots=100) -> RunConfig:
    return RunConfig(K.multiplicative(), K.TruncationParams(1e3, 0), 1e-3, 1e3, 240,
                     G.exponential_density(), T=T, dt=1e-3, snapshots=snapshots)


@pytest.fixture(scope="session")
def multiplicative_run():
    """Multiplicative kernel, non-conservative, n = 1e3, through gelation to T = 1."""
    return run(multiplicative_config())
