import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.special import gamma

from smoluchowski import grid as G
from smoluchowski.errors import DataError, DomainError


def test_two_cell_grid():
    g = G.build_grid(1.0, 4.0, 2)
    np.testing.assert_allclose(g.edges, [1, 2, 4], rtol=1e-15)
    np.testing.assert_allclose(g.pivots, [1.5, 3], rtol=1e-15)
    np.testing.assert_allclose(g.widths, [1, 2], rtol=1e-15)


def test_decade_ratio():
    assert G.build_grid(1e-4, 1e3, 7).ratio == pytest.approx(10.0, rel=1e-12)


@pytest.mark.parametrize("args", [(1.0, 1.0, 5), (0.0, 1.0, 5), (2.0, 1.0, 5), (1.0, 2.0, 0), (1.0, 2.0, 2.5)])
def test_degenerate_grids_rejected(args):
    with pytest.raises(DomainError):
        G.build_grid(*args)


@settings(max_examples=100, deadline=None)
@given(lo=st.floats(1e-8, 1.0), span=st.floats(1.5, 1e10), cells=st.integers(1, 500))
def test_grid_invariants(lo, span, cells):
    g = G.build_grid(lo, lo * span, cells)
    assert g.edges[0] > 0 and g.cells == cells
    assert np.all(g.edges[:-1] < g.pivots) and np.all(g.pivots < g.edges[1:])
    ratios = g.edges[1:] / g.edges[:-1]
    np.testing.assert_allclose(ratios, g.ratio, rtol=1e-10)
    assert g.edges[-1] == lo * span


def test_grid_is_immutable():
    g = G.build_grid(1.0, 4.0, 2)
    with pytest.raises(ValueError):
        g.edges[0] = 0.5


def test_exponential_cell_average_exact():
    g = G.build_grid(1.0, 4.0, 2)
    s = G.project_initial(G.exponential_density(), g)
    assert s.values[0] == pytest.approx(math.exp(-1) - math.exp(-2), rel=1e-14)
    assert s.values[0] == pytest.approx(0.23254, abs=1e-5)
    assert s.time == 0.0


def test_constant_density_projects_to_constant():
    s = G.project_initial(G.constant_density(3.5), G.build_grid(0.1, 10.0, 13))
    np.testing.assert_allclose(s.values, 3.5, rtol=1e-14)


def test_projection_without_antiderivative_uses_quadrature():
    dens = G.Density(lambda z: np.exp(-z))
    g = G.build_grid(1e-3, 50.0, 40)
    s = G.project_initial(dens, g)
    exact = (np.exp(-g.edges[:-1]) - np.exp(-g.edges[1:])) / g.widths
    np.testing.assert_allclose(s.values, exact, rtol=1e-10)


def test_negative_density_is_a_data_error():
    with pytest.raises(DataError):
        G.project_initial(G.Density(lambda z: np.sin(z)), G.build_grid(1.0, 10.0, 20))


def test_dropped_mass_is_reported(caplog):
    caplog.set_level(logging.WARNING, logger="smoluchowski.grid")
    s = G.project_initial(G.exponential_density(), G.build_grid(1e-3, 5.0, 30))
    # mass of exp(-zeta) above 5 is 6 e^-5; below 1e-3 it is ~5e-7
    assert s.lost_mass == pytest.approx(6 * math.exp(-5) + (1 - (1 + 1e-3) * math.exp(-1e-3)), rel=1e-8)
    assert "dropped" in caplog.text


def test_first_moment_on_fine_grid():
    s = G.project_initial(G.exponential_density(), G.build_grid(1e-6, 1e3, 400))
    assert 0.999 <= G.weighted_norm(s, 1) <= 1.001
    assert G.weighted_norm(s, 0) == pytest.approx(1.0, abs=1e-3)


def test_small_volume_moment_matches_gamma_third():
    # the grid misses int_0^1e-6 zeta^(-2/3) e^(-zeta), which is 3e-2 to 1e-8;
    # add it back analytically before comparing with Gamma(1/3)
    e0 = 1e-6
    s = G.project_initial(G.exponential_density(), G.build_grid(e0, 1e3, 400))
    below = 3 * e0 ** (1 / 3)
    reference = integrate.quad(lambda z: z ** (-2 / 3) * np.exp(-z), 0, 1)[0] + \
        integrate.quad(lambda z: z ** (-2 / 3) * np.exp(-z), 1, np.inf)[0]
    assert reference == pytest.approx(2.67894, abs=1e-5)
    assert reference == pytest.approx(gamma(1 / 3), rel=1e-10)
    assert G.weighted_norm(s, -2 / 3) + below == pytest.approx(reference, abs=1e-3)


def test_first_moment_converges_at_second_order():
    errs = []
    for cells in (100, 200, 400):
        s = G.project_initial(G.exponential_density(), G.build_grid(1e-6, 1e3, cells))
        errs.append(abs(G.weighted_norm(s, 1) - 1.0))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)


@settings(max_examples=50, deadline=None)
@given(i=st.integers(0, 19), bump=st.floats(1e-6, 10.0), p=st.sampled_from([-2 / 3, -1 / 3, 0, 1, 2]))
def test_moments_monotone_in_values(i, bump, p):
    g = G.build_grid(1e-2, 1e2, 20)
    s = G.project_initial(G.exponential_density(), g)
    vals = s.values.copy()
    vals[i] += bump
    assert G.weighted_norm(G.DistributionState(g, vals), p) > G.weighted_norm(s, p)


@pytest.mark.parametrize("bad", [np.array([1.0, -1.0]), np.array([1.0, np.nan]), np.ones(3)])
def test_state_validation(bad):
    with pytest.raises(DataError):
        G.DistributionState(G.build_grid(1.0, 4.0, 2), bad)


def test_tabulated_density_log_linear(tmp_path):
    path = tmp_path / "g.csv"
    path.write_text("volume,density\n1,1\n2,0.25\n4,0\n", encoding="utf-8")
    dens = G.read_density_csv(path)
    # log-linear between positive nodes: geometric mean at the midpoint
    assert float(dens(1.5)) == pytest.approx(0.5, rel=1e-12)
    # a zero node falls back to linear interpolation
    assert float(dens(3.0)) == pytest.approx(0.125, rel=1e-12)
    assert float(dens(5.0)) == 0.0 and float(dens(0.5)) == 0.0


@pytest.mark.parametrize("text", ["", "v,g\n", "1,1\n1,2\n", "1,-1\n2,1\n", "1,1\nx,2\n"])
def test_tabulated_density_rejects_bad_tables(tmp_path, text):
    path = tmp_path / "g.csv"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(DataError):
        G.read_density_csv(path)
