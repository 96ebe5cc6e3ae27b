import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smoluchowski import kernels as K
from smoluchowski.errors import DomainError

volumes = st.floats(min_value=1e-6, max_value=1e6, allow_nan=False, allow_infinity=False)
BUILTINS = [K.smoluchowski(), K.granulation(1.0, 0.5), K.granulation(-0.5, 0.2), K.product(),
            K.constant(), K.additive(), K.multiplicative()]


def test_smoluchowski_equal_unit_volumes():
    assert K.eval_kernel(K.smoluchowski(), 1.0, 1.0) == pytest.approx(4.0, rel=1e-15)


def test_product_kernel_exact_cube_roots():
    assert K.eval_kernel(K.product(1 / 3), 8.0, 27.0) == pytest.approx(1 / 6, rel=1e-14)


def test_granulation_closed_form():
    assert K.eval_kernel(K.granulation(1.0, 0.5), 1.0, 4.0) == pytest.approx(2.5, rel=1e-15)


def test_smoluchowski_off_diagonal():
    a, b = 6 ** (1 / 3), 7 ** (1 / 3)
    expected = (a + b) * (1 / a + 1 / b)
    got = K.eval_kernel(K.smoluchowski(), 6.0, 7.0)
    assert got == pytest.approx(expected, rel=1e-14)
    assert got == pytest.approx(4.0026, abs=1e-4)


@pytest.mark.parametrize("z, e", [(0.0, 1.0), (1.0, -2.0), (float("nan"), 1.0)])
def test_nonpositive_volume_rejected(z, e):
    with pytest.raises(DomainError):
        K.eval_kernel(K.smoluchowski(), z, e)


def test_truncation_small_volume_cutoff():
    p = K.TruncationParams(10.0, 1)
    assert K.eval_truncated(K.smoluchowski(), p, 0.05, 1.0) == 0.0


def test_conservative_truncation_drops_large_sum():
    assert K.eval_truncated(K.smoluchowski(), K.TruncationParams(10.0, 1), 6.0, 7.0) == 0.0


def test_nonconservative_truncation_keeps_large_sum():
    got = K.eval_truncated(K.smoluchowski(), K.TruncationParams(10.0, 0), 6.0, 7.0)
    assert got == K.eval_kernel(K.smoluchowski(), 6.0, 7.0)


@pytest.mark.parametrize("n, theta", [(1.0, 1), (0.5, 0), (10.0, 2)])
def test_truncation_params_validated(n, theta):
    with pytest.raises(DomainError):
        K.TruncationParams(n, theta)


def test_boundary_points_use_open_intervals():
    p1 = K.TruncationParams(10.0, 1)
    k = K.constant()
    assert K.eval_truncated(k, p1, 0.1, 1.0) == 0.0      # zeta = 1/n
    assert K.eval_truncated(k, p1, 4.0, 6.0) == 0.0      # zeta + eta = n
    assert K.eval_truncated(k, K.TruncationParams(10.0, 0), 10.0, 1.0) == 0.0


def test_constant_kernel_audit():
    rep = K.verify_hypotheses(K.constant(1 / 3))
    assert rep.envelope_holds and rep.symmetric and rep.nonnegative


def test_smoluchowski_audit_finds_k_near_four():
    rep = K.verify_hypotheses(K.smoluchowski(), K.SampleSpec(1e-6, 1e6, 101))
    # 101 points put a sample exactly at 1, where the supremum sits
    assert rep.minimal_sampled_k == pytest.approx(4.0, rel=1e-12)
    assert rep.worst_pair == pytest.approx((1.0, 1.0), rel=1e-12)
    assert rep.envelope_holds


def test_audit_detects_asymmetry():
    k = K.Kernel("left", lambda z, e: z + 0 * e, beta=1 / 3, k_bound=10.0)
    assert K.verify_hypotheses(k).symmetric is False


def test_envelope_flag_matches_sampled_k():
    for kern in BUILTINS:
        rep = K.verify_hypotheses(kern)
        assert rep.envelope_holds == (rep.minimal_sampled_k <= kern.k_bound)


@pytest.mark.parametrize("spec", [K.SampleSpec(1e-3, 1e3, 0), K.SampleSpec(2.0, 10.0, 10)])
def test_audit_rejects_bad_samples(spec):
    with pytest.raises(DomainError):
        K.verify_hypotheses(K.constant(), spec)


@pytest.mark.parametrize("kern", [K.smoluchowski(), K.granulation(1.0, 0.5), K.product()],
                         ids=["smoluchowski", "granulation", "product"])
def test_three_regime_bound_on_audit_grid(kern):
    rep = K.verify_hypotheses(kern, K.SampleSpec(1e-6, 1e6, 100))
    assert rep.regimes_hold


def test_multiplicative_flagged_superlinear():
    kern = K.multiplicative()
    assert kern.linear_growth is False
    assert K.verify_hypotheses(kern).regimes_hold is False


@pytest.mark.parametrize("kern", BUILTINS, ids=lambda k: f"{k.name}{dict(k.params)}")
@settings(max_examples=200, deadline=None)
@given(z=volumes, e=volumes)
def test_builtin_kernels_symmetric_and_nonnegative(kern, z, e):
    a = K.eval_kernel(kern, z, e)
    assert a == K.eval_kernel(kern, e, z)
    assert a >= 0


@settings(max_examples=300, deadline=None)
@given(z=volumes, e=volumes, n=st.floats(min_value=1.5, max_value=1e5))
def test_truncation_ordering(z, e, n):
    kern = K.smoluchowski()
    full = K.eval_kernel(kern, z, e)
    t0 = K.eval_truncated(kern, K.TruncationParams(n, 0), z, e)
    t1 = K.eval_truncated(kern, K.TruncationParams(n, 1), z, e)
    assert t1 <= t0 <= full


@settings(max_examples=100, deadline=None)
@given(z=volumes, e=volumes)
def test_truncation_recovers_kernel_for_large_n(z, e):
    kern = K.granulation(0.5, 0.25)
    n = 10 * max(z + e, 1 / min(z, e))
    for theta in (0, 1):
        assert K.eval_truncated(kern, K.TruncationParams(n, theta), z, e) == K.eval_kernel(kern, z, e)


def test_granulation_parameter_checks():
    with pytest.raises(DomainError):
        K.granulation(1.5, 0.5)
    with pytest.raises(DomainError):
        K.granulation(1.0, -0.1)
    with pytest.raises(DomainError):
        K.granulation(-1.0, 0.0, beta=0.1)
    assert K.granulation(-1.0, 0.0).beta == pytest.approx(0.5)


def test_from_name():
    assert K.from_name("granulation", theta1=0.5, theta2=0.1).params["theta1"] == 0.5
    with pytest.raises(DomainError):
        K.from_name("nope")


def test_vectorised_evaluation_matches_scalar():
    z = np.geomspace(1e-3, 1e3, 7)
    out = K.eval_kernel(K.smoluchowski(), z[:, None], z[None, :])
    assert out.shape == (7, 7)
    assert out[2, 5] == K.eval_kernel(K.smoluchowski(), z[2], z[5])
    assert math.isfinite(out.max())
