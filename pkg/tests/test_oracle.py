"""Oracle self-tests: the brute-force references must agree with closed
forms and with each other before they can referee the production code."""
import math

import numpy as np
import pytest

from rawbfst import numkernel, oracle, rng
from rawbfst.algorithm import EulerModel, NumericalError


def test_mc_constant_target_unit_weight():
    model = EulerModel.constant(dim=1)
    stream = rng.substream(rng.ORACLE_NAMESPACE, 1)
    est = oracle.mc_weighted_conditional(
        lambda pts: np.ones(len(pts)), model, (0,), 0.1, 0.0, 1000, stream
    )
    assert est.mean == 1.0
    assert est.stderr == 0.0
    assert est.n == 1000


def test_mc_first_derivative_of_linear_target():
    # The first-order weight extracts the slope of a linear target exactly
    # in expectation (integration by parts).
    model = EulerModel.constant(dim=1)
    stream = rng.substream(rng.ORACLE_NAMESPACE, 2)
    est = oracle.mc_weighted_conditional(
        lambda pts: 3.0 * np.asarray(pts)[:, 0] + 2.0, model, (1,), 0.25, 0.4, 200_000, stream
    )
    assert abs(est.mean - 3.0) < 4.0 * est.stderr


def test_mc_second_derivative_matches_closed_form():
    model = EulerModel.constant(dim=1)
    stream = rng.substream(rng.ORACLE_NAMESPACE, 3)
    delta = 1.0 / 16.0
    est = oracle.mc_weighted_conditional(
        lambda pts: oracle.smooth_target(np.asarray(pts)[:, 0]),
        model, (2,), delta, 0.0, 400_000, stream,
    )
    want = float(oracle.closed_form_z(0.0, delta))
    assert abs(est.mean - want) < 4.0 * est.stderr


def test_mc_requires_two_samples():
    model = EulerModel.constant(dim=1)
    with pytest.raises(ValueError):
        oracle.mc_weighted_conditional(
            lambda pts: np.ones(len(pts)), model, (0,), 0.1, 0.0, 1,
            rng.substream(rng.ORACLE_NAMESPACE, 4),
        )


def test_closed_forms_at_zero():
    assert float(oracle.y_second_derivative(0.0)) == pytest.approx(2.0)
    assert float(oracle.closed_form_z(0.0, 0.0)) == pytest.approx(2.0)
    assert float(oracle.smooth_target(0.0)) == 0.0
    assert float(oracle.smooth_target(1.0)) == pytest.approx(math.exp(-0.5))


def test_closed_form_z_converges_at_rate_delta():
    # |z(x, Delta) - y''(x)| should scale linearly in Delta.
    for x in (0.0, 1.0, -1.0):
        gap1 = abs(float(oracle.closed_form_z(x, 1e-3)) - float(oracle.y_second_derivative(x)))
        gap2 = abs(float(oracle.closed_form_z(x, 5e-4)) - float(oracle.y_second_derivative(x)))
        assert gap1 / gap2 == pytest.approx(2.0, rel=0.05)


def test_quad_normal_mass_and_fourth_moment():
    val, err = oracle.quad_weighted_expectation(lambda x: 1.0, "std_normal", 1e-12)
    assert val == pytest.approx(1.0, abs=1e-12)
    val, _ = oracle.quad_weighted_expectation(lambda x: x**4, "std_normal", 1e-10)
    assert val == pytest.approx(3.0, abs=1e-9)


def test_quad_truncated_matches_moment_recursion():
    r = 2.0
    table = numkernel.truncated_moments(6, r)
    val, _ = oracle.quad_weighted_expectation(
        lambda x: x**6, "truncated_normal", tolerance=1e-11, r=r
    )
    assert val == pytest.approx(table[6], abs=1e-10)


def test_quad_rejects_bad_inputs():
    with pytest.raises(ValueError):
        oracle.quad_weighted_expectation(lambda x: 1.0, "cauchy", 1e-8)
    with pytest.raises(ValueError):
        oracle.quad_weighted_expectation(lambda x: 1.0, "truncated_normal", 1e-8)


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_quad_reports_nonconvergence():
    # A needle the adaptive rule cannot certify at an absurd tolerance.
    with pytest.raises(NumericalError):
        oracle.quad_weighted_expectation(
            lambda x: math.tanh(1e8 * (x - math.pi / 10.0)), "std_normal", tolerance=1e-16
        )


def test_black_scholes_call_sanity():
    # Monotone in spot, above intrinsic value, and put-call-parity-consistent
    # via the forward: C(K1) - C(K2) bounded by the strike gap.
    c90 = oracle.black_scholes_call(100.0, 90.0, 0.15, 1.0)
    c110 = oracle.black_scholes_call(100.0, 110.0, 0.15, 1.0)
    assert c90 > 10.0 and c90 < 100.0
    assert 0.0 < c90 - c110 < 20.0
    assert oracle.black_scholes_call(100.0, 90.0, 1e-12, 1.0) == pytest.approx(10.0, abs=1e-6)
