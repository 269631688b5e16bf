"""Uncertain-volatility pricer tests: payoff, the G map, and the backward
dynamic program against closed-form references."""
import math

import numpy as np
import pytest

from rawbfst import oracle, uvmpricer


def test_config_validation():
    with pytest.raises(ValueError):
        uvmpricer.UvmConfig(sigma_l=0.2, sigma_r=0.15)
    with pytest.raises(ValueError):
        uvmpricer.UvmConfig(strike_low=110.0, strike_high=90.0)
    with pytest.raises(ValueError):
        uvmpricer.UvmConfig(n_steps=0)
    assert uvmpricer.UvmConfig(n_steps=16).delta == pytest.approx(1.0 / 16.0)


def test_payoff_saturation_and_kink():
    cfg = uvmpricer.UvmConfig()
    assert uvmpricer.call_spread_payoff(-40.0, cfg) == pytest.approx(0.0, abs=1e-12)
    assert uvmpricer.call_spread_payoff(40.0, cfg) == pytest.approx(20.0, abs=1e-9)
    # x where the stock hits the lower strike: payoff exactly 0 there.
    x_kink = (math.log(cfg.strike_low / cfg.s0) + 0.5 * cfg.sigma_r**2) / cfg.sigma_r
    assert uvmpricer.call_spread_payoff(x_kink, cfg) == pytest.approx(0.0, abs=1e-9)
    # Direct substitution at x = 0.
    spot = cfg.s0 * math.exp(-0.5 * cfg.sigma_r**2)
    assert uvmpricer.call_spread_payoff(0.0, cfg) == pytest.approx(
        max(spot - 90.0, 0.0) - max(spot - 110.0, 0.0)
    )
    # Nondecreasing in x.
    xs = np.linspace(-10, 10, 101)
    vals = uvmpricer.call_spread_payoff(xs, cfg)
    assert np.all(np.diff(vals) >= -1e-12)


def test_g_combine_degenerate_and_tie():
    flat = uvmpricer.UvmConfig(sigma_l=0.15, sigma_h=0.15, sigma_r=0.15)
    assert uvmpricer.g_combine(3.0, -2.0, 5.0, 0.1, flat) == pytest.approx(3.0)
    cfg = uvmpricer.UvmConfig()
    # Tie z2 = sigma_r*z1: the factor (z2 - sigma_r z1) vanishes.
    assert uvmpricer.g_combine(1.5, 2.0, 0.15 * 2.0, 0.1, cfg) == pytest.approx(1.5)


def test_g_combine_arithmetic():
    cfg = uvmpricer.UvmConfig()
    want = 1.0 + 0.05 * 1.0 * (0.04 / 0.0225 - 1.0)
    assert uvmpricer.g_combine(1.0, 0.0, 1.0, 0.1, cfg) == pytest.approx(want, rel=1e-12)
    assert want == pytest.approx(1.0389, abs=1e-4)
    # Sign switch with the gap: low branch when z2 <= sigma_r z1.
    low = uvmpricer.g_combine(0.0, 0.0, -1.0, 0.1, cfg)
    assert low == pytest.approx(0.05 * (-1.0) * (0.01 / 0.0225 - 1.0), rel=1e-12)
    assert low > 0.0


def test_price_deterministic():
    cfg = uvmpricer.UvmConfig(n_steps=8)
    reg = uvmpricer.UvmRegressionParams(c1_paths=10.0)
    assert uvmpricer.price(cfg, reg, 21) == uvmpricer.price(cfg, reg, 21)
    assert uvmpricer.price(cfg, reg, 21) != uvmpricer.price(cfg, reg, 22)


def test_price_degenerate_matches_black_scholes():
    # sigma_l = sigma_h = sigma_r: G is the identity on z0, so the scheme
    # iterates conditional expectations of y_N(W_T) and should converge to
    # the reference-vol spread price. The per-step regression still biases
    # each finite-step price (visibly so at 16 steps), so the check runs at
    # 64 steps where the bias is within the replicate noise.
    cfg = uvmpricer.UvmConfig(sigma_l=0.15, sigma_h=0.15, sigma_r=0.15, n_steps=64)
    reg = uvmpricer.UvmRegressionParams(c1_paths=74.07)
    bs = oracle.black_scholes_call(100.0, 90.0, 0.15, 1.0) - oracle.black_scholes_call(
        100.0, 110.0, 0.15, 1.0
    )
    prices = [uvmpricer.price(cfg, reg, (31, rep)) for rep in range(8)]
    mean = float(np.mean(prices))
    std = float(np.std(prices, ddof=1))
    assert abs(mean - bs) < 3.0 * max(std, 1e-3)


def test_price_bounds():
    cfg = uvmpricer.UvmConfig(n_steps=8)
    reg = uvmpricer.UvmRegressionParams(c1_paths=10.0)
    for rep in range(3):
        p = uvmpricer.price(cfg, reg, (41, rep))
        assert -0.5 <= p <= 20.5


def test_uvm_sample_count_formula():
    reg = uvmpricer.UvmRegressionParams(c1_paths=74.07)
    assert reg.n_samples(1.0 / 16.0) == math.ceil(3.0 * 74.07 * math.log(16.0))
    reg10 = uvmpricer.UvmRegressionParams(c1_paths=10.0)
    assert reg10.n_samples(1.0 / 64.0) == math.ceil(30.0 * math.log(64.0))
