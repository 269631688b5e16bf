"""Call-spread pricing in the Uncertain Volatility Model.

The fully non-linear pricing PDE is discretized as a backward recursion
y_{i-1}(x) = G(z_{i-1,0}(x), z_{i-1,1}(x), z_{i-1,2}(x)) where the z's are
derivative-weighted conditional expectations of y_i along one Brownian
step. Each time step runs one localized regression of y_i and evaluates
it for the three derivative weights; the G map switches between the high
and low volatility depending on the sign of z_2 - sigma_r * z_1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import algorithm


@dataclass(frozen=True)
class UvmConfig:
    """Market and discretization parameters.

    x plays the role of the driving Brownian motion, not the stock price;
    sigma0_sq widens the effective initial variance so the partition
    around the evaluation point x = 0 does not degenerate at early steps.
    """

    s0: float = 100.0
    mu: float = 0.0
    sigma_l: float = 0.1
    sigma_h: float = 0.2
    sigma_r: float = 0.15
    maturity: float = 1.0
    strike_low: float = 90.0
    strike_high: float = 110.0
    sigma0_sq: float = 0.1
    n_steps: int = 16

    def __post_init__(self):
        if not 0.0 < self.sigma_l <= self.sigma_r <= self.sigma_h:
            raise ValueError(
                f"need 0 < sigma_l <= sigma_r <= sigma_h, got "
                f"({self.sigma_l}, {self.sigma_r}, {self.sigma_h})"
            )
        if not self.strike_low < self.strike_high:
            raise ValueError(
                f"need strike_low < strike_high, got ({self.strike_low}, {self.strike_high})"
            )
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.s0 <= 0.0 or self.maturity <= 0.0 or self.sigma0_sq <= 0.0:
            raise ValueError("s0, maturity and sigma0_sq must be > 0")

    @property
    def delta(self) -> float:
        return self.maturity / self.n_steps


def call_spread_payoff(x, cfg: UvmConfig):
    """Terminal payoff (S - K1)^+ - (S - K2)^+ with S = s0 exp((mu - sigma_r^2/2) T + sigma_r x)."""
    x = np.asarray(x, dtype=float)
    s = cfg.s0 * np.exp((cfg.mu - 0.5 * cfg.sigma_r**2) * cfg.maturity + cfg.sigma_r * x)
    out = np.maximum(s - cfg.strike_low, 0.0) - np.maximum(s - cfg.strike_high, 0.0)
    return float(out) if out.ndim == 0 else out


def g_combine(z0, z1, z2, delta: float, cfg: UvmConfig):
    """One-step non-linear combination; the tie z2 == sigma_r*z1 takes the low branch."""
    z0 = np.asarray(z0, dtype=float)
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    gap = z2 - cfg.sigma_r * z1
    ratio = np.where(gap > 0.0, cfg.sigma_h**2, cfg.sigma_l**2) / cfg.sigma_r**2
    out = z0 + 0.5 * delta * gap * (ratio - 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class UvmRegressionParams:
    """Regression constants for the pricing recursion (mixed-order defaults)."""

    q_degree: int = 4
    gamma_cube: float = 0.4
    gamma1_trunc: float = 3.0
    gamma2_trunc: float = 6.0
    c_cube: float = 2.0
    c1_trunc: float = 5.0
    c2_trunc: float = 5.0
    c1_paths: float = 74.07
    tau: float = 0.0233

    def n_samples(self, delta: float) -> int:
        return math.ceil(3.0 * self.c1_paths * math.log(1.0 / delta))


def price(cfg: UvmConfig, reg: UvmRegressionParams, seed) -> float:
    """Backward dynamic program; returns the approximate price y_0(0).

    Each step makes ONE regression fit of the current value function and
    reuses its coefficients for all three derivative weights; the value
    function is a closure over the step estimator, never a space grid.
    Deterministic in (cfg, reg, seed).
    """
    delta = cfg.delta
    n_samples = reg.n_samples(delta)

    def payoff(points: np.ndarray) -> np.ndarray:
        return call_spread_payoff(np.asarray(points, dtype=float)[:, 0], cfg)

    def closure(est: algorithm.Estimator):
        def value(points: np.ndarray) -> np.ndarray:
            pts = np.asarray(points, dtype=float)
            z0 = est.evaluate_many((0,), pts)
            z1 = est.evaluate_many((1,), pts)
            z2 = est.evaluate_many((2,), pts)
            return g_combine(z0, z1, z2, delta, cfg)

        return value

    y_current = payoff
    est = None
    for i in range(cfg.n_steps, 0, -1):
        c2_density = cfg.sigma0_sq + (i - 1) * delta
        model = algorithm.EulerModel.constant(dim=1, c2_density=c2_density)
        step_cfg = algorithm.config_from_exponents(
            model,
            delta,
            iota=(0,),
            q_degree=reg.q_degree,
            gamma_cube=reg.gamma_cube,
            gamma1_trunc=reg.gamma1_trunc,
            gamma2_trunc=reg.gamma2_trunc,
            c_cube=reg.c_cube,
            c1_trunc=reg.c1_trunc,
            c2_trunc=reg.c2_trunc,
            tau=reg.tau,
            n_samples=n_samples,
        )
        try:
            est = algorithm.fit(model, y_current, step_cfg, (seed, i))
        except Exception as exc:
            raise type(exc)(f"time step {i}: {exc}") from exc
        y_current = closure(est)

    z0 = est.evaluate((0,), 0.0)
    z1 = est.evaluate((1,), 0.0)
    z2 = est.evaluate((2,), 0.0)
    return float(g_combine(z0, z1, z2, delta, cfg))
