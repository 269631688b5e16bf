"""Independent brute-force references used only by tests and validation.

Monte Carlo conditional expectations with derivative weights, quadrature
expectations, and the closed forms of the smooth one-dimensional benchmark
target. None of this is imported by the production fit/evaluate path, and
the oracle RNG namespace is disjoint from the production one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from . import numkernel
from .algorithm import EulerModel, NumericalError
from .polyalg import MultivariatePolynomial


@dataclass(frozen=True)
class OracleEstimate:
    """Monte Carlo mean with its standard error."""

    mean: float
    stderr: float
    n: int


def mc_weighted_conditional(
    y: Callable,
    model: EulerModel,
    iota: tuple[int, ...],
    delta: float,
    x,
    n: int,
    rng: np.random.Generator,
    r2: float | None = None,
) -> OracleEstimate:
    """Plain-average estimate of the derivative-weighted conditional expectation.

    Draws n innovations at the fixed conditioning point x, optionally
    clipped at +-r2, and averages the Hermite weight times y at the Euler
    image. y must accept an (n, dim) array.
    """
    if n < 2:
        raise ValueError(f"need n >= 2 samples, got {n}")
    iota = tuple(int(i) for i in iota)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xi = rng.standard_normal((n, model.dim))
    if r2 is not None:
        np.clip(xi, -r2, r2, out=xi)
    starts = np.broadcast_to(x, (n, model.dim))
    images = model.euler_step(starts, xi, delta)
    order = sum(iota)
    weights = np.full(n, delta ** (-order / 2.0))
    for d, q in enumerate(iota):
        if q:
            weights = weights * numkernel.hermite_value(q, xi[:, d])
    vals = weights * np.asarray(y(images), dtype=float)
    mean = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / math.sqrt(n))
    return OracleEstimate(mean=mean, stderr=stderr, n=n)


def smooth_target(x):
    """Benchmark target y(x) = x^2 exp(-x^2/2)."""
    x = np.asarray(x, dtype=float)
    return np.square(x) * np.exp(-0.5 * np.square(x))


def y_second_derivative(x):
    """y''(x) = (x^4 - 5x^2 + 2) exp(-x^2/2) for the benchmark target."""
    x = np.asarray(x, dtype=float)
    x2 = np.square(x)
    return (x2 * x2 - 5.0 * x2 + 2.0) * np.exp(-0.5 * x2)


def closed_form_z(x, delta: float):
    """Exact weighted conditional expectation for the benchmark target.

    z(x) = (x^4 - (5 + 4*Delta - Delta^2) x^2 + 2 + 3*Delta - Delta^3)
           / (1 + Delta)^{9/2} * exp(-x^2 / (2 (1 + Delta))).
    At Delta = 0 this reduces to y''(x).
    """
    if delta < 0.0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    x = np.asarray(x, dtype=float)
    x2 = np.square(x)
    num = x2 * x2 - (5.0 + 4.0 * delta - delta**2) * x2 + 2.0 + 3.0 * delta - delta**3
    return num / (1.0 + delta) ** 4.5 * np.exp(-x2 / (2.0 * (1.0 + delta)))


def black_scholes_call(spot: float, strike: float, sigma: float, maturity: float) -> float:
    """Zero-rate Black-Scholes call price; reference for the degenerate-volatility check."""
    if sigma <= 0.0 or maturity <= 0.0:
        return max(spot - strike, 0.0)
    vol = sigma * math.sqrt(maturity)
    d1 = (math.log(spot / strike) + 0.5 * vol * vol) / vol
    d2 = d1 - vol
    return spot * float(numkernel.std_normal_cdf(d1)) - strike * float(
        numkernel.std_normal_cdf(d2)
    )


def quad_weighted_expectation(
    p: MultivariatePolynomial | Callable,
    density: str = "std_normal",
    tolerance: float = 1e-10,
    r: float | None = None,
) -> tuple[float, float]:
    """Quadrature expectation of p under the chosen 1D density.

    density is "std_normal" or "truncated_normal" (requires r; the clipped
    variable [u]_r, so the atoms at +-r are included). Returns the value
    and the achieved absolute-error estimate; raises NumericalError when
    the error estimate exceeds the requested tolerance.
    """
    f = p if callable(p) else (lambda x: p((x,)))

    def integrand(x: float) -> float:
        return f(x) * math.exp(-0.5 * x * x) / numkernel.SQRT_2PI

    if density == "std_normal":
        val, err = integrate.quad(
            integrand, -np.inf, np.inf, epsabs=tolerance / 4.0, epsrel=0.0, limit=400
        )
    elif density == "truncated_normal":
        if r is None or r <= 0.0:
            raise ValueError("truncated_normal density requires r > 0")
        val, err = integrate.quad(
            integrand, -r, r, epsabs=tolerance / 4.0, epsrel=0.0, limit=400
        )
        tail = float(numkernel.std_normal_sf(r))
        val += tail * (f(r) + f(-r))
        err += 2.0 * abs(tail) * 1e-15 * (abs(f(r)) + abs(f(-r)))
    else:
        raise ValueError(f"unknown density descriptor {density!r}")
    if err > tolerance:
        raise NumericalError(
            f"quadrature error estimate {err} exceeds requested tolerance {tolerance}"
        )
    return float(val), float(err)
