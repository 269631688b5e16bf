"""Least-squares Monte Carlo approximation of derivative-weighted conditional
expectations by localized noiseless regression with brute-force SVD truncation,
plus an uncertain-volatility option pricer built on top of it."""

from .algorithm import (
    ConfigurationError,
    Estimator,
    EulerModel,
    NumericalError,
    RawbfstConfig,
    c_star_paths,
    config_from_exponents,
    derive_config,
    fit,
    l2_error,
)
from .partition import CubicPartition, PartitionSizeError, build_partition
from .polyalg import BasisSpec, MultivariatePolynomial
from .svdtrunc import CubeRegression, InterpolatorConfig, interpolate_unit_cube
from .uvmpricer import UvmConfig, UvmRegressionParams, price

__version__ = "0.1.0"

__all__ = [
    "BasisSpec",
    "ConfigurationError",
    "CubeRegression",
    "CubicPartition",
    "Estimator",
    "EulerModel",
    "InterpolatorConfig",
    "MultivariatePolynomial",
    "NumericalError",
    "PartitionSizeError",
    "RawbfstConfig",
    "UvmConfig",
    "UvmRegressionParams",
    "build_partition",
    "c_star_paths",
    "config_from_exponents",
    "derive_config",
    "fit",
    "interpolate_unit_cube",
    "l2_error",
    "price",
]
