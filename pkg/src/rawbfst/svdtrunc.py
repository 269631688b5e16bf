"""Noiseless least squares with brute-force SVD truncation.

Either the full minimum-norm least-squares solution is kept (when the
smallest singular value squared of the design matrix clears the threshold
tau * L) or every coefficient is set to zero. Includes the piecewise
Legendre interpolator on the unit cube built from per-cell fits.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .polyalg import BasisSpec


@dataclass(frozen=True)
class CubeRegression:
    coeffs: np.ndarray  # length K; all zero iff truncated
    s_min_sq: float  # smallest singular value squared of the design matrix
    truncated: bool


def _check_finite(a: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"non-finite entries in {name}")


def smallest_singular_sq(design: np.ndarray) -> float:
    """s_K^2 of the L x K design matrix, i.e. lambda_min(A^T A)."""
    design = np.asarray(design, dtype=float)
    _check_finite(design, "design matrix")
    n_rows, n_cols = design.shape
    if n_rows < n_cols:
        return 0.0
    s = np.linalg.svd(design, compute_uv=False)
    return float(s[-1] ** 2)


def fit_truncated(design: np.ndarray, targets: np.ndarray, tau: float) -> CubeRegression:
    """Thin-SVD least squares with all-or-nothing truncation.

    Returns the minimum-norm solution when s_K^2 >= L * tau, and the zero
    coefficient vector (flagged) otherwise.
    """
    design = np.asarray(design, dtype=float)
    targets = np.asarray(targets, dtype=float)
    _check_finite(design, "design matrix")
    _check_finite(targets, "targets")
    n_rows, n_cols = design.shape
    if targets.shape != (n_rows,):
        raise ValueError("targets length must match the number of design rows")
    if tau <= 0.0:
        raise ValueError(f"tau must be > 0, got {tau}")

    if n_rows < n_cols:
        # Rank-deficient by shape: s_K = 0 < L*tau always truncates.
        return CubeRegression(coeffs=np.zeros(n_cols), s_min_sq=0.0, truncated=True)

    u, s, vt = np.linalg.svd(design, full_matrices=False)
    s_min_sq = float(s[-1] ** 2)
    if s_min_sq < n_rows * tau:
        return CubeRegression(coeffs=np.zeros(n_cols), s_min_sq=s_min_sq, truncated=True)
    coeffs = vt.T @ ((u.T @ targets) / s)
    return CubeRegression(coeffs=coeffs, s_min_sq=s_min_sq, truncated=False)


@dataclass(frozen=True)
class InterpolatorConfig:
    """Per-dimension cell count, max degree, density bounds, and sample budget."""

    n_cells: int
    max_degree: int
    f_star: float  # lower bound of the sampling density on the unit cube
    epsilon: float
    n_samples: int

    def __post_init__(self):
        if self.n_cells < 1 or self.max_degree < 0:
            raise ValueError("n_cells must be >= 1 and max_degree >= 0")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must be in (0,1), got {self.epsilon}")
        if self.f_star <= 0.0:
            raise ValueError(f"f_star must be > 0, got {self.f_star}")

    @property
    def tau(self) -> float:
        return (1.0 - self.epsilon) * self.f_star / 2.0


@dataclass(frozen=True)
class UnitCubeInterpolator:
    dim: int
    n_cells: int
    basis: BasisSpec
    scale: float  # N^(D/2) prefactor of the local basis
    regressions: list  # CubeRegression per cell, C-order over the cell grid

    def _cell_flat(self, cell_idx: np.ndarray) -> np.ndarray:
        flat = cell_idx[:, 0]
        for d in range(1, self.dim):
            flat = flat * self.n_cells + cell_idx[:, d]
        return flat

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        cell_idx = _cell_indices(points, self.n_cells)
        flat = self._cell_flat(cell_idx)
        local = 2.0 * (self.n_cells * points - cell_idx) - 1.0
        cols = self.basis.design_columns(local) * self.scale
        out = np.zeros(points.shape[0])
        for cell in np.unique(flat):
            reg = self.regressions[cell]
            if reg.truncated:
                continue
            mask = flat == cell
            out[mask] = cols[mask] @ reg.coeffs
        return out

    def __call__(self, x) -> float:
        return float(self.evaluate_many(np.atleast_2d(np.asarray(x, dtype=float)))[0])


def _cell_indices(points: np.ndarray, n_cells: int) -> np.ndarray:
    # Half-open cells (i/N, (i+1)/N]; components equal to 0 fall into cell 0.
    idx = np.ceil(n_cells * points).astype(np.int64) - 1
    return np.clip(idx, 0, n_cells - 1)


def interpolate_unit_cube(
    points: np.ndarray, values: np.ndarray, cfg: InterpolatorConfig
) -> UnitCubeInterpolator:
    """Fit the local Legendre basis cell by cell with brute-force truncation.

    The truncation rule mirrors the single global regression: the global
    design matrix is block diagonal over cells, so the criterion
    s_K^2 >= tau * L_total is applied per cell by rescaling tau with
    L_total / L_cell. Empty cells are truncated.
    """
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if np.any(points < 0.0) or np.any(points > 1.0):
        raise ValueError("samples must lie in the unit cube")
    n_total, dim = points.shape
    if values.shape != (n_total,):
        raise ValueError("values length must match the number of sample points")

    basis = BasisSpec.create(dim, cfg.max_degree)
    scale = cfg.n_cells ** (dim / 2.0)
    cell_idx = _cell_indices(points, cfg.n_cells)
    flat = cell_idx[:, 0]
    for d in range(1, dim):
        flat = flat * cfg.n_cells + cell_idx[:, d]

    regressions = []
    for cell in range(cfg.n_cells**dim):
        mask = flat == cell
        n_cell = int(mask.sum())
        if n_cell == 0:
            regressions.append(
                CubeRegression(coeffs=np.zeros(basis.size), s_min_sq=0.0, truncated=True)
            )
            continue
        local = 2.0 * (cfg.n_cells * points[mask] - cell_idx[mask]) - 1.0
        design = basis.design_columns(local) * scale
        regressions.append(fit_truncated(design, values[mask], cfg.tau * n_total / n_cell))
    return UnitCubeInterpolator(
        dim=dim, n_cells=cfg.n_cells, basis=basis, scale=scale, regressions=regressions
    )
