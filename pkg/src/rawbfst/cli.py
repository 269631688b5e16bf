"""Experiment harnesses and the command-line interface.

Three subcommands: `second-derivative` reproduces the smooth benchmark
(error tables and convergence plots for the second-derivative weight),
`uvm` reproduces the call-spread pricing experiment, and `interp-demo`
measures the unit-cube interpolation rates. Every report is a pure
function of its resolved parameter block and the master seed; replicates
run in parallel with per-replicate seeds and order-independent
aggregation.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import algorithm, oracle, svdtrunc, uvmpricer

__version__ = "0.1.0"

UVM_LIMIT_PRICE = 11.20456


class CliUsageError(ValueError):
    """Bad command-line or config-file input (maps to exit code 2)."""


@dataclass
class ExperimentReport:
    """Everything needed to reproduce and tabulate one experiment run."""

    experiment: str
    parameters: dict
    rows: list[dict]
    aggregates: list[dict]
    seed: int
    version: str = __version__

    def to_dict(self) -> dict:
        return asdict(self)


def _thread_count() -> int:
    env = os.environ.get("RAWBFST_THREADS")
    if env is not None:
        n = int(env)
        if n < 1:
            raise CliUsageError(f"RAWBFST_THREADS must be >= 1, got {env}")
        return n
    return os.cpu_count() or 1


def _parallel_map(fn, jobs: list) -> list:
    """Map preserving job order; parallel only when it can actually help."""
    workers = min(_thread_count(), len(jobs))
    if workers <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=1))


def _rms(values: np.ndarray) -> float:
    return math.sqrt(float(np.mean(np.square(values))))


# ---------------------------------------------------------------------------
# second-derivative experiment


def _second_derivative_cell_config(delta_inv: int, rho: int, c1_paths: float | None):
    model = algorithm.EulerModel.constant(dim=1)
    return model, algorithm.derive_config(
        model, 1.0 / delta_inv, rho, iota=(2,), c1_paths=c1_paths, tau=0.0233
    )


def _second_derivative_rep(job: tuple) -> dict:
    delta_inv, rho, rep, master_seed, c1_paths = job
    model, cfg = _second_derivative_cell_config(delta_inv, rho, c1_paths)
    start = time.perf_counter()
    est = algorithm.fit(model, oracle.smooth_target, cfg, (master_seed, rho, delta_inv, rep))
    error = algorithm.l2_error(
        est, (2,), lambda x: oracle.closed_form_z(x, cfg.delta)
    )
    wall = time.perf_counter() - start
    return {
        "delta_inv": delta_inv,
        "rho": rho,
        "rep": rep,
        "error": error,
        "cubes": est.part.n_cubes,
        "samples_per_cube": cfg.n_samples,
        "truncated_cubes": est.truncation_count,
        "wall_time_s": wall,
    }


def run_second_derivative(options: dict) -> ExperimentReport:
    """Error table for the second-derivative benchmark over a (rho, Delta) grid."""
    rhos = tuple(options.get("rho", (2, 3, 4)))
    grid = tuple(options.get("grid", tuple(2**n for n in range(3, 15))))
    reps = int(options.get("reps", 100))
    seed = int(options.get("seed", 2024))
    c1_paths = options.get("c1_paths")

    parameters = {
        "rho": list(rhos),
        "grid": list(grid),
        "reps": reps,
        "seed": seed,
        "c1_paths": c1_paths,
        "iota": [2],
        "tau": 0.0233,
        "c_cube": 5.0,
        "c1_trunc": 5.0,
        "c2_trunc": 5.0,
    }
    rows: list[dict] = []
    aggregates: list[dict] = []
    for rho in rhos:
        for delta_inv in grid:
            _, cfg = _second_derivative_cell_config(delta_inv, rho, c1_paths)
            jobs = [(delta_inv, rho, rep, seed, c1_paths) for rep in range(reps)]
            cell_rows = _parallel_map(_second_derivative_rep, jobs)
            rows.extend(cell_rows)
            errors = np.array([r["error"] for r in cell_rows])
            delta = 1.0 / delta_inv
            ebar = disc_error_quadrature(delta)
            aggregates.append(
                {
                    "delta_inv": delta_inv,
                    "rho": rho,
                    "error": _rms(errors),
                    "disc_error": ebar,
                    "cubes": cell_rows[0]["cubes"],
                    "samples_per_cube": cfg.n_samples,
                    "truncated_cubes": float(np.mean([r["truncated_cubes"] for r in cell_rows])),
                    "wall_time_s": float(np.mean([r["wall_time_s"] for r in cell_rows])),
                }
            )
    return ExperimentReport(
        experiment="second-derivative", parameters=parameters, rows=rows,
        aggregates=aggregates, seed=seed,
    )


def disc_error_quadrature(delta: float) -> float:
    """Time-discretization error: L2(mu_1) distance between the exact weighted
    conditional expectation at step size delta and the second derivative."""

    def diff_sq(x: float) -> float:
        d = float(oracle.closed_form_z(x, delta)) - float(oracle.y_second_derivative(x))
        return d * d

    val, _ = oracle.quad_weighted_expectation(diff_sq, "std_normal", tolerance=1e-9)
    return math.sqrt(max(val, 0.0))


# ---------------------------------------------------------------------------
# uvm experiment


def _uvm_rep(job: tuple) -> dict:
    delta_inv, c1_paths, rep, master_seed = job
    cfg = uvmpricer.UvmConfig(n_steps=delta_inv)
    reg = uvmpricer.UvmRegressionParams(c1_paths=c1_paths)
    start = time.perf_counter()
    price = uvmpricer.price(cfg, reg, (master_seed, delta_inv, rep))
    wall = time.perf_counter() - start
    return {
        "delta_inv": delta_inv,
        "c1_paths": c1_paths,
        "rep": rep,
        "price": price,
        "wall_time_s": wall,
    }


def run_uvm(options: dict) -> ExperimentReport:
    """Mean/std table of the call-spread price over seeds for each grid cell."""
    grid = tuple(options.get("grid", (16, 32, 64, 128, 256, 512)))
    c1_blocks = tuple(options.get("c1_paths", (74.07, 10.0)))
    reps = int(options.get("reps", 100))
    seed = int(options.get("seed", 2024))

    base = uvmpricer.UvmConfig()
    parameters = {
        "grid": list(grid),
        "c1_paths": list(c1_blocks),
        "reps": reps,
        "seed": seed,
        "s0": base.s0,
        "mu": base.mu,
        "sigma_l": base.sigma_l,
        "sigma_h": base.sigma_h,
        "sigma_r": base.sigma_r,
        "maturity": base.maturity,
        "strike_low": base.strike_low,
        "strike_high": base.strike_high,
        "sigma0_sq": base.sigma0_sq,
        "limit_price": UVM_LIMIT_PRICE,
    }
    rows: list[dict] = []
    aggregates: list[dict] = []
    for c1_paths in c1_blocks:
        for delta_inv in grid:
            jobs = [(int(delta_inv), float(c1_paths), rep, seed) for rep in range(reps)]
            cell_rows = _parallel_map(_uvm_rep, jobs)
            rows.extend(cell_rows)
            prices = np.array([r["price"] for r in cell_rows])
            aggregates.append(
                {
                    "delta_inv": int(delta_inv),
                    "c1_paths": float(c1_paths),
                    "mean": float(np.mean(prices)),
                    "std": float(np.std(prices, ddof=1)) if reps > 1 else 0.0,
                    "rmse_vs_limit": _rms(prices - UVM_LIMIT_PRICE),
                    "wall_time_s": float(np.mean([r["wall_time_s"] for r in cell_rows])),
                }
            )
    return ExperimentReport(
        experiment="uvm", parameters=parameters, rows=rows, aggregates=aggregates, seed=seed
    )


# ---------------------------------------------------------------------------
# interp-demo experiment


def interp_sample_count(
    n_cells: int,
    dim: int,
    q_degree: int,
    epsilon: float,
    f_star: float = 1.0,
    f_sup: float = 1.0,
    c0: float = 1.0,
    gamma: float = 1.0,
) -> int:
    """Conservative sample-budget bound of the interpolation rate theorem."""
    k_cell = math.comb(dim + q_degree, dim)
    numerator = (
        n_cells**dim * k_cell * math.exp(2 * q_degree) * (36.0 * f_sup / f_star + 4.0 * epsilon)
        + 6.0 * epsilon * f_sup
    )
    log_arg = c0 * float(n_cells) ** (dim + 2.0 * (q_degree + gamma))
    return math.ceil(numerator / (3.0 * epsilon**2 * f_star) * math.log(log_arg))


def _interp_targets() -> dict:
    return {
        "sin": lambda x: np.sin(2.0 * math.pi * x),
        "constant": lambda x: np.ones_like(np.asarray(x, dtype=float)),
        "gauss_bump": lambda x: np.exp(-8.0 * np.square(np.asarray(x, dtype=float) - 0.5)),
    }


def _interp_cell(job: tuple) -> dict:
    n_cells, q_degree, epsilon, c0, target_name, master_seed = job
    target = _interp_targets()[target_name]
    n_samples = interp_sample_count(n_cells, 1, q_degree, epsilon, c0=c0)
    cfg = svdtrunc.InterpolatorConfig(
        n_cells=n_cells, max_degree=q_degree, f_star=1.0, epsilon=epsilon, n_samples=n_samples
    )
    from . import rng as rngmod

    stream = rngmod.substream(rngmod.HARNESS_NAMESPACE, (master_seed, q_degree), n_cells)
    start = time.perf_counter()
    points = stream.random(n_samples)
    interp = svdtrunc.interpolate_unit_cube(points, np.asarray(target(points)), cfg)

    # L2([0,1]) error by per-cell Gauss quadrature (the fit is polynomial
    # inside each cell, the targets here are analytic).
    nodes, weights = np.polynomial.legendre.leggauss(24)
    cells = np.arange(n_cells)
    x = ((cells[:, None] + 0.5) + 0.5 * nodes) / n_cells
    diff = np.asarray(target(x.ravel())) - interp.evaluate_many(x.ravel())
    err_sq = float(
        np.sum(diff.reshape(x.shape) ** 2 @ weights) * 0.5 / n_cells
    )
    wall = time.perf_counter() - start
    return {
        "n_cells": n_cells,
        "q_degree": q_degree,
        "samples": n_samples,
        "error": math.sqrt(max(err_sq, 0.0)),
        "truncated_cells": sum(reg.truncated for reg in interp.regressions),
        "wall_time_s": wall,
    }


def run_interp_demo(options: dict) -> ExperimentReport:
    """Unit-interval interpolation errors over a cell-count grid, with rate fit."""
    q_degree = int(options.get("q_degree", 2))
    grid = tuple(options.get("grid", (4, 8, 16)))
    epsilon = float(options.get("epsilon", 0.5))
    c0 = float(options.get("c0", 1.0))
    target = str(options.get("target", "sin"))
    seed = int(options.get("seed", 2024))
    if target not in _interp_targets():
        raise CliUsageError(
            f"unknown target {target!r}; choose from {sorted(_interp_targets())}"
        )

    parameters = {
        "q_degree": q_degree,
        "grid": list(grid),
        "epsilon": epsilon,
        "c0": c0,
        "target": target,
        "seed": seed,
    }
    jobs = [(int(n), q_degree, epsilon, c0, target, seed) for n in grid]
    rows = _parallel_map(_interp_cell, jobs)
    logs = [
        (math.log10(r["n_cells"]), math.log10(max(r["error"], 1e-300))) for r in rows
    ]
    slope = float(np.polyfit([a for a, _ in logs], [b for _, b in logs], 1)[0])
    aggregates = [
        {
            "q_degree": q_degree,
            "target": target,
            "slope": slope,
            "expected_slope": -(q_degree + 1),
        }
    ]
    return ExperimentReport(
        experiment="interp-demo", parameters=parameters, rows=rows,
        aggregates=aggregates, seed=seed,
    )


# ---------------------------------------------------------------------------
# report output


def _write_csv(path: str, rows: list[dict], columns: list[str]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _plot_series(path: str, pairs: list[tuple[float, float]]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["log10_x", "log10_y"])
        for x, y in pairs:
            writer.writerow([f"{x:.10g}", f"{y:.10g}"])


def write_report(report: ExperimentReport, out_dir: str, fmt: str) -> list[str]:
    """Emit CSV rows + aggregate rows, a JSON mirror, and log-log plot series."""
    os.makedirs(out_dir, exist_ok=True)
    written: list[str] = []
    name = report.experiment.replace("-", "_")

    if fmt in ("csv", "both"):
        if report.experiment == "second-derivative":
            columns = [
                "delta_inv", "rho", "rep", "error", "cubes",
                "samples_per_cube", "truncated_cubes", "wall_time_s",
            ]
            rows = list(report.rows)
            for agg in report.aggregates:
                rows.append({**agg, "rep": "aggregate"})
        elif report.experiment == "uvm":
            columns = [
                "delta_inv", "c1_paths", "rep", "price", "mean", "std",
                "rmse_vs_limit", "wall_time_s",
            ]
            rows = list(report.rows)
            for agg in report.aggregates:
                rows.append({**agg, "rep": "aggregate"})
        else:
            columns = [
                "n_cells", "q_degree", "samples", "error", "truncated_cells", "wall_time_s",
            ]
            rows = list(report.rows)
        path = os.path.join(out_dir, f"{name}.csv")
        _write_csv(path, rows, columns)
        written.append(path)

        if report.experiment == "second-derivative":
            for rho in report.parameters["rho"]:
                pairs = [
                    (math.log10(a["delta_inv"]), math.log10(max(a["error"], 1e-300)))
                    for a in report.aggregates
                    if a["rho"] == rho
                ]
                path = os.path.join(out_dir, f"plot_{name}_rho{rho}.csv")
                _plot_series(path, pairs)
                written.append(path)
        elif report.experiment == "uvm":
            for c1 in report.parameters["c1_paths"]:
                pairs = [
                    (math.log10(a["delta_inv"]), math.log10(max(a["rmse_vs_limit"], 1e-300)))
                    for a in report.aggregates
                    if a["c1_paths"] == c1
                ]
                path = os.path.join(out_dir, f"plot_{name}_c1_{c1:g}.csv")
                _plot_series(path, pairs)
                written.append(path)
        else:
            pairs = [
                (math.log10(r["n_cells"]), math.log10(max(r["error"], 1e-300)))
                for r in report.rows
            ]
            path = os.path.join(out_dir, f"plot_{name}.csv")
            _plot_series(path, pairs)
            written.append(path)

    if fmt in ("json", "both"):
        path = os.path.join(out_dir, f"{name}.json")
        with open(path, "w") as f:
            json.dump(report.to_dict(), f, indent=2)
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# argument handling


def _parse_config_file(path: str) -> dict:
    """key=value lines; '#' starts a comment; keys use the flag names."""
    out: dict = {}
    try:
        with open(path) as f:
            for lineno, raw in enumerate(f, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise CliUsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
                key, value = line.split("=", 1)
                out[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise CliUsageError(f"cannot read config file {path}: {exc}") from exc
    return out


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in str(text).split(","))
    except ValueError as exc:
        raise CliUsageError(f"expected comma-separated integers, got {text!r}") from exc


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in str(text).split(","))
    except ValueError as exc:
        raise CliUsageError(f"expected comma-separated numbers, got {text!r}") from exc


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rawbfst", description="Localized regression experiment harness"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--grid", help="comma-separated grid values")
        p.add_argument("--reps", type=int, help="replicates per grid cell")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--out-dir", default=".", help="output directory")
        p.add_argument("--format", choices=("csv", "json", "both"), default="both")
        p.add_argument("--config", help="key=value config file; flags override it")

    p = sub.add_parser("second-derivative", help="smooth benchmark error table")
    common(p)
    p.add_argument("--rho", help="comma-separated approximation orders")
    p.add_argument("--c1-paths", type=float, dest="c1_paths", help="sample-count constant")

    p = sub.add_parser("uvm", help="uncertain-volatility call-spread pricing")
    common(p)
    p.add_argument(
        "--c1-paths", dest="c1_paths", help="comma-separated sample-count constants"
    )

    p = sub.add_parser("interp-demo", help="unit-interval interpolation rates")
    common(p)
    p.add_argument("--q-degree", type=int, dest="q_degree", help="local polynomial degree")
    p.add_argument("--epsilon", type=float, help="truncation slack in (0,1)")
    p.add_argument("--c0", type=float, help="log-factor constant of the sample bound")
    p.add_argument("--target", help="target function name")

    return parser


def _merge_options(args: argparse.Namespace) -> dict:
    """Flag > config-file > built-in default; parse list-valued strings."""
    file_opts = _parse_config_file(args.config) if args.config else {}
    merged: dict = dict(file_opts)
    for key, value in vars(args).items():
        if key in ("command", "config", "out_dir", "format") or value is None:
            continue
        merged[key] = value

    options: dict = {}
    for key, value in merged.items():
        if key in ("grid", "rho"):
            options[key] = _int_list(value) if isinstance(value, str) else value
        elif key == "c1_paths" and args.command == "uvm":
            options[key] = _float_list(value) if isinstance(value, str) else value
        elif key in ("reps", "seed", "q_degree"):
            options[key] = int(value)
        elif key in ("c1_paths", "epsilon", "c0"):
            options[key] = float(value)
        else:
            options[key] = value
    return options


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    runners = {
        "second-derivative": run_second_derivative,
        "uvm": run_uvm,
        "interp-demo": run_interp_demo,
    }
    try:
        options = _merge_options(args)
        report = runners[args.command](options)
        written = write_report(report, args.out_dir, args.format)
    except (CliUsageError, algorithm.ConfigurationError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (algorithm.NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
