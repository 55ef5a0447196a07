"""Experiment runner: one function per mode, deterministic CSV payloads plus summary.json."""

from __future__ import annotations

import csv
import json
import logging
import time
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from src.combined import CombinedConfig, combined_div_to_predictor, combined_solve, combined_upper_bound
from src.config import ExperimentConfig
from src.divergence import cond_div_to_predictor
from src.family import (
    HypothesisSet,
    ParamGrid,
    box_subgrid,
    default_resolution,
    epsilon_n,
    make_simplex_grid,
    make_uniform_grid,
    theta_epsilon,
)
from src.oracle import DEFAULT_LIMIT, enum_cond_div, enum_regret_terms, enum_supervised
from src.predictor import Prior, beta_curve, predictive_from_prior
from src.solver import RegretReport, SolverConfig, bounds, capacity, mass_inside, solve, verify_sandwich
from src.supervised import (
    ChannelGrid,
    FeatureDist,
    ProductHypothesis,
    SupervisedConfig,
    make_bsc_grid,
    sup_regret_terms,
    sup_solve,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_NOT_CONVERGED = 3
EXIT_ORACLE_LIMIT = 4
EXIT_SOLVER_ERROR = 5

FLOAT_FORMAT = ".12g"
TABLE1_TOLERANCE = 0.02
TABLE1_ALPHA = 0.1
ORACLE_TOLERANCE = 1e-10
ORACLE_CASES = 50


@dataclass
class RunResult:
    status: int
    summary: dict[str, Any]
    files: list[Path] = field(default_factory=list)


# ── Writers ───────────────────────────────────────────────────────────────


def fmt(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), FLOAT_FORMAT)
    return str(value)


def write_csv(path: Path, header: list[str], rows: Iterable[Iterable[Any]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def _point_label(grid: ParamGrid, j: int) -> str:
    if grid.is_bernoulli:
        return fmt(grid.probs[j, 1])
    return ";".join(fmt(v) for v in grid.probs[j])


def write_prior(path: Path, grid: ParamGrid, prior: Prior) -> Path:
    return write_csv(path, ["phi", "pi"], ((_point_label(grid, j), prior.weights[j])
                                           for j in range(len(grid))))


def write_summary(path: Path, summary: dict[str, Any]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def report_fields(report: RegretReport) -> dict[str, Any]:
    return {
        "r_low": report.r_low,
        "r_high": report.r_high,
        "midpoint": report.midpoint,
        "normalized": report.normalized,
        "iterations": report.iterations,
        "converged": report.converged,
    }


def _status(*reports: RegretReport) -> int:
    return EXIT_OK if all(r.converged for r in reports) else EXIT_NOT_CONVERGED


# ── Builders ──────────────────────────────────────────────────────────────


def build_grid(cfg: ExperimentConfig, span: tuple[float, float] | None = None) -> ParamGrid:
    lo, hi = span or cfg.phi_range
    if cfg.alphabet_size == 2:
        return make_uniform_grid(lo, hi, cfg.resolution)
    return box_subgrid(make_simplex_grid(cfg.alphabet_size, cfg.resolution), lo, hi)


def build_theta(cfg: ExperimentConfig, grid: ParamGrid) -> HypothesisSet:
    if cfg.alphabet_size == 2:
        return HypothesisSet.between(*cfg.theta)
    return HypothesisSet.from_grid(box_subgrid(grid, *cfg.theta))


def solver_params(cfg: ExperimentConfig, N: int | None = None) -> dict[str, Any]:
    return {
        **cfg.solver_settings(N),
        "max_iters": cfg.max_iters,
        "log_every": cfg.log_every,
        "threads": cfg.threads,
    }


# ── Modes ─────────────────────────────────────────────────────────────────


def run_solve(cfg: ExperimentConfig) -> RunResult:
    grid = build_grid(cfg)
    report = solve(SolverConfig(N=cfg.N, grid=grid, theta=build_theta(cfg, grid), **solver_params(cfg)))
    files = [write_prior(cfg.out_dir / "prior.csv", grid, report.prior)]
    summary = report_fields(report)
    if grid.is_bernoulli:
        summary["mass_in_theta"] = mass_inside(report.prior, grid, cfg.theta)
    return RunResult(_status(report), summary, files)


def run_capacity(cfg: ExperimentConfig) -> RunResult:
    grid = build_grid(cfg, cfg.theta)
    report = capacity(grid, cfg.N, **solver_params(cfg))
    files = [write_prior(cfg.out_dir / "prior.csv", grid, report.prior)]
    return RunResult(_status(report), report_fields(report), files)


def run_sandwich(cfg: ExperimentConfig) -> RunResult:
    result = verify_sandwich(
        HypothesisSet.between(*cfg.theta), cfg.phi_range, cfg.N, cfg.alpha, cfg.grid,
        **solver_params(cfg),
    )
    M = cfg.resolution
    a, b = cfg.theta
    spans = [(a, b), cfg.phi_range, result.theta_eps]
    names = ["capacity_theta", "regret", "capacity_theta_eps"]
    verdict = "pass" if result.passed else "fail"
    rows = [
        (name, lo, hi, r.r_low, r.r_high, r.midpoint, r.normalized, r.converged, verdict)
        for name, (lo, hi), r in zip(names, spans, result.ordered, strict=True)
    ]
    files = [write_csv(
        cfg.out_dir / "sandwich.csv",
        ["quantity", "lo", "hi", "r_low", "r_high", "midpoint", "normalized", "converged", "sandwich"],
        rows,
    )]
    for name, span, r in zip(names, spans, result.ordered, strict=True):
        files.append(write_prior(cfg.out_dir / f"prior_{name}.csv", make_uniform_grid(*span, M), r.prior))
    summary = {
        "passed": result.passed,
        "strict": result.strict,
        "tolerance": result.tolerance,
        "theta_eps": list(result.theta_eps),
        "sandwich_normalized": [r.normalized for r in result.ordered],
        "mass_in_theta_eps": mass_inside(result.middle.prior, make_uniform_grid(*cfg.phi_range, M),
                                         result.theta_eps),
        **report_fields(result.middle),
    }
    if not result.converged:
        status = EXIT_NOT_CONVERGED
    else:
        status = EXIT_OK if result.passed else EXIT_CHECK_FAILED
    return RunResult(status, summary, files)


def run_beta(cfg: ExperimentConfig) -> RunResult:
    grid = build_grid(cfg)
    report = solve(SolverConfig(N=cfg.N, grid=grid, theta=build_theta(cfg, grid), **solver_params(cfg)))
    curve = beta_curve(predictive_from_prior(grid, report.prior, cfg.N, cfg.threads))
    files = [
        write_csv(cfg.out_dir / "beta.csv", ["p_emp", "beta", "singular"],
                  zip(curve.p_emp, curve.beta, curve.singular, strict=True)),
        write_prior(cfg.out_dir / "prior.csv", grid, report.prior),
    ]
    summary = report_fields(report)
    summary["beta_at_zero"] = float(curve.beta[0])
    return RunResult(_status(report), summary, files)


def run_combined(cfg: ExperimentConfig) -> RunResult:
    grid = build_grid(cfg)
    config = CombinedConfig(N=cfg.N, grid=grid, theta=build_theta(cfg, grid), L=cfg.L,
                            **solver_params(cfg))
    report = combined_solve(config)
    files = [write_prior(cfg.out_dir / "prior.csv", grid, report.prior)]
    summary = report_fields(report)
    summary["L"] = cfg.L
    if not grid.is_bernoulli:
        return RunResult(_status(report), summary, files)

    bound = combined_upper_bound(HypothesisSet.between(*cfg.theta), cfg.phi_range, cfg.N, cfg.L,
                                 cfg.alpha, cfg.resolution, **solver_params(cfg))
    files.append(write_csv(
        cfg.out_dir / "upper_bound.csv",
        ["N", "r_low", "r_high", "midpoint", "converged"],
        ((r.N, r.r_low, r.r_high, r.midpoint, r.converged) for r in bound.steps),
    ))
    summary["upper_bound"] = bound.value
    summary["upper_bound_converged"] = all(r.converged for r in bound.steps)
    return RunResult(_status(report, *bound.steps), summary, files)


def run_supervised(cfg: ExperimentConfig) -> RunResult:
    grid = make_bsc_grid(*cfg.phi_range, cfg.resolution)
    theta = ProductHypothesis.for_bsc(*cfg.theta)
    px = FeatureDist.bernoulli(cfg.px)
    config = SupervisedConfig(N=cfg.N, grid=grid, theta=theta, px=px, samples=cfg.samples,
                              seed=cfg.seed, **solver_params(cfg))
    report = sup_solve(config)
    terms = sup_regret_terms(grid, report.prior, theta, px, cfg.N, cfg.samples, cfg.seed, cfg.threads)
    crossover = grid.probs[:, 0, 1]
    files = [write_csv(cfg.out_dir / "prior.csv", ["phi", "pi"],
                       zip(crossover, report.prior.weights, strict=True))]
    summary = report_fields(report)
    summary.update(mutual_info=terms.mutual_info, penalty=terms.penalty, stderr=terms.stderr,
                   exact=terms.exact)
    return RunResult(_status(report), summary, files)


# ── Reference table ──────────────────────────────────────────────────────


@dataclass(frozen=True)
class Table1Row:
    phi: tuple[float, float]
    theta: tuple[float, float]
    N: int
    reference: float


def table1_rows(alpha: float = TABLE1_ALPHA) -> list[Table1Row]:
    """The sixteen reference Bernoulli settings with their 2N-normalized regret."""
    rows = []
    for N, values in (
        (100, (0.7242, 0.9171, 0.8728, 0.8710, 0.7869, 0.7828, 0.9766, 0.9763, 0.9908)),
        (1000, (0.9334, 0.9837, 0.9816, 0.9798, None, None, 0.9970, 0.9970, 1.0027)),
    ):
        shell = theta_epsilon(HypothesisSet.between(0.25, 0.75), epsilon_n(N, alpha), (0.0, 1.0)).interval
        settings = [
            ((0.0, 1.0), (0.25, 0.5)),
            (shell, shell),
            ((0.0, 1.0), (0.25, 0.75)),
            ((0.25, 0.75), (0.25, 0.75)),
            ((0.0, 1.0), (1 / 3, 2 / 3)),
            ((1 / 3, 2 / 3), (1 / 3, 2 / 3)),
            ((0.0, 1.0), (0.01, 0.99)),
            ((0.01, 0.99), (0.01, 0.99)),
            ((0.0, 1.0), (0.0, 1.0)),
        ]
        for (phi, theta), value in zip(settings, values, strict=True):
            if value is not None:
                rows.append(Table1Row(phi, theta, N, value))
    return rows


def run_table1(cfg: ExperimentConfig) -> RunResult:
    rows = []
    failed = 0
    unconverged = 0
    for row in table1_rows(cfg.alpha):
        M = cfg.grid or default_resolution(row.N)
        grid = make_uniform_grid(*row.phi, M)
        params = solver_params(cfg, row.N)
        report = solve(SolverConfig(N=row.N, grid=grid, theta=HypothesisSet.between(*row.theta), **params))
        diff = report.normalized - row.reference
        passed = report.converged and abs(diff) <= TABLE1_TOLERANCE
        failed += not passed
        unconverged += not report.converged
        logger.info("row phi=[%.4f, %.4f] theta=[%.4f, %.4f] N=%d: %.4f vs %.4f %s",
                    *row.phi, *row.theta, row.N, report.normalized, row.reference,
                    "ok" if passed else "FAIL")
        rows.append((*row.phi, *row.theta, row.N, row.reference, report.normalized, diff,
                     params["lam"], params["epsilon"], report.iterations, report.converged, passed))
    files = [write_csv(
        cfg.out_dir / "table1.csv",
        ["phi_lo", "phi_hi", "theta_lo", "theta_hi", "N", "reference", "computed", "diff",
         "lambda", "epsilon", "iterations", "converged", "passed"],
        rows,
    )]
    summary = {"rows": len(rows), "failed": failed, "unconverged": unconverged,
               "tolerance": TABLE1_TOLERANCE}
    if unconverged:
        status = EXIT_NOT_CONVERGED
    else:
        status = EXIT_CHECK_FAILED if failed else EXIT_OK
    return RunResult(status, summary, files)


# ── Oracle check ──────────────────────────────────────────────────────────


def _random_bernoulli_case(rng: np.random.Generator) -> tuple[ParamGrid, Prior, HypothesisSet]:
    M = int(rng.integers(2, 6))
    p = np.sort(rng.uniform(0.02, 0.98, M))
    grid = ParamGrid(np.column_stack([1.0 - p, p]), float(p[0]), float(p[-1]))
    prior = Prior.normalized(rng.dirichlet(np.ones(M)))
    a, b = np.sort(rng.uniform(p[0], p[-1], 2))
    return grid, prior, HypothesisSet.between(float(a), float(b))


def _random_channel_case(
    rng: np.random.Generator,
) -> tuple[ChannelGrid, Prior, ProductHypothesis, FeatureDist]:
    M = int(rng.integers(2, 4))
    rows = rng.uniform(0.05, 0.95, (M, 2))
    probs = np.stack([np.column_stack([1.0 - rows[:, 0], rows[:, 0]]),
                      np.column_stack([1.0 - rows[:, 1], rows[:, 1]])], axis=1)
    prior = Prior.normalized(rng.dirichlet(np.ones(M)))
    theta = ProductHypothesis(tuple(
        HypothesisSet.between(*(float(v) for v in np.sort(rng.uniform(0.05, 0.95, 2))))
        for _ in range(2)
    ))
    return ChannelGrid(probs), prior, theta, FeatureDist.bernoulli(float(rng.uniform(0.1, 0.9)))


def run_oracle_check(cfg: ExperimentConfig) -> RunResult:
    """Fast paths against enumeration on seeded random instances.

    Raises OracleLimitError when N (or N + L - 1 for the combined check)
    exceeds the enumeration limit.
    """
    rng = np.random.default_rng(cfg.seed)
    N = cfg.N
    L = max(cfg.L, 2)
    sup_N = min(N, DEFAULT_LIMIT.max_supervised_length)
    DEFAULT_LIMIT.check(2, N + L - 1)
    rows: list[tuple[str, int, float, float, float]] = []

    def record(check: str, case: int, fast: float, ref: float) -> None:
        rows.append((check, case, fast, ref, abs(fast - ref)))

    def cond_div_case(case: int) -> None:
        grid, prior, _ = _random_bernoulli_case(rng)
        phi = grid.point(int(rng.integers(len(grid))))
        table = predictive_from_prior(grid, prior, N)
        record("cond_div", case, cond_div_to_predictor(phi, table, N),
               enum_cond_div(phi, grid, prior, N))

    def bounds_case(case: int) -> None:
        grid, prior, theta = _random_bernoulli_case(rng)
        r_low, r_high = bounds(grid, prior, theta, N)
        ref = enum_regret_terms(grid, prior, theta, N)
        record("bounds_low", case, r_low, ref.r_low)
        record("bounds_high", case, r_high, ref.r_high)

    def combined_case(case: int) -> None:
        grid, prior, _ = _random_bernoulli_case(rng)
        phi = grid.point(int(rng.integers(len(grid))))
        record("combined", case, combined_div_to_predictor(phi, grid, prior, N, L),
               enum_cond_div(phi, grid, prior, N, L))

    def supervised_case(case: int) -> None:
        grid, prior, theta, px = _random_channel_case(rng)
        fast = sup_regret_terms(grid, prior, theta, px, sup_N, threads=1)
        ref = enum_supervised(grid, prior, theta, px, sup_N)
        record("supervised_info", case, fast.mutual_info, ref.mutual_info)
        record("supervised_penalty", case, fast.penalty, ref.penalty)
        record("supervised_low", case, fast.r_low, ref.r_low)
        record("supervised_high", case, fast.r_high, ref.r_high)

    checks: list[tuple[str, Callable[[int], None]]] = [
        ("cond_div", cond_div_case),
        ("bounds", bounds_case),
        ("combined", combined_case),
        ("supervised", supervised_case),
    ]
    for name, check in checks:
        logger.info("oracle check %s: %d cases", name, ORACLE_CASES)
        for case in range(ORACLE_CASES):
            check(case)

    worst = max(r[4] for r in rows)
    files = [write_csv(cfg.out_dir / "oracle.csv", ["check", "case", "fast", "oracle", "abs_diff"], rows)]
    summary = {
        "cases": ORACLE_CASES * len(checks),
        "comparisons": len(rows),
        "max_abs_discrepancy": worst,
        "tolerance": ORACLE_TOLERANCE,
        "N": N,
        "L": L,
        "supervised_N": sup_N,
    }
    return RunResult(EXIT_OK if worst <= ORACLE_TOLERANCE else EXIT_CHECK_FAILED, summary, files)


MODE_RUNNERS: dict[str, Callable[[ExperimentConfig], RunResult]] = {
    "solve": run_solve,
    "capacity": run_capacity,
    "sandwich": run_sandwich,
    "beta": run_beta,
    "combined": run_combined,
    "supervised": run_supervised,
    "table1": run_table1,
    "oracle-check": run_oracle_check,
}


def run(cfg: ExperimentConfig) -> RunResult:
    """Run one experiment and write its files plus summary.json under cfg.out_dir."""
    started = time.perf_counter()
    result = MODE_RUNNERS[cfg.mode](cfg)
    summary = {
        "config": cfg.echo(),
        "mode": cfg.mode,
        "status": result.status,
        "wall_time": time.perf_counter() - started,
        **result.summary,
    }
    result.summary = summary
    result.files.append(write_summary(cfg.out_dir / "summary.json", summary))
    return result
