"""batchregret: min-max regret of universal batch learning under misspecification."""

import argparse
import logging
import sys
from pathlib import Path

from src.config import MODES, ConfigError, load_config_file, parse_range, resolve_config

# argparse dest -> ExperimentConfig field
FLAG_FIELDS = (
    "family", "N", "phi_range", "theta_range", "grid", "lam", "epsilon", "max_iters", "L",
    "alpha", "seed", "out", "threads", "px", "samples", "log_every",
)


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="[%(name)s] %(message)s",
        stream=sys.stderr,
    )


def _run(args: argparse.Namespace, mode: str):
    from src.experiments import run

    file_values = load_config_file(args.config) if args.config else {}
    flags = {name: getattr(args, name) for name in FLAG_FIELDS}
    cfg = resolve_config(mode, file_values, flags)
    result = run(cfg)
    print(f"[{mode}] wrote {len(result.files)} files to {cfg.out_dir}")
    return result


def _print_report(mode: str, s: dict) -> None:
    print(f"[{mode}] R_L={s['r_low']:.10g} R_U={s['r_high']:.10g} "
          f"2N*R={s['normalized']:.6f} iterations={s['iterations']} converged={s['converged']}")


# ── Commands ─────────────────────────────────────────────────────────────


def cmd_solve(args: argparse.Namespace) -> int:
    result = _run(args, "solve")
    _print_report("solve", result.summary)
    return result.status


def cmd_capacity(args: argparse.Namespace) -> int:
    result = _run(args, "capacity")
    _print_report("capacity", result.summary)
    return result.status


def cmd_sandwich(args: argparse.Namespace) -> int:
    result = _run(args, "sandwich")
    s = result.summary
    lower, middle, upper = s["sandwich_normalized"]
    verdict = "pass" if s["passed"] else "FAIL"
    print(f"[sandwich] C(theta)={lower:.6f} <= R*={middle:.6f} <= C(theta_eps)={upper:.6f}: {verdict}")
    return result.status


def cmd_beta(args: argparse.Namespace) -> int:
    result = _run(args, "beta")
    _print_report("beta", result.summary)
    print(f"[beta] beta(P_emp=0) = {result.summary['beta_at_zero']:.6f}")
    return result.status


def cmd_combined(args: argparse.Namespace) -> int:
    result = _run(args, "combined")
    s = result.summary
    _print_report("combined", s)
    if "upper_bound" in s:
        print(f"[combined] shell capacity bound U={s['upper_bound']:.10g} "
              f"converged={s['upper_bound_converged']}")
    return result.status


def cmd_supervised(args: argparse.Namespace) -> int:
    result = _run(args, "supervised")
    s = result.summary
    _print_report("supervised", s)
    if not s["exact"]:
        print(f"[supervised] Monte-Carlo standard error {s['stderr']:.3g}")
    return result.status


def cmd_table1(args: argparse.Namespace) -> int:
    result = _run(args, "table1")
    s = result.summary
    print(f"[table1] {s['rows'] - s['failed']}/{s['rows']} rows within {s['tolerance']}")
    return result.status


def cmd_oracle_check(args: argparse.Namespace) -> int:
    result = _run(args, "oracle-check")
    s = result.summary
    print(f"[oracle-check] max-abs-discrepancy={s['max_abs_discrepancy']:.3e} "
          f"over {s['comparisons']} comparisons")
    return result.status


COMMANDS = {
    "solve": (cmd_solve, "Regret and capacity-achieving prior for (theta, phi)"),
    "capacity": (cmd_capacity, "Conditional capacity of the theta range"),
    "sandwich": (cmd_sandwich, "Check C(theta) <= R*(theta, phi) <= C(theta_eps)"),
    "beta": (cmd_beta, "Add-beta factor of the optimal predictor"),
    "combined": (cmd_combined, "Batch-then-online regret over L predicted symbols"),
    "supervised": (cmd_supervised, "Supervised regret for binary symmetric channels"),
    "table1": (cmd_table1, "Reproduce the sixteen reference Bernoulli settings"),
    "oracle-check": (cmd_oracle_check, "Compare fast paths with brute-force enumeration"),
}


# ── CLI ──────────────────────────────────────────────────────────────────


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value experiment file (flags override it)")
    common.add_argument("--family", help="bernoulli (default) or multinomial-K, K <= 3")
    common.add_argument("--N", type=int, help="Batch size")
    common.add_argument("--phi-range", dest="phi_range", type=parse_range, help="lo,hi")
    common.add_argument("--theta-range", dest="theta_range", type=parse_range, help="lo,hi")
    common.add_argument("--grid", type=int, help="Grid points (simplex divisions for multinomial)")
    common.add_argument("--lambda", dest="lam", type=float,
                        help="Step exponent (default: 1.0; max(1, N/25) for sandwich and table1)")
    common.add_argument("--epsilon", type=float,
                        help="Gap threshold in nats (default: 1e-5/(2N); 1e-3/(2N) for sandwich and table1)")
    common.add_argument("--max-iters", dest="max_iters", type=int, help="Iteration cap (default: 200000)")
    common.add_argument("--L", type=int, help="Online horizon for combined runs")
    common.add_argument("--alpha", type=float, help="Shell exponent for sandwich/table1 (default: 0.1)")
    common.add_argument("--seed", type=int, help="Seed for Monte-Carlo and oracle instances")
    common.add_argument("--out", type=Path, help="Output directory (default: results/<mode>)")
    common.add_argument("--threads", type=int, help="Worker threads (default: all CPUs)")
    common.add_argument("--px", type=float, help="P(x=1) for supervised runs (default: 0.5)")
    common.add_argument("--samples", type=int, help="Monte-Carlo feature draws beyond the exact limit")
    common.add_argument("--log-every", dest="log_every", type=int, help="Progress cadence in iterations")
    common.add_argument("--verbose", action="store_true", help="Debug logging")

    parser = argparse.ArgumentParser(
        prog="batchregret",
        description="batchregret: Arimoto-Blahut solver for misspecified batch learning",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for mode in MODES:
        func, help_text = COMMANDS[mode]
        p = sub.add_parser(mode, parents=[common], help=help_text)
        p.set_defaults(func=func)
    return parser


def main(argv: list[str] | None = None) -> int:
    from src.experiments import EXIT_CONFIG_ERROR, EXIT_ORACLE_LIMIT, EXIT_SOLVER_ERROR
    from src.oracle import OracleLimitError
    from src.solver import SolverError

    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    try:
        return args.func(args)
    except OracleLimitError as e:
        print(f"[Oracle] {e}", file=sys.stderr)
        return EXIT_ORACLE_LIMIT
    except SolverError as e:
        print(f"[Solver] {e}", file=sys.stderr)
        return EXIT_SOLVER_ERROR
    except ConfigError as e:
        print(f"[Config] {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except ValueError as e:
        print(f"[Error] {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
