"""
Command-line interface for movmax.

Subcommands:
    simulate   draw replications from a configured model
    dist       evaluate the bivariate distribution on a (w1, w2) grid
    estimate   fit the dependence parameter(s) to observations
    diagnose   compare a fitted model with the data pair by pair
    mc         run the seeded Monte-Carlo experiment harness

Exit codes: 0 success, 2 configuration error, 3 data or domain error,
4 numerical failure.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .config import load_config
from .data import read_observations, read_sites, write_observations, write_sites
from .errors import ConfigError, DataError, DomainError, NumericalError
from .estimation import ESTIMATORS, estimate, k_sweep, model_diagnostic
from .exactdist import (
    PairDependence,
    neg_log_bivariate_cdf,
    numeric_spectral_density,
    spectral_density_exp1d,
    spectral_density_normal1d,
    tail_dependence_coefficient,
)
from .experiment import run_experiment, write_runs
from .kernels import KernelModel, ModelFamily
from .oracle import L_numeric
from .reporter import (
    OutputLevel,
    Reporter,
    write_diagnostic,
    write_grid,
    write_spectral,
    write_json,
    write_pair_table,
)
from .simulator import simulate_with_stats
from .utils import parse_int, parse_number_list

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _add_model_options(parser: argparse.ArgumentParser, fitted: bool) -> None:
    families = [f.value for f in ModelFamily]
    parser.add_argument("--model", required=True, choices=families, help="Kernel family")
    if fitted:
        parser.add_argument("--beta", type=float, help="Fitted beta (single-parameter families)")
        parser.add_argument("--beta1", type=float, help="Fitted beta1 (gnormal2d)")
        parser.add_argument("--beta2", type=float, help="Fitted beta2 (gnormal2d)")
        parser.add_argument("--rho", type=float, help="Fitted rho (gnormal2d)")
    parser.add_argument("--nu", type=int, help="Degrees of freedom (t1d)")
    parser.add_argument("--alpha", type=float, help="Tail exponent (t2d)")


def create_parser() -> argparse.ArgumentParser:
    """
    Create and configure the argument parser.

    Returns:
        argparse.ArgumentParser: Configured argument parser
    """
    parser = argparse.ArgumentParser(
        prog="movmax",
        description="Simulate, evaluate and estimate moving-maximum max-stable models",
        epilog="Example: movmax simulate run.ini -o obs.csv --sites-output sites.csv",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )

    parser.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s {__version__}",
    )

    parser.add_argument(
        "-v", "--verbose",
        action="store_true",
        help="Enable verbose output and debug logging",
    )

    parser.add_argument(
        "-q", "--quiet",
        action="store_true",
        help="Suppress non-essential output",
    )

    commands = parser.add_subparsers(dest="command", metavar="COMMAND")

    sim = commands.add_parser("simulate", help="Draw replications from a configured model")
    sim.add_argument("config", help="Configuration file")
    sim.add_argument("-o", "--output", default="observations.csv", help="Observations CSV (default: %(default)s)")
    sim.add_argument("--sites-output", default="sites.csv", help="Sites CSV (default: %(default)s)")

    dist = commands.add_parser("dist", help="Evaluate -log P(Z1 <= w1, Z2 <= w2) on a grid")
    dist.add_argument("config", help="Configuration file (model and sites)")
    dist.add_argument("--w1", help="Comma-separated w1 values")
    dist.add_argument("--w2", help="Comma-separated w2 values")
    dist.add_argument("--theta", help="Comma-separated angles in (0, pi/2); writes theta,s_theta instead")
    dist.add_argument("--pair", nargs=2, type=int, default=[0, 1], metavar=("J", "M"),
                      help="Site pair to evaluate (default: 0 1)")
    dist.add_argument("--oracle", action="store_true", help="Use brute-force quadrature instead of closed forms")
    dist.add_argument("-o", "--output", help="Grid CSV (default: stdout)")

    est = commands.add_parser("estimate", help="Estimate dependence parameters from observations")
    est.add_argument("observations", help="Observations CSV")
    est.add_argument("sites", help="Sites CSV")
    _add_model_options(est, fitted=False)
    threshold = est.add_mutually_exclusive_group(required=True)
    threshold.add_argument("--k", type=int, help="Threshold count")
    threshold.add_argument("--k-grid", help="Comma-separated threshold counts (sweep mode)")
    est.add_argument("--estimator", choices=ESTIMATORS, default="auto", help="Estimator (default: %(default)s)")
    est.add_argument("--beta-max", type=float, help="Root-search bound of the exp2d estimator")
    est.add_argument("--no-variance", action="store_true", help="Skip asymptotic variances")
    est.add_argument("-o", "--output", default="report.json", help="JSON report (default: %(default)s)")
    est.add_argument("--pairs-output", default="pairs.csv", help="Per-pair CSV (default: %(default)s)")

    diag = commands.add_parser("diagnose", help="Compare a fitted model with the data")
    diag.add_argument("observations", help="Observations CSV")
    diag.add_argument("sites", help="Sites CSV")
    _add_model_options(diag, fitted=True)
    diag.add_argument("--k", type=int, required=True, help="Threshold count")
    diag.add_argument("-o", "--output", default="diagnostic.csv", help="Diagnostic CSV (default: %(default)s)")

    mc = commands.add_parser("mc", help="Run the Monte-Carlo experiment harness")
    mc.add_argument("config", help="Configuration file")
    mc.add_argument("-o", "--output", default="runs.csv", help="Per-run CSV (default: %(default)s)")
    mc.add_argument("--summary", default="summary.json", help="Summary JSON (default: %(default)s)")

    return parser


def _setup_reporter(args) -> Reporter:
    """
    Set up reporter based on command-line arguments.

    Args:
        args: Parsed command-line arguments

    Returns:
        Reporter: Configured reporter instance
    """
    if args.quiet:
        output_level = OutputLevel.QUIET
    elif args.verbose:
        output_level = OutputLevel.VERBOSE
    else:
        output_level = OutputLevel.NORMAL

    return Reporter(output_level)


def _setup_logging(verbose: bool) -> None:
    logger = logging.getLogger("movmax")
    if not logger.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        logger.addHandler(handler)
    logger.setLevel(logging.DEBUG if verbose else logging.WARNING)


def _model_from_args(args, fitted: bool) -> KernelModel:
    block = {"model": args.model, "nu": args.nu, "alpha": args.alpha}
    if fitted:
        block.update(beta=args.beta, beta1=args.beta1, beta2=args.beta2, rho=args.rho)
    else:
        # only the family and its shape parameters matter to the estimators
        block.update(beta=1.0, beta1=1.0, beta2=1.0, rho=0.0)
    return KernelModel.from_mapping({k: v for k, v in block.items() if v is not None})


def _parse_grid(text: str, name: str) -> List[float]:
    try:
        values = parse_number_list(text)
    except ValueError as e:
        raise ConfigError(f"{name}: {e}")
    if any(v <= 0 for v in values):
        raise ConfigError(f"{name}: values must be positive")
    return values


def _cmd_simulate(args, reporter: Reporter) -> int:
    cfg = load_config(args.config)
    obs, stats = simulate_with_stats(cfg.model, cfg.sites, cfg.n, cfg.sim)
    write_observations(args.output, obs)
    write_sites(args.sites_output, cfg.sites)
    reporter.print_simulation(cfg.model, cfg.sites, cfg.n, cfg.sim.seed, stats,
                              [Path(args.output), Path(args.sites_output)])
    return EXIT_OK


def _spectral_value(pd: PairDependence, theta: float, force_numeric: bool) -> float:
    if not force_numeric:
        if pd.model.family is ModelFamily.DOUBLE_EXP_1D:
            return spectral_density_exp1d(pd).density(theta)
        if pd.model.family is ModelFamily.NORMAL_1D:
            return spectral_density_normal1d(pd).density(theta)
    return numeric_spectral_density(pd, theta)


def _cmd_dist(args, reporter: Reporter) -> int:
    cfg = load_config(args.config)
    j, m = args.pair
    if not (0 <= j < cfg.sites.d and 0 <= m < cfg.sites.d) or j == m:
        raise ConfigError(f"--pair: need two distinct site indices below {cfg.sites.d}")
    pd = PairDependence.between(cfg.model, cfg.sites, j, m)

    if args.theta is not None:
        thetas = _parse_grid(args.theta, "--theta")
        rows = [(theta, _spectral_value(pd, theta, args.oracle)) for theta in thetas]
        lines = write_spectral(args.output, rows)
    else:
        if args.w1 is None or args.w2 is None:
            raise ConfigError("dist needs --w1 and --w2, or --theta")
        w1_grid = _parse_grid(args.w1, "--w1")
        w2_grid = _parse_grid(args.w2, "--w2")
        pair_sites = cfg.sites.subset([j, m])
        rows = []
        for w1 in w1_grid:
            for w2 in w2_grid:
                if args.oracle:
                    value = L_numeric(cfg.model, pair_sites, [1.0 / w1, 1.0 / w2])
                else:
                    value = neg_log_bivariate_cdf(pd, w1, w2)
                rows.append((w1, w2, value))
        lines = write_grid(args.output, rows)

    if args.output is None:
        print("\n".join(lines))
    else:
        reporter.print_written(args.output)
    reporter.print_tail_summary(cfg.model, j, m, pd.distance, tail_dependence_coefficient(pd))
    return EXIT_OK


def _cmd_estimate(args, reporter: Reporter) -> int:
    sites = read_sites(args.sites)
    obs = read_observations(args.observations, sites)
    model = _model_from_args(args, fitted=False)
    with_variance = not args.no_variance

    if args.k_grid is not None:
        try:
            grid = [parse_int(v, "k") for v in args.k_grid.split(",") if v.strip()]
        except ValueError as e:
            raise ConfigError(f"--k-grid: {e}")
        reports = k_sweep(obs, model, grid, args.estimator, args.beta_max, with_variance)
        write_json(args.output, [r.to_dict() for r in reports])
        write_pair_table(args.pairs_output, reports, with_k=True)
    else:
        reports = [estimate(obs, model, args.k, args.estimator, args.beta_max, with_variance)]
        write_json(args.output, reports[0].to_dict())
        write_pair_table(args.pairs_output, reports)

    for report in reports:
        reporter.print_estimate(report)
    reporter.print_written(args.output)
    reporter.print_written(args.pairs_output)
    return EXIT_OK


def _cmd_diagnose(args, reporter: Reporter) -> int:
    sites = read_sites(args.sites)
    obs = read_observations(args.observations, sites)
    model = _model_from_args(args, fitted=True)
    if model.family is ModelFamily.GENERAL_NORMAL_2D:
        fitted = (model.beta1, model.beta2, model.rho)
    else:
        fitted = model.beta
    table = model_diagnostic(obs, model, args.k, fitted)
    write_diagnostic(args.output, table)
    reporter.print_diagnostic(table)
    reporter.print_written(args.output)
    return EXIT_OK


def _cmd_mc(args, reporter: Reporter) -> int:
    cfg = load_config(args.config)
    results, summary = run_experiment(cfg, progress=reporter.print_progress)
    write_runs(args.output, results)
    write_json(args.summary, summary.to_dict())
    reporter.print_experiment(summary)
    reporter.print_written(args.output)
    reporter.print_written(args.summary)
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "dist": _cmd_dist,
    "estimate": _cmd_estimate,
    "diagnose": _cmd_diagnose,
    "mc": _cmd_mc,
}


def main(argv: Optional[list] = None) -> int:
    """
    Main entry point for the CLI.

    Args:
        argv: Command-line arguments (defaults to sys.argv[1:])

    Returns:
        int: Exit code:
            0 = success
            2 = configuration error
            3 = data or domain error
            4 = numerical failure
    """
    parser = create_parser()

    # If no arguments provided, show help
    if argv is None:
        argv = sys.argv[1:]

    if not argv:
        parser.print_help()
        return EXIT_OK

    args = parser.parse_args(argv)

    # Validate argument combinations
    if args.quiet and args.verbose:
        parser.error("--quiet and --verbose cannot be used together")
        return EXIT_CONFIG

    if args.command is None:
        parser.print_help()
        return EXIT_OK

    _setup_logging(args.verbose)
    reporter = _setup_reporter(args)

    try:
        return _COMMANDS[args.command](args, reporter)
    except ConfigError as e:
        code = EXIT_CONFIG
        error = e
    except (DomainError, DataError, OSError) as e:
        code = EXIT_DATA
        error = e
    except NumericalError as e:
        code = EXIT_NUMERICAL
        error = e

    print(f"Error: {error}", file=sys.stderr)
    if args.verbose:
        import traceback
        traceback.print_exception(type(error), error, error.__traceback__)
    return code


if __name__ == "__main__":
    sys.exit(main())
