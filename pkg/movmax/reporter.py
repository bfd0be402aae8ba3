"""
Output reporting module.

Human-readable summaries on stdout with configurable verbosity, plus the
writers for the JSON and CSV artifacts of the estimate, diagnose and mc
subcommands.
"""

import json
from enum import Enum
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from .data import SiteSet
from .estimation import DiagnosticTable, EstimateReport
from .experiment import ExperimentSummary
from .kernels import KernelModel
from .simulator import SimulationStats
from .utils import format_number

PathLike = Union[str, Path]

PAIR_COLUMNS = ("j", "m", "distance", "R_hat", "beta_hat_pair", "gap")
DIAGNOSTIC_COLUMNS = ("j", "m", "distance", "R_hat", "R_model", "gap")


class OutputLevel(Enum):
    """Output verbosity levels."""
    QUIET = 0
    NORMAL = 1
    VERBOSE = 2


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format_number(value)
    return str(value)


def _describe_model(model: KernelModel) -> str:
    params = ", ".join(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}"
                       for k, v in model.to_mapping().items() if k != "model")
    return f"{model.tag}({params})"


class Reporter:
    """
    Handles formatted output for movmax commands.

    NORMAL prints one summary block per command, VERBOSE adds per-pair
    tables and progress, QUIET prints nothing.
    """

    def __init__(self, level: OutputLevel = OutputLevel.NORMAL):
        """
        Initialize the reporter.

        Args:
            level: Output verbosity level
        """
        self.level = level

    @property
    def verbose(self) -> bool:
        return self.level == OutputLevel.VERBOSE

    def print_simulation(self, model: KernelModel, sites: SiteSet, n: int, seed: int,
                         stats: SimulationStats, outputs: Sequence[Path]) -> None:
        """
        Print the summary line of a simulation run.

        Args:
            model: Simulated model
            sites: Observation sites
            n: Replication count
            seed: Master seed
            stats: Truncation statistics
            outputs: Files written
        """
        if self.level == OutputLevel.QUIET:
            return

        print(f"Simulated {_describe_model(model)} at d={sites.d} site(s), n={n}, seed={seed}")
        print(f"  window volume {stats.window_volume:.6g}, "
              f"Poisson points per replication: mean {stats.mean_points:.1f}, max {stats.max_points}")
        if self.verbose:
            print(f"  window lower corner {list(stats.window_lo)}, upper corner {list(stats.window_hi)}")
        for path in outputs:
            print(f"  wrote {path}")

    def print_estimate(self, report: EstimateReport) -> None:
        """
        Print an estimate report.

        Args:
            report: Report to display
        """
        if self.level == OutputLevel.QUIET:
            return

        scope = f"k={report.k}, n={report.n}" if report.k is not None else "exact inputs"
        print(f"Estimator {report.estimator} ({report.model.tag}), d={report.d}, {scope}")
        if report.estimator == "general-normal":
            print(f"  beta1_hat = {report.beta1_hat:.6g}")
            print(f"  beta2_hat = {report.beta2_hat:.6g}")
            print(f"  rho_hat   = {report.rho_hat:.6g}")
        else:
            print(f"  beta_hat = {report.beta_hat:.6g}")
        if report.joint_r_hat is not None:
            print(f"  joint R_hat = {report.joint_r_hat:.6g}")
        if report.variance_hat is not None:
            doubled = report.variance_hat.doubled
            extra = f", doubled constant {doubled:.6g}" if doubled is not None else ""
            print(f"  asymptotic variance: delta {report.variance_hat.delta:.6g}{extra}")

        excluded = report.excluded_pairs
        if excluded:
            listed = ", ".join(f"({j},{m})" for j, m in excluded)
            print(f"  excluded {len(excluded)} independent pair(s): {listed}")
        clamped = [p for p in report.per_pair if p.clamped]
        if clamped:
            print(f"  {len(clamped)} pair(s) clamped at beta_max")

        if self.verbose and report.per_pair:
            print("  pair      distance      R_hat   beta_pair        gap")
            for pair in report.per_pair:
                beta = "-" if pair.beta_hat is None else f"{pair.beta_hat:.6g}"
                gap = "-" if pair.gap is None else f"{pair.gap:+.4f}"
                print(f"  ({pair.j},{pair.m})  {pair.distance:10.4g} {pair.r_hat:10.4f} {beta:>11} {gap:>10}")

    def print_diagnostic(self, table: DiagnosticTable) -> None:
        """Print the largest gap and, verbosely, the whole table."""
        if self.level == OutputLevel.QUIET:
            return

        print(f"Model diagnostic over {len(table.rows)} pair(s): max |R_hat - R_model| = {table.max_abs_gap:.6g}")
        if self.verbose:
            for row in table.rows:
                print(f"  ({row.j},{row.m})  distance {row.distance:.4g}  "
                      f"R_hat {row.r_hat:.4f}  R_model {row.r_model:.4f}  gap {row.gap:+.4f}")

    def print_tail_summary(self, model: KernelModel, j: int, m: int, distance: float, lam: float) -> None:
        """Print the tail dependence coefficient of the evaluated pair."""
        if self.level == OutputLevel.QUIET:
            return
        print(f"{_describe_model(model)}, sites {j} and {m} at distance {distance:.6g}: R(1,1) = {lam:.10g}")

    def print_progress(self, done: int, total: int) -> None:
        """Print experiment progress (verbose only)."""
        if not self.verbose:
            return
        print(f"  {done}/{total} run(s) finished")

    def print_experiment(self, summary: ExperimentSummary) -> None:
        """
        Print an experiment summary.

        Args:
            summary: Aggregated experiment figures
        """
        if self.level == OutputLevel.QUIET:
            return

        print(f"Experiment: {summary.runs} run(s), {summary.failures} failure(s), "
              f"k={summary.k}, n={summary.n}, true beta {summary.true_beta:g}")
        if summary.mean_beta_hat is None:
            print("  no successful runs")
            return
        print(f"  mean beta_hat {summary.mean_beta_hat:.6g}, "
              f"within 15%: {100 * summary.relative_error_within_015:.1f}% of runs")
        shares = summary.component_error_within_020
        if shares is not None:
            print(f"  mean (beta1, beta2, rho) = ({summary.mean_beta1_hat:.6g}, {summary.mean_beta2_hat:.6g}, "
                  f"{summary.mean_rho_hat:.6g}), true ({summary.true_beta:g}, {summary.true_beta2:g}, "
                  f"{summary.true_rho:g})")
            print(f"  error < 0.2: beta1 {100 * shares['beta1']:.1f}%, beta2 {100 * shares['beta2']:.1f}%, "
                  f"rho {100 * shares['rho']:.1f}%, all three {100 * shares['all']:.1f}% of runs")
        print(f"  sqrt(k)(beta_hat - beta): mean {summary.mean_scaled_error:.4g}"
              + (f", variance {summary.var_scaled_error:.4g}" if summary.var_scaled_error is not None else ""))
        if summary.predicted_variance_delta is not None:
            doubled = summary.predicted_variance_doubled
            print(f"  predicted variance: delta {summary.predicted_variance_delta:.4g}"
                  + (f", doubled constant {doubled:.4g}" if doubled is not None else "")
                  + f"; matching: {summary.matching_candidate or 'none'}")
        if summary.anderson_statistic is not None:
            verdict = "pass" if summary.anderson_pass else "fail"
            print(f"  Anderson-Darling {summary.anderson_statistic:.4f} "
                  f"(1% critical {summary.anderson_critical_1pct:.4f}): {verdict}")

    def print_written(self, path: PathLike) -> None:
        """Note a file that was written."""
        if self.level == OutputLevel.QUIET:
            return
        print(f"Wrote {path}")


def write_json(path: PathLike, payload) -> None:
    """Write a JSON document with a trailing newline."""
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=False)
        handle.write("\n")


def write_pair_table(path: PathLike, reports: Iterable[EstimateReport], with_k: bool = False) -> None:
    """
    Write the per-pair CSV j,m,distance,R_hat,beta_hat_pair,gap.

    Args:
        path: Output file
        reports: Reports to write, in order
        with_k: Prefix every row with the report's k (sweep mode)
    """
    header = (("k",) if with_k else ()) + PAIR_COLUMNS
    with open(path, "w") as handle:
        handle.write(",".join(header) + "\n")
        for report in reports:
            for pair in report.per_pair:
                cells = [pair.j, pair.m, pair.distance, pair.r_hat, pair.beta_hat, pair.gap]
                if with_k:
                    cells.insert(0, report.k)
                handle.write(",".join(_cell(c) for c in cells) + "\n")


def write_diagnostic(path: PathLike, table: DiagnosticTable) -> None:
    """Write the diagnostic CSV j,m,distance,R_hat,R_model,gap."""
    with open(path, "w") as handle:
        handle.write(",".join(DIAGNOSTIC_COLUMNS) + "\n")
        for row in table.rows:
            cells = [row.j, row.m, row.distance, row.r_hat, row.r_model, row.gap]
            handle.write(",".join(_cell(c) for c in cells) + "\n")


def write_grid(path: Optional[PathLike], rows: List[Tuple[float, float, float]]) -> List[str]:
    """
    Format (w1, w2, value) rows as CSV and write them when a path is given.

    Returns:
        List[str]: The CSV lines, header first
    """
    lines = ["w1,w2,neg_log_cdf"] + [",".join(format_number(v) for v in row) for row in rows]
    if path is not None:
        Path(path).write_text("\n".join(lines) + "\n")
    return lines


def write_spectral(path: Optional[PathLike], rows: List[Tuple[float, float]]) -> List[str]:
    """Format (theta, s_theta) rows as CSV, writing them when a path is given."""
    lines = ["theta,s_theta"] + [",".join(format_number(v) for v in row) for row in rows]
    if path is not None:
        Path(path).write_text("\n".join(lines) + "\n")
    return lines
