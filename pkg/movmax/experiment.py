"""
Monte-Carlo experiment harness.

Repeats simulate -> estimate with per-run seeds (master seed XOR run
index) and compares the empirical spread of sqrt(k)(beta_hat - beta)
with the asymptotic variance candidates of the estimation module.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy import stats

from .config import RunConfig
from .errors import ConfigError, MovmaxError
from .estimation import (
    VarianceCandidates,
    asymptotic_variance_pair,
    estimate,
    range_variance,
    resolve_estimator,
)
from .exactdist import PairDependence
from .kernels import ModelFamily
from .simulator import simulate
from .utils import format_number

logger = logging.getLogger(__name__)

RUN_COLUMNS = ("run", "seed", "k", "beta_hat", "beta1_hat", "beta2_hat", "rho_hat", "scaled_error", "error")
_MIN_FOR_ANDERSON = 8
_RELATIVE_BOUND = 0.15
_COMPONENT_BOUND = 0.2
_COMPONENTS = ("beta1", "beta2", "rho")
_MATCH_FACTOR = 2.0


@dataclass
class RunResult:
    """One simulate -> estimate run."""
    run: int
    seed: int
    k: int
    beta_hat: Optional[float] = None
    beta1_hat: Optional[float] = None
    beta2_hat: Optional[float] = None
    rho_hat: Optional[float] = None
    scaled_error: Optional[float] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def estimate_value(self) -> Optional[float]:
        """Estimate of the tracked parameter (beta, or beta1 for gnormal2d)."""
        return self.beta1_hat if self.beta_hat is None else self.beta_hat

    def csv_row(self) -> str:
        cells = []
        for name in RUN_COLUMNS:
            value = getattr(self, name)
            if value is None:
                cells.append("")
            elif isinstance(value, float):
                cells.append(format_number(value))
            else:
                cells.append(str(value).replace(",", ";").replace("\n", " "))
        return ",".join(cells)


@dataclass
class ExperimentSummary:
    """Aggregate figures of an experiment."""
    runs: int
    failures: int
    true_beta: float
    k: int
    n: int
    mean_scaled_error: Optional[float] = None
    var_scaled_error: Optional[float] = None
    mean_beta_hat: Optional[float] = None
    relative_error_within_015: Optional[float] = None
    anderson_statistic: Optional[float] = None
    anderson_critical_1pct: Optional[float] = None
    anderson_pass: Optional[bool] = None
    predicted_variance_delta: Optional[float] = None
    predicted_variance_doubled: Optional[float] = None
    matching_candidate: Optional[str] = None
    true_beta2: Optional[float] = None
    true_rho: Optional[float] = None
    mean_beta1_hat: Optional[float] = None
    mean_beta2_hat: Optional[float] = None
    mean_rho_hat: Optional[float] = None
    component_error_within_020: Optional[Dict[str, float]] = None

    def to_dict(self) -> Dict[str, Any]:
        payload = dict(self.__dict__)
        if self.component_error_within_020 is not None:
            payload["component_error_within_020"] = dict(self.component_error_within_020)
        return payload


def run_seed(master: int, run: int) -> int:
    """Seed of one run: master XOR run index."""
    return int(master) ^ int(run)


def tracked_parameter(cfg: RunConfig) -> float:
    """True value of the parameter the harness tracks."""
    if cfg.model.family is ModelFamily.GENERAL_NORMAL_2D:
        return float(cfg.model.beta1)
    return float(cfg.model.beta)


def _threshold(cfg: RunConfig) -> int:
    thresholds = cfg.thresholds()
    if not thresholds:
        raise ConfigError("[estimate] k: the experiment needs a threshold count")
    if len(thresholds) > 1:
        raise ConfigError(f"[estimate] k_grid: an experiment runs at one threshold count, "
                          f"got {len(thresholds)}; set k or a single k_grid entry")
    return thresholds[0]


def _one_run(cfg: RunConfig, run: int) -> RunResult:
    k = _threshold(cfg)
    seed = run_seed(cfg.mc_seed, run)
    result = RunResult(run, seed, k)
    try:
        obs = simulate(cfg.model, cfg.sites, cfg.n, replace(cfg.sim, seed=seed, workers=1))
        report = estimate(obs, cfg.model, k, cfg.estimator, cfg.beta_max, with_variance=False)
    except MovmaxError as e:
        result.error = f"{type(e).__name__}: {e}"
        return result

    result.beta_hat = report.beta_hat
    result.beta1_hat = report.beta1_hat
    result.beta2_hat = report.beta2_hat
    result.rho_hat = report.rho_hat
    result.scaled_error = math.sqrt(k) * (result.estimate_value - tracked_parameter(cfg))
    return result


def _run_block(cfg: RunConfig, runs: List[int]) -> List[RunResult]:
    return [_one_run(cfg, run) for run in runs]


def predicted_variance(cfg: RunConfig) -> Optional[VarianceCandidates]:
    """
    Variance candidates of the experiment's estimate at the true model.

    Available when the estimate is a single statistic: one site pair, or
    the range estimator. Averages over several dependent pairs have no
    prediction.
    """
    name = resolve_estimator(cfg.model, cfg.estimator)
    if name == "general-normal":
        return None
    if name == "range" and cfg.sites.d > 2:
        return range_variance(cfg.model, cfg.sites)
    if cfg.sites.d != 2:
        return None
    return asymptotic_variance_pair(PairDependence.between(cfg.model, cfg.sites, 0, 1))


def _matching(empirical: float, candidates: VarianceCandidates) -> Optional[str]:
    best, best_gap = None, math.inf
    for name in ("delta", "doubled"):
        predicted = getattr(candidates, name)
        if predicted is None or predicted <= 0:
            continue
        gap = abs(math.log(empirical / predicted))
        if gap <= math.log(_MATCH_FACTOR) and gap < best_gap:
            best, best_gap = name, gap
    return best


def _summarize_components(cfg: RunConfig, good: List[RunResult], summary: ExperimentSummary) -> None:
    truth = np.array([cfg.model.beta1, cfg.model.beta2, cfg.model.rho], dtype=float)
    fitted = np.array([[r.beta1_hat, r.beta2_hat, r.rho_hat] for r in good], dtype=float)
    summary.mean_beta1_hat, summary.mean_beta2_hat, summary.mean_rho_hat = (float(v) for v in fitted.mean(axis=0))
    close = np.abs(fitted - truth) < _COMPONENT_BOUND
    shares = {name: float(close[:, i].mean()) for i, name in enumerate(_COMPONENTS)}
    shares["all"] = float(close.all(axis=1).mean())
    summary.component_error_within_020 = shares


def summarize(cfg: RunConfig, results: List[RunResult],
              candidates: Optional[VarianceCandidates] = None) -> ExperimentSummary:
    """
    Summary statistics over the successful runs.

    Args:
        cfg: Experiment configuration
        results: Per-run results
        candidates: Predicted variances (None skips the comparison)
    """
    truth = tracked_parameter(cfg)
    good = [r for r in results if r.ok]
    summary = ExperimentSummary(
        runs=len(results),
        failures=len(results) - len(good),
        true_beta=truth,
        k=_threshold(cfg),
        n=cfg.n,
    )
    if candidates is not None:
        summary.predicted_variance_delta = candidates.delta
        summary.predicted_variance_doubled = candidates.doubled
    general_normal = cfg.model.family is ModelFamily.GENERAL_NORMAL_2D
    if general_normal:
        summary.true_beta2 = float(cfg.model.beta2)
        summary.true_rho = float(cfg.model.rho)
    if not good:
        return summary
    if general_normal:
        _summarize_components(cfg, good, summary)

    scaled = np.array([r.scaled_error for r in good])
    estimates = np.array([r.estimate_value for r in good])
    summary.mean_scaled_error = float(scaled.mean())
    summary.mean_beta_hat = float(estimates.mean())
    summary.relative_error_within_015 = float(np.mean(np.abs(estimates - truth) / truth < _RELATIVE_BOUND))

    if scaled.size >= 2:
        summary.var_scaled_error = float(scaled.var(ddof=1))
        if candidates is not None and summary.var_scaled_error > 0:
            summary.matching_candidate = _matching(summary.var_scaled_error, candidates)

    if scaled.size >= _MIN_FOR_ANDERSON and np.ptp(scaled) > 0:
        test = stats.anderson(scaled, dist="norm")
        levels = np.asarray(test.significance_level, dtype=float)
        index = int(np.argmin(np.abs(levels - 1.0)))
        summary.anderson_statistic = float(test.statistic)
        summary.anderson_critical_1pct = float(test.critical_values[index])
        summary.anderson_pass = bool(test.statistic < test.critical_values[index])
    return summary


def run_experiment(cfg: RunConfig,
                   progress: Optional[Callable[[int, int], None]] = None) -> Tuple[List[RunResult], ExperimentSummary]:
    """
    Run cfg.runs seeded experiments and summarize them.

    Rows come back in run order whatever the worker count. Runs that
    raise a movmax error are recorded with their message and counted as
    failures.

    Args:
        cfg: Experiment configuration
        progress: Called with (finished, total) after each finished block

    Returns:
        Tuple[List[RunResult], ExperimentSummary]: Rows and summary
    """
    truth = tracked_parameter(cfg)
    if not truth > 0:
        raise ConfigError("[model] beta: the true parameter must be positive")
    _threshold(cfg)

    total = cfg.runs
    workers = min(cfg.mc_workers, total)
    logger.debug("experiment: %d run(s), n=%d, %d worker(s)", total, cfg.n, workers)

    if workers == 1:
        results = []
        for run in range(total):
            results.append(_one_run(cfg, run))
            if progress:
                progress(run + 1, total)
    else:
        blocks = [list(chunk) for chunk in np.array_split(np.arange(total), workers)]
        results = []
        with ProcessPoolExecutor(max_workers=workers) as executor:
            for block in executor.map(_run_block, [cfg] * len(blocks), [[int(r) for r in b] for b in blocks]):
                results.extend(block)
                if progress:
                    progress(len(results), total)

    for result in results:
        if not result.ok:
            logger.info("run %d (seed %d) failed: %s", result.run, result.seed, result.error)

    try:
        candidates = predicted_variance(cfg)
    except MovmaxError as e:
        logger.warning("no variance prediction: %s", e)
        candidates = None
    return results, summarize(cfg, results, candidates)


def write_runs(path: Union[str, Path], results: List[RunResult]) -> None:
    """Write one CSV row per run, in run order."""
    with open(path, "w") as handle:
        handle.write(",".join(RUN_COLUMNS) + "\n")
        for result in results:
            handle.write(result.csv_row() + "\n")
