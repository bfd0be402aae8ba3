"""
Moving-maximum simulator.

Draws the simple max-stable process

    Z(t) = max_j phi(X_j - t) / Y_j

at a finite set of sites, where (X_j, Y_j) are the points of a unit-rate
Poisson process on W x (0, inf). W is the bounding box of the sites
widened by a margin outside which the kernel carries negligible mass.
Points are generated in order of increasing Y_j = Gamma_j / |W| and a
replication stops as soon as sup(phi) / Y_j falls below the smallest
running maximum, since no later point can change any site.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from .data import ObservationMatrix, SiteSet
from .errors import DomainError, ParameterDomainError, SimulationBudgetError
from .kernels import KernelModel, density, peak_density, tail_radius

logger = logging.getLogger(__name__)

_FIRST_BATCH = 64
_MAX_BATCH = 4096
_SEED_LIMIT = 2 ** 64


@dataclass
class SimConfig:
    """
    Simulation settings.

    Attributes:
        seed: Master seed, 0 <= seed < 2**64
        window_margin: Margin added around the sites on every axis;
            None selects it from tail_mass_tol
        tail_mass_tol: Kernel mass allowed outside the margin, in (0, 1e-3]
        max_points: Poisson points allowed per replication before failing
        workers: Worker processes (1 runs in-process)
    """
    seed: int = 0
    window_margin: Optional[float] = None
    tail_mass_tol: float = 1e-8
    max_points: int = 10 ** 7
    workers: int = 1

    def __post_init__(self):
        if int(self.seed) != self.seed or not 0 <= int(self.seed) < _SEED_LIMIT:
            raise ParameterDomainError(f"seed must be an integer in [0, 2**64), got {self.seed!r}")
        self.seed = int(self.seed)
        if self.window_margin is not None and not (math.isfinite(self.window_margin) and self.window_margin > 0):
            raise ParameterDomainError(f"window_margin must be positive, got {self.window_margin!r}")
        if not 0.0 < self.tail_mass_tol <= 1e-3:
            raise ParameterDomainError(f"tail_mass_tol must lie in (0, 1e-3], got {self.tail_mass_tol!r}")
        if int(self.max_points) < 1000:
            raise ParameterDomainError(f"max_points must be at least 1000, got {self.max_points!r}")
        if int(self.workers) < 1:
            raise ParameterDomainError(f"workers must be at least 1, got {self.workers!r}")


@dataclass
class SimulationStats:
    """
    Truncation and cost figures of a simulation run.

    Attributes:
        window_lo: Lower corner of the simulation window
        window_hi: Upper corner of the simulation window
        window_volume: Lebesgue measure |W|
        point_counts: Poisson points consumed per replication
    """
    window_lo: np.ndarray
    window_hi: np.ndarray
    window_volume: float
    point_counts: np.ndarray

    @property
    def mean_points(self) -> float:
        """Average points per replication."""
        return float(self.point_counts.mean()) if self.point_counts.size else 0.0

    @property
    def max_points(self) -> int:
        """Largest point count of any replication."""
        return int(self.point_counts.max()) if self.point_counts.size else 0


def simulation_window(model: KernelModel, sites: SiteSet, cfg: SimConfig) -> Tuple[np.ndarray, np.ndarray]:
    """
    Window W containing the sites plus the truncation margin.

    Returns:
        Tuple[np.ndarray, np.ndarray]: Lower and upper corners
    """
    if cfg.window_margin is None:
        margin = tail_radius(model, cfg.tail_mass_tol)
    else:
        margin = np.full(sites.dimension, float(cfg.window_margin))
    lo, hi = sites.bounds()
    return lo - margin, hi + margin


def replication_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream of one replication, independent of scheduling."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def _draw_replication(model: KernelModel, points: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                      volume: float, peak: float, rng: np.random.Generator,
                      max_points: int) -> Tuple[np.ndarray, int]:
    d, dim = points.shape
    running = np.zeros(d)
    gamma = 0.0
    used = 0
    batch = _FIRST_BATCH

    while used < max_points:
        size = min(batch, max_points - used)
        arrivals = gamma + np.cumsum(rng.standard_exponential(size))
        gamma = arrivals[-1]
        y = arrivals / volume
        x = rng.uniform(lo, hi, size=(size, dim))

        offsets = x[:, None, :] - points[None, :, :]
        if dim == 1:
            offsets = offsets[..., 0]
        contrib = density(model, offsets) / y[:, None]

        after = np.maximum.accumulate(np.vstack([running, contrib]), axis=0)
        before = after[:-1]
        stop = peak / y < before.min(axis=1)
        if stop.any():
            first = int(np.argmax(stop))
            return before[first], used + first

        running = after[-1]
        used += size
        batch = min(2 * batch, _MAX_BATCH)

    raise SimulationBudgetError(
        f"replication needed more than {max_points} Poisson points; "
        f"raise max_points or shrink the window (a larger tail_mass_tol or an explicit "
        f"window_margin; heavy-tailed t1d/t2d kernels usually need one)"
    )


def _simulate_block(model: KernelModel, points: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                    seed: int, start: int, stop: int, max_points: int) -> Tuple[np.ndarray, np.ndarray]:
    volume = float(np.prod(hi - lo))
    peak = peak_density(model)
    values = np.empty((stop - start, points.shape[0]))
    counts = np.empty(stop - start, dtype=np.int64)
    for row, index in enumerate(range(start, stop)):
        rng = replication_rng(seed, index)
        values[row], counts[row] = _draw_replication(model, points, lo, hi, volume, peak, rng, max_points)
    return values, counts


def simulate_with_stats(model: KernelModel, sites: SiteSet, n: int,
                        cfg: Optional[SimConfig] = None) -> Tuple[ObservationMatrix, SimulationStats]:
    """
    Draw n independent replications and report truncation statistics.

    Args:
        model: Kernel model
        sites: Observation sites
        n: Number of replications, >= 1
        cfg: Simulation settings (defaults when omitted)

    Returns:
        Tuple[ObservationMatrix, SimulationStats]: Draws and statistics

    Raises:
        DomainError: On a dimension mismatch or n < 1
        SimulationBudgetError: If a replication exhausts max_points
    """
    cfg = cfg or SimConfig()
    if model.dimension != sites.dimension:
        raise DomainError(f"{model.tag} is {model.dimension}D but the sites are {sites.dimension}D")
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    n = int(n)

    lo, hi = simulation_window(model, sites, cfg)
    points = sites.points()
    workers = min(int(cfg.workers), n)
    logger.debug("simulating %s: d=%d n=%d window=[%s, %s] workers=%d",
                 model.tag, sites.d, n, lo, hi, workers)

    if workers == 1:
        values, counts = _simulate_block(model, points, lo, hi, cfg.seed, 0, n, int(cfg.max_points))
    else:
        edges = np.linspace(0, n, workers + 1).astype(int)
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [
                executor.submit(_simulate_block, model, points, lo, hi, cfg.seed,
                                int(start), int(stop), int(cfg.max_points))
                for start, stop in zip(edges[:-1], edges[1:])
            ]
            blocks = [future.result() for future in futures]
        values = np.vstack([block[0] for block in blocks])
        counts = np.concatenate([block[1] for block in blocks])

    stats = SimulationStats(lo, hi, float(np.prod(hi - lo)), counts)
    logger.debug("simulated %d replications, mean %.1f points, max %d",
                 n, stats.mean_points, stats.max_points)
    return ObservationMatrix(values, sites), stats


def simulate(model: KernelModel, sites: SiteSet, n: int, cfg: Optional[SimConfig] = None) -> ObservationMatrix:
    """
    Draw n independent replications of (Z(t_1), ..., Z(t_d)).

    Output depends only on (model, sites, n, seed and window settings),
    never on the worker count.

    Raises:
        DomainError: On a dimension mismatch or n < 1
        SimulationBudgetError: If a replication exhausts max_points
    """
    obs, _ = simulate_with_stats(model, sites, n, cfg)
    return obs


Observations = Union[ObservationMatrix, np.ndarray]


def _wrap(template: Observations, values: np.ndarray) -> Observations:
    if isinstance(template, ObservationMatrix):
        return template.with_values(values)
    return values


def _values(z: Observations) -> np.ndarray:
    return np.asarray(z.values if isinstance(z, ObservationMatrix) else z, dtype=float)


def transform_to_gev(z: Observations, gamma, mu, sigma) -> Observations:
    """
    Map standard Frechet values to GEV margins.

    Applies x -> mu + sigma (x**gamma - 1) / gamma per site, with the
    gamma = 0 case read as mu + sigma log x. Parameters broadcast over
    the columns.

    Args:
        z: Frechet observations (all values > 0)
        gamma: Shape per site
        mu: Location per site
        sigma: Scale per site (> 0)

    Returns:
        Same container type as z

    Raises:
        DomainError: On nonpositive input or sigma
    """
    values = _values(z)
    gamma, mu, sigma = (np.asarray(p, dtype=float) for p in (gamma, mu, sigma))
    if np.any(sigma <= 0):
        raise DomainError("sigma must be positive at every site")
    if np.any(values <= 0):
        raise DomainError("Frechet values must be positive")

    log_z = np.log(values)
    safe_gamma = np.where(gamma == 0, 1.0, gamma)
    scaled = np.where(gamma == 0, log_z, np.expm1(gamma * log_z) / safe_gamma)
    return _wrap(z, mu + sigma * scaled)


def transform_from_gev(x: Observations, gamma, mu, sigma) -> Observations:
    """
    Inverse of transform_to_gev, back to standard Frechet margins.

    Raises:
        DomainError: If sigma <= 0 or a value lies outside the GEV support
    """
    values = _values(x)
    gamma, mu, sigma = (np.asarray(p, dtype=float) for p in (gamma, mu, sigma))
    if np.any(sigma <= 0):
        raise DomainError("sigma must be positive at every site")

    y = (values - mu) / sigma
    inside = 1.0 + gamma * y
    if np.any((gamma != 0) & (inside <= 0)):
        raise DomainError("value outside the support of the GEV margin")
    safe_gamma = np.where(gamma == 0, 1.0, gamma)
    log_z = np.where(gamma == 0, y, np.log1p(np.where(gamma == 0, 0.0, gamma * y)) / safe_gamma)
    return _wrap(x, np.exp(log_z))
