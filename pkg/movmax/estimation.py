"""
Rank-based estimation of tail dependence.

R_hat counts the replications that exceed the upper order statistics at
every selected site. Each model parameter estimator inverts the model
value of R(1, 1) pair by pair (or, for 1D sites, the joint value over all
sites), so every estimator only sees ranks and is invariant under
increasing transformations of the margins.

Every estimator has a "*_from_r" core that takes R values directly; the
observation-based entry points compute R_hat and delegate to it.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import special
from scipy.optimize import brentq

from .data import ObservationMatrix, SiteSet
from .errors import (
    DataError,
    DegenerateError,
    DesignDeficiencyError,
    DomainError,
    EstimationFailureError,
    InfeasibleEstimateError,
    UnsupportedModelError,
)
from .exactdist import PairDependence, L_partials, R_pair, L_pair
from .kernels import KernelModel, ModelFamily, marginal_isf, marginal_pdf
from .oracle import R_numeric

logger = logging.getLogger(__name__)

ESTIMATORS = ("auto", "pairwise", "range", "exp2d", "general-normal")

_PAIRWISE_FAMILIES = (
    ModelFamily.NORMAL_1D,
    ModelFamily.DOUBLE_EXP_1D,
    ModelFamily.STUDENT_T_1D,
    ModelFamily.NORMAL_2D,
    ModelFamily.STUDENT_T_2D,
)
_RANK_RTOL = 1e-10
_BETA_MAX_SCALE = 1e3
_VARIANCE_STEP = 1e-6


@dataclass
class VarianceCandidates:
    """
    Asymptotic variance of sqrt(k) (estimate - truth).

    Attributes:
        var_b: Variance of the Gaussian limit B(1, ..., 1) of sqrt(k)(R_hat - R)
        delta: Delta-method variance through the exact inversion map
        doubled: Variance with the derivative constant doubled (4 x delta);
            None where the inversion map has no such constant
    """
    var_b: float
    delta: float
    doubled: Optional[float] = None

    def to_dict(self) -> Dict[str, Optional[float]]:
        return {"var_b": self.var_b, "delta": self.delta, "doubled": self.doubled}


@dataclass
class PairEstimate:
    """
    Per-pair line of an estimate report.

    Attributes:
        j: First site index
        m: Second site index
        distance: |t_j - t_m|
        r_hat: R_hat(1, 1) of the pair (or the exact input value)
        beta_hat: Pairwise estimate (None when flagged or not applicable)
        q_hat: Squared Mahalanobis length estimate (general normal only)
        independent: R_hat = 0, excluded from the average
        clamped: Root search hit beta_max
        r_model: R(1, 1) of the fitted model
        variance: Asymptotic variance candidates at the fitted model
    """
    j: int
    m: int
    distance: float
    r_hat: float
    beta_hat: Optional[float] = None
    q_hat: Optional[float] = None
    independent: bool = False
    clamped: bool = False
    r_model: Optional[float] = None
    variance: Optional[VarianceCandidates] = None

    @property
    def gap(self) -> Optional[float]:
        """Signed R_hat - R_model."""
        return None if self.r_model is None else self.r_hat - self.r_model

    def to_dict(self) -> Dict[str, Any]:
        return {
            "j": self.j,
            "m": self.m,
            "distance": self.distance,
            "R_hat": self.r_hat,
            "beta_hat_pair": self.beta_hat,
            "Q_hat": self.q_hat,
            "independent": self.independent,
            "clamped": self.clamped,
            "R_model": self.r_model,
            "gap": self.gap,
            "variance": None if self.variance is None else self.variance.to_dict(),
        }


@dataclass
class EstimateReport:
    """
    Result of one estimator run.

    Attributes:
        estimator: pairwise | range | exp2d | general-normal
        model: Model family fitted; only its tag and nu or alpha are used
        k: Threshold count (None for exact inputs)
        n: Replication count (None for exact inputs)
        d: Site count
        beta_hat: Single-parameter estimate
        beta1_hat: General normal first-axis strength
        beta2_hat: General normal second-axis strength
        rho_hat: General normal correlation
        a_hat: Least-squares quadratic-form coefficients
        joint_r_hat: Joint R_hat over all sites (range estimator)
        per_pair: Per-pair table
        variance_hat: Variance candidates of the reported estimate when it
            is a single statistic (one pair, or the range estimator)
    """
    estimator: str
    model: KernelModel
    k: Optional[int]
    n: Optional[int]
    d: int
    beta_hat: Optional[float] = None
    beta1_hat: Optional[float] = None
    beta2_hat: Optional[float] = None
    rho_hat: Optional[float] = None
    a_hat: Optional[Tuple[float, float, float]] = None
    joint_r_hat: Optional[float] = None
    per_pair: List[PairEstimate] = field(default_factory=list)
    variance_hat: Optional[VarianceCandidates] = None

    @property
    def excluded_pairs(self) -> List[Tuple[int, int]]:
        """Pairs flagged independent."""
        return [(p.j, p.m) for p in self.per_pair if p.independent]

    def fitted_model(self) -> Optional[KernelModel]:
        """Model at the estimated parameters (None at beta_hat = 0)."""
        if self.estimator == "general-normal":
            return self.model.with_general_normal(self.beta1_hat, self.beta2_hat, self.rho_hat)
        if self.beta_hat is None or self.beta_hat <= 0:
            return None
        return self.model.with_beta(self.beta_hat)

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready mapping with the documented report keys."""
        return {
            "estimator": self.estimator,
            "model": {k: v for k, v in self.model.to_mapping().items() if k in ("model", "nu", "alpha")},
            "k": self.k,
            "n": self.n,
            "d": self.d,
            "beta_hat": self.beta_hat,
            "beta1_hat": self.beta1_hat,
            "beta2_hat": self.beta2_hat,
            "rho_hat": self.rho_hat,
            "a_hat": None if self.a_hat is None else list(self.a_hat),
            "joint_R_hat": self.joint_r_hat,
            "excluded_pairs": [list(p) for p in self.excluded_pairs],
            "variance_hat": None if self.variance_hat is None else self.variance_hat.to_dict(),
            "per_pair": [p.to_dict() for p in self.per_pair],
        }


# -- R_hat -------------------------------------------------------------------


def column_ranks(values: np.ndarray) -> np.ndarray:
    """
    Ranks 1..n per column, ties broken by row index.

    Args:
        values: Array of shape (n, d)

    Returns:
        np.ndarray: Integer ranks of the same shape
    """
    values = np.asarray(values)
    n = values.shape[0]
    ranks = np.empty(values.shape, dtype=np.int64)
    for j in range(values.shape[1]):
        order = np.argsort(values[:, j], kind="stable")
        ranks[order, j] = np.arange(1, n + 1)
    return ranks


def _check_k(k: int, n: int) -> int:
    if int(k) != k or not 1 <= k < n:
        raise DomainError(f"k must be an integer in [1, n) = [1, {n}), got {k!r}")
    return int(k)


def _r_hat_from_ranks(ranks: np.ndarray, columns: Sequence[int], x: Sequence[float], k: int) -> float:
    n = ranks.shape[0]
    exceed = np.ones(n, dtype=bool)
    for column, weight in zip(columns, x):
        count = math.floor(k * weight)
        if not 1 <= count <= n:
            raise DomainError(f"[k x] must lie in [1, n]; k = {k}, x = {weight!r} gives {count}")
        exceed &= ranks[:, column] >= n - count + 1
    return float(np.count_nonzero(exceed)) / k


def r_hat(obs: ObservationMatrix, site_indices: Optional[Sequence[int]] = None,
          x: Optional[Sequence[float]] = None, k: int = 1) -> float:
    """
    Empirical tail dependence function R_hat(x).

    (1/k) times the number of replications that, at every selected site j,
    reach the (n - [k x_j] + 1)-th order statistic of that site.

    Args:
        obs: Observations
        site_indices: Distinct column indices (all sites when omitted)
        x: Positive weights, one per selected site (ones when omitted)
        k: Threshold count, 1 <= k < n

    Returns:
        float: R_hat(x)

    Raises:
        DomainError: If k or a [k x_j] count is out of range, or the
            selection is invalid
    """
    columns = list(range(obs.d)) if site_indices is None else [int(j) for j in site_indices]
    if len(set(columns)) != len(columns) or not columns:
        raise DomainError("site indices must be distinct and non-empty")
    if any(not 0 <= j < obs.d for j in columns):
        raise DomainError(f"site index out of range for {obs.d} site(s)")
    weights = [1.0] * len(columns) if x is None else [float(v) for v in x]
    if len(weights) != len(columns):
        raise DomainError("x must have one entry per selected site")
    k = _check_k(k, obs.n)
    ranks = column_ranks(obs.values[:, columns])
    return _r_hat_from_ranks(ranks, range(len(columns)), weights, k)


def pairwise_r_hat(obs: ObservationMatrix, k: int) -> List[float]:
    """R_hat(1, 1) for every site pair, in SiteSet.pairs() order."""
    k = _check_k(k, obs.n)
    ranks = column_ranks(obs.values)
    return [_r_hat_from_ranks(ranks, (j, m), (1.0, 1.0), k) for j, m in obs.sites.pairs()]


# -- variance ----------------------------------------------------------------


def b_variance(L: float, partials: Sequence[float], pair_r: np.ndarray) -> float:
    """
    Variance of the Gaussian limit of the d-site tail count process.

    L - 2 sum L_j + sum L_j^2 + 2 sum_{i<j} L_i L_j R_ij, which is the
    variance of W(union) - sum L_j W(A_j) under the exponent measure.

    Args:
        L: L(1, ..., 1)
        partials: dL/dx_j at (1, ..., 1)
        pair_r: Symmetric matrix of pairwise R_ij(1, 1)

    Returns:
        float: Nonnegative variance
    """
    partials = np.asarray(partials, dtype=float)
    pair_r = np.asarray(pair_r, dtype=float)
    cross = 0.0
    for i in range(partials.size):
        for j in range(i + 1, partials.size):
            cross += partials[i] * partials[j] * pair_r[i, j]
    value = L - 2.0 * partials.sum() + float(np.sum(partials ** 2)) + 2.0 * cross
    return max(value, 0.0)


def joint_r_variance(R: float, partials: Sequence[float], pair_r: np.ndarray) -> float:
    """
    Variance of the Gaussian limit of sqrt(k)(R_hat_joint - R) at (1, ..., 1).

    R - 2 R sum R_j + sum R_j^2 + 2 sum_{i<j} R_i R_j R_ij with R_j the
    partials of the joint R; equals b_variance for two sites.
    """
    partials = np.asarray(partials, dtype=float)
    pair_r = np.asarray(pair_r, dtype=float)
    cross = 0.0
    for i in range(partials.size):
        for j in range(i + 1, partials.size):
            cross += partials[i] * partials[j] * pair_r[i, j]
    value = R - 2.0 * R * partials.sum() + float(np.sum(partials ** 2)) + 2.0 * cross
    return max(value, 0.0)


def _pair_b_variance(pd: PairDependence) -> float:
    L = L_pair(pd, 1.0, 1.0)
    partials = L_partials(pd, 1.0, 1.0, step=_VARIANCE_STEP)
    r = R_pair(pd, 1.0, 1.0)
    return b_variance(L, partials, np.array([[1.0, r], [r, 1.0]]))


def _exp2d_map(beta: float, small: float, total: float) -> float:
    return (1.0 + beta * small / 2.0) * math.exp(-beta * total / 2.0)


def _exp2d_slope(beta: float, small: float, total: float) -> float:
    decay = math.exp(-beta * total / 2.0)
    return small / 2.0 * decay - total / 2.0 * (1.0 + beta * small / 2.0) * decay


def asymptotic_variance_pair(pd: PairDependence) -> VarianceCandidates:
    """
    Asymptotic variance of the pairwise estimate for one pair.

    Var B(1, 1) comes from L, R and central-difference partials of L at
    (1, 1). It is then pushed through the derivative of the inversion
    map of the model family:

        single-parameter  1 / (|t| phi_0(beta |t| / 2))
        exp2d             1 / g'(beta), g(beta) = (1 + beta m/2) e^{-beta s/2}
        gnormal2d         dQ/dR = -4 z / phi(z), z = sqrt(Q)/2

    Raises:
        DegenerateError: If t = 0
    """
    if pd.is_degenerate:
        raise DegenerateError("asymptotic variance needs a nonzero displacement")
    var_b = _pair_b_variance(pd)
    fam = pd.model.family

    if fam is ModelFamily.GENERAL_NORMAL_2D:
        q = pd.scaled_distance ** 2
        z = math.sqrt(q) / 2.0
        density = math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
        return VarianceCandidates(var_b, var_b * 4.0 * q / density ** 2)

    if fam is ModelFamily.EXP_2D:
        small, large = pd.exp2d_arms
        slope = _exp2d_slope(pd.model.beta, small, small + large)
        delta = var_b / slope ** 2
    else:
        dist = pd.distance
        slope = dist * float(marginal_pdf(pd.model, pd.model.beta * dist / 2.0))
        delta = var_b / slope ** 2
    return VarianceCandidates(var_b, delta, 4.0 * delta)


def range_variance(model: KernelModel, sites: SiteSet) -> VarianceCandidates:
    """
    Asymptotic variance of the range estimator.

    The joint R(1, ..., 1) and its partials come from the quadrature
    oracle, the pairwise R_ij(1, 1) from the closed forms.

    Raises:
        DomainError: For 2D models or fewer than two sites
    """
    if model.dimension != 1 or sites.dimension != 1:
        raise DomainError("the range estimator is defined for 1D sites")
    if sites.d < 2:
        raise DomainError("the range estimator needs at least two sites")

    d = sites.d
    ones = np.ones(d)
    joint = R_numeric(model, sites, ones)
    partials = []
    for j in range(d):
        up, down = ones.copy(), ones.copy()
        up[j] += _VARIANCE_STEP
        down[j] -= _VARIANCE_STEP
        partials.append((R_numeric(model, sites, up) - R_numeric(model, sites, down)) / (2.0 * _VARIANCE_STEP))
    pair_r = np.eye(d)
    for j, m in sites.pairs():
        pair_r[j, m] = pair_r[m, j] = R_pair(PairDependence.between(model, sites, j, m), 1.0, 1.0)

    var_b = joint_r_variance(joint, partials, pair_r)
    spread = sites.site_range()
    slope = spread * float(marginal_pdf(model, model.beta * spread / 2.0))
    delta = var_b / slope ** 2
    return VarianceCandidates(var_b, delta, 4.0 * delta)


# -- estimators from R values ------------------------------------------------


def _check_r_values(sites: SiteSet, r_values: Sequence[float]) -> List[float]:
    values = [float(r) for r in r_values]
    if len(values) != len(sites.pairs()):
        raise DataError(f"expected {len(sites.pairs())} pair value(s), got {len(values)}")
    for r in values:
        if not (0.0 <= r <= 1.0 + 1e-12):
            raise DataError(f"R(1, 1) must lie in [0, 1], got {r!r}")
    return [min(r, 1.0) for r in values]


def _invert_marginal(model: KernelModel, r: float, length: float) -> float:
    # (2 / length) F^-1(1 - r/2)
    if r >= 1.0:
        return 0.0
    return 2.0 / length * float(marginal_isf(model, r / 2.0))


def _attach_fit(report: EstimateReport, sites: SiteSet, with_variance: bool) -> EstimateReport:
    fitted = report.fitted_model()
    for pair in report.per_pair:
        if fitted is None:
            pair.r_model = 1.0
            continue
        pd = PairDependence.between(fitted, sites, pair.j, pair.m)
        pair.r_model = R_pair(pd, 1.0, 1.0)
        if with_variance:
            pair.variance = asymptotic_variance_pair(pd)

    usable = [p for p in report.per_pair if not p.independent]
    if with_variance and report.estimator != "range" and len(usable) == 1:
        report.variance_hat = usable[0].variance
    return report


def pairwise_from_r(model: KernelModel, sites: SiteSet, r_values: Sequence[float],
                    k: Optional[int] = None, n: Optional[int] = None,
                    with_variance: bool = False) -> EstimateReport:
    """
    Pairwise estimator from per-pair R(1, 1) values.

    beta_jm = (2 / |t_j - t_m|) F^-1(1 - R_jm / 2), averaged over the
    pairs with R_jm > 0.

    Args:
        model: normal1d, dexp1d, t1d, normal2d or t2d (parameters other
            than beta are taken from it)
        sites: Site design
        r_values: R(1, 1) per pair, in SiteSet.pairs() order
        k: Threshold count recorded in the report
        n: Replication count recorded in the report
        with_variance: Attach asymptotic variances at the fitted model

    Returns:
        EstimateReport: Pairwise report

    Raises:
        UnsupportedModelError: For exp2d and gnormal2d
        EstimationFailureError: If every pair has R = 0
    """
    if model.family not in _PAIRWISE_FAMILIES:
        raise UnsupportedModelError(f"the pairwise estimator does not apply to {model.tag}")
    if model.dimension != sites.dimension:
        raise DomainError(f"{model.tag} is {model.dimension}D but the sites are {sites.dimension}D")
    values = _check_r_values(sites, r_values)

    per_pair = []
    for (j, m), r in zip(sites.pairs(), values):
        dist = sites.distance(j, m)
        if r <= 0.0:
            per_pair.append(PairEstimate(j, m, dist, r, independent=True))
            continue
        per_pair.append(PairEstimate(j, m, dist, r, beta_hat=_invert_marginal(model, r, dist)))

    usable = [p.beta_hat for p in per_pair if not p.independent]
    if not usable:
        raise EstimationFailureError("every site pair has R_hat = 0; the data look tail independent")
    if len(usable) < len(per_pair):
        logger.info("excluded %d independent pair(s)", len(per_pair) - len(usable))

    report = EstimateReport("pairwise", model, k, n, sites.d, beta_hat=float(np.mean(usable)),
                            per_pair=per_pair)
    return _attach_fit(report, sites, with_variance)


def range_from_r(model: KernelModel, sites: SiteSet, joint_r: float,
                 pair_r: Optional[Sequence[float]] = None,
                 k: Optional[int] = None, n: Optional[int] = None,
                 with_variance: bool = False) -> EstimateReport:
    """
    Range estimator 2 F^-1(1 - R/2) / (max t - min t) from the joint R(1, ..., 1).

    Args:
        model: One-dimensional model
        sites: At least two 1D sites
        joint_r: Joint R over all sites
        pair_r: Optional per-pair R values for the report table
        k: Threshold count recorded in the report
        n: Replication count recorded in the report
        with_variance: Attach the range-estimator variance

    Raises:
        UnsupportedModelError: For 2D models
        EstimationFailureError: If joint_r = 0
    """
    if model.dimension != 1 or sites.dimension != 1:
        raise UnsupportedModelError("the range estimator is defined for 1D models and sites")
    if model.family not in _PAIRWISE_FAMILIES:
        raise UnsupportedModelError(f"the range estimator does not apply to {model.tag}")
    if sites.d < 2:
        raise DomainError("the range estimator needs at least two sites")
    joint_r = float(joint_r)
    if not 0.0 <= joint_r <= 1.0 + 1e-12:
        raise DataError(f"R(1, ..., 1) must lie in [0, 1], got {joint_r!r}")
    if joint_r <= 0.0:
        raise EstimationFailureError("joint R_hat = 0; the sites look tail independent")

    beta_hat = _invert_marginal(model, min(joint_r, 1.0), sites.site_range())
    per_pair = []
    if pair_r is not None:
        for (j, m), r in zip(sites.pairs(), _check_r_values(sites, pair_r)):
            dist = sites.distance(j, m)
            per_pair.append(PairEstimate(j, m, dist, r, beta_hat=_invert_marginal(model, r, dist) if r > 0 else None,
                                         independent=r <= 0))

    report = EstimateReport("range", model, k, n, sites.d, beta_hat=beta_hat,
                            joint_r_hat=joint_r, per_pair=per_pair)
    report = _attach_fit(report, sites, with_variance=False)
    fitted = report.fitted_model()
    if with_variance and fitted is not None:
        if sites.d == 2:
            report.variance_hat = asymptotic_variance_pair(PairDependence.between(fitted, sites, 0, 1))
        else:
            report.variance_hat = range_variance(fitted, sites)
    return report


def default_beta_max(sites: SiteSet) -> float:
    """10**3 over the smallest pair distance."""
    return _BETA_MAX_SCALE / sites.min_pair_distance()


def exp2d_from_r(sites: SiteSet, r_values: Sequence[float], k: Optional[int] = None,
                 n: Optional[int] = None, beta_max: Optional[float] = None,
                 with_variance: bool = False) -> EstimateReport:
    """
    Exponential 2D estimator from per-pair R(1, 1) values.

    Each pair solves (1 + beta m/2) exp(-beta s/2) = R with m = min(a, b),
    s = a + b, (a, b) the absolute coordinate offsets; the map is strictly
    decreasing in beta. Roots beyond beta_max are clamped and flagged.

    Raises:
        DomainError: For 1D sites or coincident sites
        EstimationFailureError: If every pair has R = 0
    """
    if sites.dimension != 2:
        raise DomainError("the exp2d estimator needs 2D sites")
    values = _check_r_values(sites, r_values)
    upper = default_beta_max(sites) if beta_max is None else float(beta_max)
    if not upper > 0:
        raise DomainError(f"beta_max must be positive, got {beta_max!r}")

    per_pair = []
    for (j, m), r in zip(sites.pairs(), values):
        a, b = (abs(float(c)) for c in sites.displacement(j, m))
        small, total = min(a, b), a + b
        if total == 0.0:
            raise DomainError(f"sites {j} and {m} coincide")
        dist = sites.distance(j, m)
        if r <= 0.0:
            per_pair.append(PairEstimate(j, m, dist, r, independent=True))
            continue
        if r >= 1.0:
            per_pair.append(PairEstimate(j, m, dist, r, beta_hat=0.0))
            continue

        log_r = math.log(r)

        def excess(beta: float) -> float:
            return math.log1p(beta * small / 2.0) - beta * total / 2.0 - log_r

        if excess(upper) > 0.0:
            per_pair.append(PairEstimate(j, m, dist, r, beta_hat=upper, clamped=True))
            continue
        root = brentq(excess, 0.0, upper, xtol=1e-15, rtol=1e-15, maxiter=200)
        per_pair.append(PairEstimate(j, m, dist, r, beta_hat=root))

    usable = [p.beta_hat for p in per_pair if not p.independent]
    if not usable:
        raise EstimationFailureError("every site pair has R_hat = 0; the data look tail independent")

    model = KernelModel(ModelFamily.EXP_2D, beta=1.0)
    report = EstimateReport("exp2d", model, k, n, sites.d, beta_hat=float(np.mean(usable)), per_pair=per_pair)
    return _attach_fit(report, sites, with_variance)


def quadratic_design(sites: SiteSet, pairs: Sequence[Tuple[int, int]]) -> np.ndarray:
    """Rows (dt1^2, dt1 dt2, dt2^2) of the general normal design matrix."""
    rows = []
    for j, m in pairs:
        dt1, dt2 = sites.displacement(j, m)
        rows.append([dt1 * dt1, dt1 * dt2, dt2 * dt2])
    return np.array(rows, dtype=float).reshape(-1, 3)


def general_normal_from_r(sites: SiteSet, r_values: Sequence[float], k: Optional[int] = None,
                          n: Optional[int] = None, with_variance: bool = False) -> EstimateReport:
    """
    General normal least-squares fit from per-pair R(1, 1) values.

    Q_jm = (2 Phi^-1(1 - R_jm / 2))^2 estimates t' Sigma^-1 t, which is
    linear in a = (a1, a2, a3). a_hat minimises |Gamma a - q| and maps back to

        beta1 = sqrt(a1 - a2^2 / (4 a3))
        beta2 = sqrt(a3 - a2^2 / (4 a1))
        rho   = -a2 / (2 sqrt(a1 a3))

    Raises:
        DomainError: For 1D sites
        EstimationFailureError: If every pair has R = 0
        DesignDeficiencyError: If the usable pairs do not give a rank-3 design
        InfeasibleEstimateError: If a_hat is outside the model family
    """
    if sites.dimension != 2:
        raise DomainError("the general normal fit needs 2D sites")
    values = _check_r_values(sites, r_values)

    per_pair = []
    for (j, m), r in zip(sites.pairs(), values):
        dist = sites.distance(j, m)
        if r <= 0.0:
            per_pair.append(PairEstimate(j, m, dist, r, independent=True))
            continue
        z = 0.0 if r >= 1.0 else float(-special.ndtri(r / 2.0))
        per_pair.append(PairEstimate(j, m, dist, r, q_hat=(2.0 * z) ** 2))

    usable = [p for p in per_pair if not p.independent]
    if not usable:
        raise EstimationFailureError("every site pair has R_hat = 0; the data look tail independent")

    design = quadratic_design(sites, [(p.j, p.m) for p in usable])
    q = np.array([p.q_hat for p in usable])
    singular = np.linalg.svd(design, compute_uv=False)
    rank = int(np.sum(singular > _RANK_RTOL * singular[0])) if singular.size and singular[0] > 0 else 0
    if rank < 3:
        excluded = len(per_pair) - len(usable)
        detail = f" after excluding {excluded} independent pair(s)" if excluded else ""
        raise DesignDeficiencyError(
            f"site design has rank {rank} < 3{detail}; "
            f"need at least three pairs in non-collinear directions"
        )

    a_hat, _, _, _ = np.linalg.lstsq(design, q, rcond=None)
    a1, a2, a3 = (float(v) for v in a_hat)
    if a1 <= 0 or a3 <= 0:
        raise InfeasibleEstimateError("least-squares solution has a nonpositive diagonal", a_hat)
    first = a1 - a2 * a2 / (4.0 * a3)
    second = a3 - a2 * a2 / (4.0 * a1)
    if first <= 0 or second <= 0:
        raise InfeasibleEstimateError("least-squares solution is not positive definite", a_hat)

    model = KernelModel(ModelFamily.GENERAL_NORMAL_2D, beta1=1.0, beta2=1.0, rho=0.0)
    report = EstimateReport(
        "general-normal", model, k, n, sites.d,
        beta1_hat=math.sqrt(first),
        beta2_hat=math.sqrt(second),
        rho_hat=-a2 / (2.0 * math.sqrt(a1 * a3)),
        a_hat=(a1, a2, a3),
        per_pair=per_pair,
    )
    return _attach_fit(report, sites, with_variance)


# -- estimators from observations --------------------------------------------


def _check_observations(obs: ObservationMatrix) -> None:
    if obs.n < 2:
        raise DataError("estimation needs at least two replications")
    if obs.d < 2:
        raise DataError("estimation needs at least two sites")


def beta_hat_pairwise(obs: ObservationMatrix, model: KernelModel, k: int,
                      with_variance: bool = True) -> EstimateReport:
    """Pairwise estimator on observations (see pairwise_from_r)."""
    _check_observations(obs)
    return pairwise_from_r(model, obs.sites, pairwise_r_hat(obs, k), k=int(k), n=obs.n,
                           with_variance=with_variance)


def beta_hat_range(obs: ObservationMatrix, model: KernelModel, k: int,
                   with_variance: bool = True) -> EstimateReport:
    """Range estimator on observations using the joint exceedance count."""
    _check_observations(obs)
    joint = r_hat(obs, None, None, k)
    return range_from_r(model, obs.sites, joint, pair_r=pairwise_r_hat(obs, k), k=int(k), n=obs.n,
                        with_variance=with_variance)


def beta_hat_exp2d(obs: ObservationMatrix, k: int, beta_max: Optional[float] = None,
                   with_variance: bool = True) -> EstimateReport:
    """Exponential 2D estimator on observations (see exp2d_from_r)."""
    _check_observations(obs)
    return exp2d_from_r(obs.sites, pairwise_r_hat(obs, k), k=int(k), n=obs.n, beta_max=beta_max,
                        with_variance=with_variance)


def general_normal_fit(obs: ObservationMatrix, k: int, with_variance: bool = True) -> EstimateReport:
    """General normal least-squares fit on observations."""
    _check_observations(obs)
    return general_normal_from_r(obs.sites, pairwise_r_hat(obs, k), k=int(k), n=obs.n,
                                 with_variance=with_variance)


def resolve_estimator(model: KernelModel, estimator: str = "auto") -> str:
    """
    Concrete estimator name for a model.

    auto picks exp2d for exp2d, general-normal for gnormal2d and pairwise
    otherwise.
    """
    if estimator not in ESTIMATORS:
        raise DomainError(f"unknown estimator '{estimator}' (expected {' | '.join(ESTIMATORS)})")
    if estimator != "auto":
        return estimator
    if model.family is ModelFamily.EXP_2D:
        return "exp2d"
    if model.family is ModelFamily.GENERAL_NORMAL_2D:
        return "general-normal"
    return "pairwise"


def estimate(obs: ObservationMatrix, model: KernelModel, k: int, estimator: str = "auto",
             beta_max: Optional[float] = None, with_variance: bool = True) -> EstimateReport:
    """
    Run one estimator.

    Args:
        obs: Observations with attached sites
        model: Model family to fit
        k: Threshold count
        estimator: auto | pairwise | range | exp2d | general-normal
        beta_max: Root-search bound of the exp2d estimator
        with_variance: Attach asymptotic variances at the fitted model

    Returns:
        EstimateReport: Report of the selected estimator
    """
    if model.dimension != obs.sites.dimension:
        raise DataError(f"{model.tag} is {model.dimension}D but the sites are {obs.sites.dimension}D")
    name = resolve_estimator(model, estimator)
    logger.debug("estimating with %s, k=%d, n=%d, d=%d", name, k, obs.n, obs.d)
    if name == "pairwise":
        return beta_hat_pairwise(obs, model, k, with_variance)
    if name == "range":
        return beta_hat_range(obs, model, k, with_variance)
    if name == "exp2d":
        return beta_hat_exp2d(obs, k, beta_max, with_variance)
    return general_normal_fit(obs, k, with_variance)


def k_sweep(obs: ObservationMatrix, model: KernelModel, k_grid: Sequence[int], estimator: str = "auto",
            beta_max: Optional[float] = None, with_variance: bool = True) -> List[EstimateReport]:
    """One report per threshold count in k_grid, in grid order."""
    return [estimate(obs, model, int(k), estimator, beta_max, with_variance) for k in k_grid]


# -- diagnostics -------------------------------------------------------------


@dataclass
class DiagnosticRow:
    """Model-implied versus empirical R(1, 1) for one pair."""
    j: int
    m: int
    distance: float
    r_hat: float
    r_model: float

    @property
    def gap(self) -> float:
        """Signed R_hat - R_model."""
        return self.r_hat - self.r_model


@dataclass
class DiagnosticTable:
    """Per-pair fit diagnostic."""
    rows: List[DiagnosticRow]

    @property
    def max_abs_gap(self) -> float:
        """Largest absolute gap over all pairs."""
        return max((abs(row.gap) for row in self.rows), default=0.0)


def diagnostic_from_r(fitted: Optional[KernelModel], sites: SiteSet,
                      r_values: Sequence[float]) -> DiagnosticTable:
    """
    Compare given R(1, 1) values with a fitted model.

    Args:
        fitted: Model at the fitted parameters; None means beta_hat = 0
            (complete dependence, R = 1 at every pair)
        sites: Site design
        r_values: R(1, 1) per pair, in SiteSet.pairs() order
    """
    values = _check_r_values(sites, r_values)
    rows = []
    for (j, m), r in zip(sites.pairs(), values):
        r_model = 1.0 if fitted is None else R_pair(PairDependence.between(fitted, sites, j, m), 1.0, 1.0)
        rows.append(DiagnosticRow(j, m, sites.distance(j, m), r, r_model))
    return DiagnosticTable(rows)


def _fitted_from(model: KernelModel, beta_hat) -> Optional[KernelModel]:
    if model.family is ModelFamily.GENERAL_NORMAL_2D:
        try:
            beta1, beta2, rho = beta_hat
        except (TypeError, ValueError):
            raise DomainError("the general normal diagnostic needs (beta1, beta2, rho)")
        return model.with_general_normal(beta1, beta2, rho)
    beta = float(beta_hat)
    if beta < 0:
        raise DomainError(f"beta_hat must be nonnegative, got {beta_hat!r}")
    return None if beta == 0 else model.with_beta(beta)


def model_diagnostic(obs: ObservationMatrix, model: KernelModel, k: int, beta_hat) -> DiagnosticTable:
    """
    Check a fitted model against the data, pair by pair.

    Args:
        obs: Observations
        model: Model family
        k: Threshold count for R_hat
        beta_hat: Fitted beta, or (beta1, beta2, rho) for gnormal2d

    Returns:
        DiagnosticTable: Signed gaps and the largest absolute gap
    """
    _check_observations(obs)
    fitted = _fitted_from(model, beta_hat)
    return diagnostic_from_r(fitted, obs.sites, pairwise_r_hat(obs, k))
