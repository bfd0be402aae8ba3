"""
Closed-form bivariate distributions.

For a pair of sites at displacement t the bivariate law of (Z(0), Z(t))
is summarised by

    V(w1, w2) = -log P{Z(0) <= w1, Z(t) <= w2}
              = 1/w1 + 1/w2 - D(w1, w2)

Every family below computes the deficit D directly, so that the tail
dependence function R(x1, x2) = D(1/x1, 1/x2) keeps full relative
precision even when dependence is weak. L, R, chi and the spectral
densities are all derived from it.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from scipy import integrate, special

from .data import SiteSet
from .errors import (
    AtomLocationError,
    DegenerateError,
    DomainError,
    QuadratureAccuracyError,
    UnsupportedModelError,
)
from .kernels import KernelModel, ModelFamily, marginal_sf

Displacement = Union[float, np.ndarray]

_EQUAL_WEIGHT_RTOL = 1e-12
_DISK_ABSERR = 1e-10
_PARTIAL_STEP = 1e-6

_NORMAL = (ModelFamily.NORMAL_1D, ModelFamily.NORMAL_2D, ModelFamily.GENERAL_NORMAL_2D)
_STUDENT = (ModelFamily.STUDENT_T_1D, ModelFamily.STUDENT_T_2D)


@dataclass(frozen=True, eq=False)
class PairDependence:
    """
    A kernel model evaluated at one site displacement.

    Attributes:
        model: Kernel model
        displacement: t (a float for 1D models, a 2-vector for 2D models)
    """
    model: KernelModel
    displacement: Displacement

    def __post_init__(self):
        t = np.array(self.displacement, dtype=float)
        if self.model.dimension == 1:
            if t.size != 1:
                raise DomainError(f"{self.model.tag} needs a scalar displacement")
            object.__setattr__(self, "displacement", float(t.reshape(-1)[0]))
        else:
            if t.shape != (2,):
                raise DomainError(f"{self.model.tag} needs a 2D displacement")
            t.setflags(write=False)
            object.__setattr__(self, "displacement", t)
        if not np.all(np.isfinite(t)):
            raise DomainError("displacement must be finite")

    @classmethod
    def between(cls, model: KernelModel, sites: SiteSet, j: int, m: int) -> "PairDependence":
        """Pair formed by sites j and m."""
        if model.dimension != sites.dimension:
            raise DomainError(f"{model.tag} is {model.dimension}D but the sites are {sites.dimension}D")
        return cls(model, sites.displacement(j, m))

    @property
    def distance(self) -> float:
        """Euclidean length |t|."""
        return float(np.linalg.norm(np.atleast_1d(self.displacement)))

    @property
    def is_degenerate(self) -> bool:
        """True for a zero displacement (complete dependence)."""
        return self.distance == 0.0

    @cached_property
    def scaled_distance(self) -> float:
        """
        Dimensionless separation.

        beta |t| for the single-parameter families and the Mahalanobis
        length sqrt(t' Sigma^-1 t) for the general normal model.
        """
        if self.model.family is ModelFamily.GENERAL_NORMAL_2D:
            t = self.displacement
            return float(math.sqrt(t @ self.model.precision_matrix() @ t))
        return self.model.beta * self.distance

    @cached_property
    def exp2d_arms(self) -> Tuple[float, float]:
        """(min(|t1|, |t2|), max(|t1|, |t2|)) for the exponential 2D model."""
        a, b = (abs(float(c)) for c in self.displacement)
        return min(a, b), max(a, b)

    @cached_property
    def student_boundaries(self) -> Tuple[float, float]:
        """
        (b_1, b_2) bracketing the ratio power x for which the two kernels cross.

        Only defined for the Student models; b_1 < 1 < b_2 when t != 0.
        """
        if self.model.family not in _STUDENT:
            raise UnsupportedModelError(f"{self.model.tag} has no Student boundaries")
        df = self.model.marginal_df
        tau = self.scaled_distance
        centre = 1.0 + tau * tau / (2.0 * df)
        spread = tau / math.sqrt(df) * math.sqrt(1.0 + tau * tau / (4.0 * df))
        return centre - spread, centre + spread


def _student_power(model: KernelModel) -> float:
    # x = (w1/w2)**power
    if model.family is ModelFamily.STUDENT_T_1D:
        return 2.0 / (model.nu + 1.0)
    return 1.0 / model.alpha


def region_boundaries(pd: PairDependence) -> np.ndarray:
    """
    Values of ln(w2/w1) where the piecewise formula changes branch.

    Returns:
        np.ndarray: Sorted thresholds (empty for the smooth normal models)
    """
    fam = pd.model.family
    if pd.is_degenerate:
        return np.array([0.0])
    if fam in _NORMAL:
        return np.array([])
    if fam is ModelFamily.DOUBLE_EXP_1D:
        c = pd.scaled_distance
        return np.array([-c, c])
    if fam is ModelFamily.EXP_2D:
        small, large = pd.exp2d_arms
        beta = pd.model.beta
        outer = beta * (small + large)
        inner = beta * (large - small)
        return np.unique([-outer, -inner, inner, outer])
    b1, b2 = pd.student_boundaries
    power = _student_power(pd.model)
    return np.sort([-math.log(b1) / power, -math.log(b2) / power])


def _check_weights(w1: float, w2: float) -> None:
    for name, w in (("w1", w1), ("w2", w2)):
        if not (w > 0 and math.isfinite(w)):
            raise DomainError(f"{name} must be a positive real, got {w!r}")


def _radial_cdf(alpha: float, df: float, radius: float) -> float:
    # P(|T| <= radius) for the standardized t2d kernel
    return -math.expm1((1.0 - alpha) * math.log1p(radius * radius / df))


def _disk_probability(alpha: float, df: float, centre: float, radius: float, offset: float) -> float:
    """
    P(T in disk) for the standardized t2d kernel.

    The disk has its centre at distance `centre` from the origin, radius
    `radius`, and offset = centre**2 - radius**2 computed without
    cancellation by the caller. A circle of radius r meets the disk on the
    arc cos(angle) >= (r**2 + offset) / (2 r centre), so the probability
    reduces to a one-dimensional integral against the radial law.
    """
    lo = abs(centre - radius)
    hi = centre + radius
    inside = _radial_cdf(alpha, df, radius - centre) if radius > centre else 0.0

    def integrand(r: float) -> float:
        if r <= 0.0:
            return 0.0
        kappa = (r * r + offset) / (2.0 * r * centre)
        fraction = math.acos(min(1.0, max(-1.0, kappa))) / math.pi
        return r * (1.0 + r * r / df) ** (-alpha) * fraction

    edges = [lo]
    step = 1.0
    while lo + step < hi:
        edges.append(lo + step)
        step *= 10.0
    edges.append(hi)

    pieces = [inside]
    total_err = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        value, abserr = integrate.quad(integrand, a, b, epsabs=1e-13, epsrel=1e-12, limit=200)
        pieces.append(value)
        total_err += abserr
    estimate = math.fsum(pieces)
    if total_err > _DISK_ABSERR:
        raise QuadratureAccuracyError("disk probability did not converge", estimate, total_err)
    return estimate


def _student_deficit(pd: PairDependence, w1: float, w2: float) -> float:
    model = pd.model
    df = model.marginal_df
    tau = pd.scaled_distance

    if abs(w1 - w2) <= _EQUAL_WEIGHT_RTOL * max(w1, w2):
        w = 0.5 * (w1 + w2)
        return 2.0 * float(marginal_sf(model, tau / 2.0)) / w

    x = (w1 / w2) ** _student_power(model)
    s = 1.0 - x
    root_sq = x * tau * tau - df * s * s
    if root_sq <= 0.0:
        # the heavier-weighted kernel dominates everywhere
        return 1.0 / w2 if x < 1.0 else 1.0 / w1
    root = math.sqrt(root_sq)

    if model.family is ModelFamily.STUDENT_T_1D:
        near = (tau * tau + df * s) / (tau + root)
        far = (tau + root) / s
        lo, hi = min(near, far), max(near, far)
        lo2, hi2 = lo - tau, hi - tau
        inside_first = float(special.stdtr(df, hi) - special.stdtr(df, lo))
        outside_first = float(special.stdtr(df, lo) + special.stdtr(df, -hi))
        inside_second = float(special.stdtr(df, hi2) - special.stdtr(df, lo2))
        outside_second = float(special.stdtr(df, lo2) + special.stdtr(df, -hi2))
    else:
        alpha = model.alpha
        radius = root / abs(s)
        first_centre = tau / abs(s)
        first_offset = df + tau * tau / s
        second_centre = x * tau / abs(s)
        second_offset = df - x * tau * tau / s
        inside_first = _disk_probability(alpha, df, first_centre, radius, first_offset)
        inside_second = _disk_probability(alpha, df, second_centre, radius, second_offset)
        outside_first = 1.0 - inside_first
        outside_second = 1.0 - inside_second

    if x < 1.0:
        return inside_first / w1 + outside_second / w2
    return outside_first / w1 + inside_second / w2


def _deficit(pd: PairDependence, w1: float, w2: float) -> float:
    """1/w1 + 1/w2 - V(w1, w2), clipped to its range [0, min(1/w1, 1/w2)]."""
    upper = min(1.0 / w1, 1.0 / w2)
    if pd.is_degenerate:
        return upper

    fam = pd.model.family
    log_ratio = math.log(w2 / w1)

    if fam in _NORMAL:
        h = pd.scaled_distance
        value = special.ndtr(-h / 2.0 - log_ratio / h) / w1 + special.ndtr(-h / 2.0 + log_ratio / h) / w2
    elif fam is ModelFamily.DOUBLE_EXP_1D:
        c = pd.scaled_distance
        if log_ratio < -c:
            value = 1.0 / w1
        elif log_ratio >= c:
            value = 1.0 / w2
        else:
            value = math.exp(-c / 2.0) / math.sqrt(w1 * w2)
    elif fam is ModelFamily.EXP_2D:
        beta = pd.model.beta
        small, large = pd.exp2d_arms
        total = small + large
        ell = -log_ratio / beta
        if ell < -total:
            value = 1.0 / w2
        elif ell >= total:
            value = 1.0 / w1
        else:
            if ell < small - large:
                bracket = 1.0 + beta * total / 4.0 - log_ratio / 4.0
            elif ell < large - small:
                bracket = 1.0 + beta * small / 2.0
            else:
                bracket = 1.0 + beta * total / 4.0 + log_ratio / 4.0
            value = math.exp(-beta * total / 2.0) * bracket / math.sqrt(w1 * w2)
    else:
        value = _student_deficit(pd, w1, w2)

    return min(max(float(value), 0.0), upper)


def neg_log_bivariate_cdf(pd: PairDependence, w1: float, w2: float) -> float:
    """
    -log P{Z(0) <= w1, Z(t) <= w2}.

    Args:
        pd: Pair (model and displacement)
        w1: Level at the first site (> 0)
        w2: Level at the second site (> 0)

    Returns:
        float: Value in [max(1/w1, 1/w2), 1/w1 + 1/w2]

    Raises:
        DomainError: If w1 or w2 is not a positive real
        QuadratureAccuracyError: If a t2d disk probability fails to converge
    """
    w1, w2 = float(w1), float(w2)
    _check_weights(w1, w2)
    return 1.0 / w1 + 1.0 / w2 - _deficit(pd, w1, w2)


def _check_tail_args(x1: float, x2: float) -> None:
    for name, x in (("x1", x1), ("x2", x2)):
        if not (x >= 0 and math.isfinite(x)):
            raise DomainError(f"{name} must be a nonnegative real, got {x!r}")
    if x1 + x2 <= 0:
        raise DomainError("x1 and x2 cannot both be zero")


def R_pair(pd: PairDependence, x1: float, x2: float) -> float:
    """
    R(x1, x2) = x1 + x2 - L(x1, x2).

    Raises:
        DomainError: If an argument is negative or both are zero
    """
    x1, x2 = float(x1), float(x2)
    _check_tail_args(x1, x2)
    if x1 == 0.0 or x2 == 0.0:
        return 0.0
    return _deficit(pd, 1.0 / x1, 1.0 / x2)


def L_pair(pd: PairDependence, x1: float, x2: float) -> float:
    """
    Tail dependence function L(x1, x2) = V(1/x1, 1/x2).

    A zero argument drops that coordinate, so L(x, 0) = x.

    Raises:
        DomainError: If an argument is negative or both are zero
    """
    x1, x2 = float(x1), float(x2)
    return x1 + x2 - R_pair(pd, x1, x2)


def tail_dependence_coefficient(pd: PairDependence) -> float:
    """Tail dependence coefficient lambda = R(1, 1)."""
    return R_pair(pd, 1.0, 1.0)


def L_partials(pd: PairDependence, x1: float = 1.0, x2: float = 1.0,
               step: float = _PARTIAL_STEP) -> Tuple[float, float]:
    """
    Partial derivatives (dL/dx1, dL/dx2) by central differences.

    The step is relative to max(x1, x2). Arguments closer to zero than the
    step fall back to a forward difference.
    """
    h = step * max(x1, x2)

    def partial(index: int) -> float:
        base = [x1, x2]
        up, down = list(base), list(base)
        up[index] += h
        if base[index] >= h:
            down[index] -= h
            return (L_pair(pd, *up) - L_pair(pd, *down)) / (2.0 * h)
        return (L_pair(pd, *up) - L_pair(pd, *base)) / h

    return partial(0), partial(1)


def R_multi_ones(model: KernelModel, sites: Union[SiteSet, np.ndarray]) -> float:
    """
    R_{t_1..t_d}(1, ..., 1) = 2 (1 - F(beta (max t - min t) / 2)) for 1D models.

    Args:
        model: One-dimensional kernel model
        sites: At least two sites; coincident sites are allowed

    Raises:
        UnsupportedModelError: For 2D models
        DomainError: If fewer than two sites are given
    """
    if model.dimension != 1:
        raise UnsupportedModelError("the range formula holds for 1D models only")
    if not isinstance(sites, SiteSet):
        sites = SiteSet(np.asarray(sites, dtype=float), allow_coincident=True)
    if sites.dimension != 1:
        raise DomainError("the range formula needs 1D sites")
    if sites.d < 2:
        raise DomainError("the range formula needs at least two sites")
    return 2.0 * float(marginal_sf(model, model.beta * sites.site_range() / 2.0))


def chi(pd: PairDependence, s: float) -> float:
    """
    Dependence function chi with V = 1/w1 + 1/w2 + chi(w2/w1)/w2.

    Args:
        pd: One-dimensional pair
        s: Ratio w2/w1 (> 0)

    Returns:
        float: chi(s) in [-min(1, s), 0]

    Raises:
        UnsupportedModelError: For 2D models
        DomainError: If s <= 0
    """
    if pd.model.dimension != 1:
        raise UnsupportedModelError("chi is defined for 1D models only")
    s = float(s)
    if not (s > 0 and math.isfinite(s)):
        raise DomainError(f"s must be a positive real, got {s!r}")
    if pd.is_degenerate:
        return -min(1.0, s)

    fam = pd.model.family
    if fam is ModelFamily.DOUBLE_EXP_1D:
        c = pd.scaled_distance
        log_s = math.log(s)
        if log_s > c:
            return -1.0
        if log_s < -c:
            return -s
        return -math.exp(-c / 2.0) * math.sqrt(s)
    if fam is ModelFamily.NORMAL_1D:
        h = pd.scaled_distance
        log_s = math.log(s)
        return float(-s * special.ndtr(-h / 2.0 - log_s / h) - special.ndtr(-h / 2.0 + log_s / h))
    return -s * _deficit(pd, 1.0, s)


@dataclass(frozen=True)
class SpectralMeasure:
    """
    Angular representation of a bivariate law.

    V(w1, w2) = integral of max(sin(theta)/w1, cos(theta)/w2) s(theta) over
    the support, plus the same weight applied to each atom.

    Attributes:
        density: s(theta) on (0, pi/2), zero outside the support
        support: Closed interval carrying the measure
        atoms: (angle, mass) pairs
    """
    density: Callable[[float], float]
    support: Tuple[float, float]
    atoms: Tuple[Tuple[float, float], ...] = field(default_factory=tuple)

    def neg_log_cdf(self, w1: float, w2: float) -> float:
        """Rebuild V(w1, w2) from the measure by quadrature."""
        _check_weights(w1, w2)
        lo, hi = self.support

        def integrand(theta: float) -> float:
            return max(math.sin(theta) / w1, math.cos(theta) / w2) * self.density(theta)

        switch = math.atan(w1 / w2)
        points = [switch] if lo < switch < hi else None
        value, abserr = integrate.quad(integrand, lo, hi, points=points,
                                       epsabs=1e-12, epsrel=1e-12, limit=400)
        if abserr > 1e-8:
            raise QuadratureAccuracyError("spectral reconstruction did not converge", value, abserr)
        atom_part = [mass * max(math.sin(a) / w1, math.cos(a) / w2) for a, mass in self.atoms]
        return math.fsum([value] + atom_part)


def _require_nondegenerate(pd: PairDependence) -> None:
    if pd.is_degenerate:
        raise DegenerateError("the spectral measure of a zero displacement is a single atom")


def spectral_density_exp1d(pd: PairDependence) -> SpectralMeasure:
    """
    Spectral measure of the double exponential model.

    Density (e^{-c/2}/4) (sin cos)^{-3/2} on (arctan e^{-c}, arctan e^{c})
    with c = beta |t|, and atoms of mass sqrt(1 + e^{-2c})/2 at both ends.

    Raises:
        UnsupportedModelError: For other families
        DegenerateError: If t = 0
    """
    if pd.model.family is not ModelFamily.DOUBLE_EXP_1D:
        raise UnsupportedModelError(f"{pd.model.tag} is not the double exponential model")
    _require_nondegenerate(pd)
    c = pd.scaled_distance
    lo, hi = math.atan(math.exp(-c)), math.atan(math.exp(c))
    scale = math.exp(-c / 2.0) / 4.0

    def density_fn(theta: float) -> float:
        if not lo < theta < hi:
            return 0.0
        return scale * (math.sin(theta) * math.cos(theta)) ** -1.5

    mass = math.sqrt(1.0 + math.exp(-2.0 * c)) / 2.0
    return SpectralMeasure(density_fn, (lo, hi), ((lo, mass), (hi, mass)))


def spectral_density_normal1d(pd: PairDependence) -> SpectralMeasure:
    """
    Spectral measure of the normal models (no atoms, full support).

    s(theta) = phi(h/2 - ln tan(theta) / h) / (h sin^2(theta) cos(theta))
    with h the scaled distance; symmetric about pi/4.

    Raises:
        UnsupportedModelError: For non-normal families
        DegenerateError: If t = 0
    """
    if pd.model.family not in _NORMAL:
        raise UnsupportedModelError(f"{pd.model.tag} is not a normal model")
    _require_nondegenerate(pd)
    h = pd.scaled_distance
    inv_sqrt_2pi = 1.0 / math.sqrt(2.0 * math.pi)

    def density_fn(theta: float) -> float:
        if not 0.0 < theta < math.pi / 2.0:
            return 0.0
        sin, cos = math.sin(theta), math.cos(theta)
        z = h / 2.0 - math.log(sin / cos) / h
        return inv_sqrt_2pi * math.exp(-0.5 * z * z) / (h * sin * sin * cos)

    return SpectralMeasure(density_fn, (0.0, math.pi / 2.0))


def spectral_support(pd: PairDependence) -> Tuple[float, float]:
    """
    Angular support of the spectral measure.

    Atoms of the exponential and Student models sit on its end points.
    """
    _require_nondegenerate(pd)
    thresholds = region_boundaries(pd)
    if thresholds.size == 0:
        return 0.0, math.pi / 2.0
    return math.atan(math.exp(thresholds[0])), math.atan(math.exp(thresholds[-1]))


def numeric_spectral_density(pd: PairDependence, theta: float, step: Optional[float] = None) -> float:
    """
    Spectral density from the mixed second derivative of V at (cos, sin).

    The central mixed difference is Richardson-extrapolated from steps h
    and h/2. The default h is 1e-3, shrunk to stay clear of the kinks of V.

    Args:
        pd: Pair
        theta: Angle in (0, pi/2)
        step: Override for h

    Returns:
        float: s(theta) (zero outside the support)

    Raises:
        DomainError: If theta is outside (0, pi/2)
        DegenerateError: If t = 0
        AtomLocationError: If theta sits on a kink of V (an atom)
    """
    _require_nondegenerate(pd)
    theta = float(theta)
    if not 0.0 < theta < math.pi / 2.0:
        raise DomainError(f"theta must lie in (0, pi/2), got {theta!r}")

    w1, w2 = math.cos(theta), math.sin(theta)
    log_ratio = math.log(w2 / w1)
    thresholds = region_boundaries(pd)
    gap = float(np.min(np.abs(thresholds - log_ratio))) if thresholds.size else math.inf
    if gap < 1e-8:
        raise AtomLocationError(f"theta = {theta!r} is an atom of the spectral measure")

    h = 1e-3 if step is None else float(step)
    h = min(h, gap / (4.0 * (1.0 / w1 + 1.0 / w2)), 0.25 * min(w1, w2))

    def mixed(hh: float) -> float:
        return (_deficit(pd, w1 + hh, w2 + hh) - _deficit(pd, w1 + hh, w2 - hh)
                - _deficit(pd, w1 - hh, w2 + hh) + _deficit(pd, w1 - hh, w2 - hh)) / (4.0 * hh * hh)

    value = (4.0 * mixed(h / 2.0) - mixed(h)) / 3.0
    return max(value, 0.0)


def huisler_reiss_mc_check(pd: PairDependence, w1: float, w2: float, m: int,
                           seed: int = 0) -> Tuple[float, float]:
    """
    Monte-Carlo value of E max{1/w1, exp(N h - h^2/2)/w2} for N standard normal.

    Args:
        pd: Normal-model pair
        w1: Level at the first site (> 0)
        w2: Level at the second site (> 0, may be inf)
        m: Sample count (>= 10**4)
        seed: Seed of the normal draws

    Returns:
        Tuple[float, float]: Estimate and its standard error
    """
    if pd.model.family not in _NORMAL:
        raise UnsupportedModelError(f"{pd.model.tag} is not a normal model")
    for name, w in (("w1", w1), ("w2", w2)):
        if not w > 0:
            raise DomainError(f"{name} must be positive, got {w!r}")
    if int(m) != m or m < 10 ** 4:
        raise DomainError(f"m must be an integer of at least 10**4, got {m!r}")

    h = pd.scaled_distance
    if h == 0.0:
        return max(1.0 / w1, 1.0 / w2), 0.0
    rng = np.random.default_rng(seed)
    normals = rng.standard_normal(int(m))
    values = np.maximum(1.0 / w1, np.exp(normals * h - h * h / 2.0) / w2)
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(m))


def pair_table(model: KernelModel, sites: SiteSet) -> List[Tuple[int, int, PairDependence]]:
    """PairDependence for every site pair j < m."""
    return [(j, m, PairDependence.between(model, sites, j, m)) for j, m in sites.pairs()]
