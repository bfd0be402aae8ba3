"""
Quadrature oracle.

Brute-force evaluation of the d-site tail dependence functions

    L(x) = integral of max_i x_i phi(s - t_i) ds
    R(x) = integral of min_i x_i phi(s - t_i) ds

over the line or the plane. The integrand is piecewise smooth, so each
line integral is split at the sites and at the points where the maximising
(or minimising) site changes, and every smooth panel goes to adaptive
Gauss-Kronrod quadrature. The two infinite tails are integrated separately.
Nothing here uses the closed forms of exactdist, which these routines are
meant to check.
"""

import logging
import math
import warnings
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate
from scipy.optimize import brentq

from .data import SiteSet
from .errors import DomainError, QuadratureAccuracyError
from .kernels import KernelModel, density, density_function, length_scale

logger = logging.getLogger(__name__)

_CORE_WIDTH = 10.0
_SCAN_POINTS = 400
_PANEL_EPSABS = 1e-11
_OUTER_EPSABS = 1e-10
_MAX_ABSERR = 1e-8

ScalarFn = Callable[[float], float]


def _as_sites(sites: Union[SiteSet, Sequence]) -> SiteSet:
    if isinstance(sites, SiteSet):
        return sites
    return SiteSet(np.asarray(sites, dtype=float), allow_coincident=True)


def _quad(fn: ScalarFn, a: float, b: float, epsabs: float) -> Tuple[float, float]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return integrate.quad(fn, a, b, epsabs=epsabs, epsrel=1e-12, limit=200)


def _line_integral(term_fns: List[ScalarFn],
                   terms_on_grid: Optional[Callable[[np.ndarray], np.ndarray]],
                   use_min: bool, core_lo: float, core_hi: float,
                   fixed_points: Sequence[float], epsabs: float) -> Tuple[float, float, int]:
    """
    Integral over the whole line of max (or min) of the terms.

    Returns:
        Tuple[float, float, int]: Value, summed error estimate, panel count
    """
    reduce = min if use_min else max
    if len(term_fns) == 1:
        integrand = term_fns[0]
    else:
        def integrand(s: float) -> float:
            return reduce(fn(s) for fn in term_fns)

    breaks = {float(p) for p in fixed_points if core_lo < p < core_hi}
    if len(term_fns) > 1 and terms_on_grid is not None:
        grid = np.linspace(core_lo, core_hi, _SCAN_POINTS)
        values = terms_on_grid(grid)
        choice = values.argmin(axis=1) if use_min else values.argmax(axis=1)
        for k in np.nonzero(choice[1:] != choice[:-1])[0]:
            first, second = term_fns[choice[k]], term_fns[choice[k + 1]]

            def gap(s: float) -> float:
                return first(s) - second(s)

            left, right = float(grid[k]), float(grid[k + 1])
            if gap(left) * gap(right) < 0:
                breaks.add(brentq(gap, left, right, xtol=1e-14, rtol=1e-14))

    edges = [core_lo] + sorted(breaks) + [core_hi]
    pieces = []
    error = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b > a:
            value, abserr = _quad(integrand, a, b, epsabs)
            pieces.append(value)
            error += abserr
    for a, b in ((-math.inf, core_lo), (core_hi, math.inf)):
        value, abserr = _quad(integrand, a, b, epsabs)
        pieces.append(value)
        error += abserr
    return math.fsum(pieces), error, len(edges) + 1


def _check_inputs(model: KernelModel, sites: SiteSet, x: Sequence[float]) -> np.ndarray:
    if model.dimension != sites.dimension:
        raise DomainError(f"{model.tag} is {model.dimension}D but the sites are {sites.dimension}D")
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != sites.d:
        raise DomainError(f"expected {sites.d} weights, got {x.size}")
    if not np.all(np.isfinite(x)) or np.any(x < 0):
        raise DomainError("weights must be nonnegative reals")
    return x


def _envelope_integral(model: KernelModel, sites: SiteSet, x: np.ndarray, use_min: bool) -> float:
    f = density_function(model)
    keep = x > 0
    weights = x[keep]
    points = sites.points()[keep]
    margin = _CORE_WIDTH * length_scale(model)
    what = "R" if use_min else "L"

    if model.dimension == 1:
        centres = points[:, 0]
        term_fns = [lambda s, w=w, c=c: w * f(s - c) for w, c in zip(weights, centres)]

        def on_grid(grid: np.ndarray) -> np.ndarray:
            return density(model, grid[:, None] - centres[None, :]) * weights[None, :]

        value, error, panels = _line_integral(term_fns, on_grid, use_min,
                                              centres.min() - margin, centres.max() + margin,
                                              centres, _PANEL_EPSABS)
        logger.debug("%s oracle: %d panels, error estimate %.3g", what, panels, error)
        if error > _MAX_ABSERR:
            raise QuadratureAccuracyError(f"{what} quadrature did not converge", value, error)
        return value

    xs, ys = points[:, 0], points[:, 1]
    inner_errors = []

    def inner(s1: float) -> float:
        term_fns = [lambda s2, w=w, a=a, b=b: w * f(s1 - a, s2 - b) for w, a, b in zip(weights, xs, ys)]

        def on_grid(grid: np.ndarray) -> np.ndarray:
            u = np.empty((grid.size, xs.size, 2))
            u[..., 0] = s1 - xs[None, :]
            u[..., 1] = grid[:, None] - ys[None, :]
            return density(model, u) * weights[None, :]

        value, error, _ = _line_integral(term_fns, on_grid, use_min,
                                         ys.min() - margin, ys.max() + margin, ys, _PANEL_EPSABS)
        inner_errors.append(error)
        return value

    value, error, panels = _line_integral([inner], None, use_min,
                                          xs.min() - margin, xs.max() + margin, xs, _OUTER_EPSABS)
    worst_inner = max(inner_errors) if inner_errors else 0.0
    logger.debug("%s oracle (2D): %d outer panels, %d inner integrals, error estimates %.3g / %.3g",
                 what, panels, len(inner_errors), error, worst_inner)
    if error > _MAX_ABSERR or worst_inner > _MAX_ABSERR:
        raise QuadratureAccuracyError(f"{what} quadrature did not converge", value, max(error, worst_inner))
    return value


def L_numeric(model: KernelModel, sites: Union[SiteSet, Sequence], x: Sequence[float]) -> float:
    """
    L_{t_1..t_d}(x) by quadrature.

    Args:
        model: Kernel model
        sites: d sites (coincident sites allowed)
        x: d nonnegative weights, not all zero

    Returns:
        float: Integral of max_i x_i phi(s - t_i)

    Raises:
        DomainError: On bad weights or a dimension mismatch
        QuadratureAccuracyError: If the error estimate exceeds 1e-8
    """
    sites = _as_sites(sites)
    x = _check_inputs(model, sites, x)
    if x.sum() <= 0:
        raise DomainError("at least one weight must be positive")
    return _envelope_integral(model, sites, x, use_min=False)


def R_numeric(model: KernelModel, sites: Union[SiteSet, Sequence], x: Sequence[float]) -> float:
    """
    R_{t_1..t_d}(x) by quadrature of the minimum.

    Args:
        model: Kernel model
        sites: d sites (coincident sites allowed)
        x: d positive weights

    Returns:
        float: Integral of min_i x_i phi(s - t_i)

    Raises:
        DomainError: On bad weights or a dimension mismatch
        QuadratureAccuracyError: If the error estimate exceeds 1e-8
    """
    sites = _as_sites(sites)
    x = _check_inputs(model, sites, x)
    if np.any(x <= 0):
        raise DomainError("R needs strictly positive weights")
    return _envelope_integral(model, sites, x, use_min=True)


def R_range_identity(model: KernelModel, sites: Union[SiteSet, Sequence]) -> float:
    """
    2 * integral of phi over [range/2, inf) for 1D sites.

    Equals R(1, ..., 1) whatever the interior sites are.

    Raises:
        DomainError: For 2D models or fewer than two sites
        QuadratureAccuracyError: If the error estimate exceeds 1e-8
    """
    sites = _as_sites(sites)
    if model.dimension != 1 or sites.dimension != 1:
        raise DomainError("the range identity holds for 1D models only")
    if sites.d < 2:
        raise DomainError("the range identity needs at least two sites")
    f = density_function(model)
    half = sites.site_range() / 2.0
    margin = _CORE_WIDTH * length_scale(model)
    pieces = [_quad(f, half, half + margin, _PANEL_EPSABS), _quad(f, half + margin, math.inf, _PANEL_EPSABS)]
    value = 2.0 * math.fsum(v for v, _ in pieces)
    error = 2.0 * sum(e for _, e in pieces)
    if error > _MAX_ABSERR:
        raise QuadratureAccuracyError("range identity quadrature did not converge", value, error)
    return value
