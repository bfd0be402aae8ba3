"""
Kernel densities.

The six unimodal probability densities that drive the moving-maximum
construction, together with the standardized marginal distribution
(beta = 1) used by the estimators:

    normal1d   beta/sqrt(2 pi) exp(-beta^2 x^2 / 2)
    dexp1d     beta/2 exp(-beta |x|)
    t1d        beta * Student-t(nu) density at beta x
    normal2d   beta^2/(2 pi) exp(-beta^2 |u|^2 / 2)
    exp2d      beta^2/4 exp(-beta (|u1| + |u2|))
    t2d        beta^2/(2 pi) (1 + beta^2 |u|^2 / (2 (alpha - 1)))^(-alpha)
    gnormal2d  bivariate normal with scales 1/beta1, 1/beta2, correlation rho
"""

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Dict, Mapping, Optional, Union

import numpy as np
from scipy import special

from .errors import DomainError, ParameterDomainError, UnsupportedModelError

ArrayLike = Union[float, np.ndarray]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


class ModelFamily(Enum):
    """Kernel families, valued by their configuration tag."""
    NORMAL_1D = "normal1d"
    DOUBLE_EXP_1D = "dexp1d"
    STUDENT_T_1D = "t1d"
    NORMAL_2D = "normal2d"
    EXP_2D = "exp2d"
    STUDENT_T_2D = "t2d"
    GENERAL_NORMAL_2D = "gnormal2d"

    @property
    def dimension(self) -> int:
        """Spatial dimension of the kernel (1 or 2)."""
        return 1 if self.value.endswith("1d") else 2


_NORMAL_FAMILIES = (ModelFamily.NORMAL_1D, ModelFamily.NORMAL_2D)
_EXP_FAMILIES = (ModelFamily.DOUBLE_EXP_1D, ModelFamily.EXP_2D)
_STUDENT_FAMILIES = (ModelFamily.STUDENT_T_1D, ModelFamily.STUDENT_T_2D)


@dataclass(frozen=True)
class KernelModel:
    """
    A kernel family together with its parameters.

    Attributes:
        family: Kernel family
        beta: Dependence strength (all families except gnormal2d)
        nu: Degrees of freedom, positive integer (t1d only)
        alpha: Tail exponent, > 1 (t2d only)
        beta1: First-axis strength (gnormal2d only)
        beta2: Second-axis strength (gnormal2d only)
        rho: Correlation in (-1, 1) (gnormal2d only)
    """
    family: ModelFamily
    beta: Optional[float] = None
    nu: Optional[int] = None
    alpha: Optional[float] = None
    beta1: Optional[float] = None
    beta2: Optional[float] = None
    rho: Optional[float] = None

    def __post_init__(self):
        if not isinstance(self.family, ModelFamily):
            raise ParameterDomainError(f"unknown model family {self.family!r}")

        if self.family is ModelFamily.GENERAL_NORMAL_2D:
            for name in ("beta1", "beta2"):
                value = getattr(self, name)
                if value is None or not math.isfinite(value) or value <= 0:
                    raise ParameterDomainError(f"{name} must be a positive real, got {value!r}")
            if self.rho is None or not math.isfinite(self.rho) or abs(self.rho) >= 1:
                raise ParameterDomainError(f"rho must lie in (-1, 1), got {self.rho!r}")
            return

        if self.beta is None or not math.isfinite(self.beta) or self.beta <= 0:
            raise ParameterDomainError(f"beta must be a positive real, got {self.beta!r}")

        if self.family is ModelFamily.STUDENT_T_1D:
            if self.nu is None or float(self.nu) != int(self.nu) or int(self.nu) < 1:
                raise ParameterDomainError(f"nu must be a positive integer, got {self.nu!r}")
            object.__setattr__(self, "nu", int(self.nu))

        if self.family is ModelFamily.STUDENT_T_2D:
            if self.alpha is None or not math.isfinite(self.alpha) or self.alpha <= 1:
                raise ParameterDomainError(f"alpha must be a real > 1, got {self.alpha!r}")

    @property
    def dimension(self) -> int:
        """Spatial dimension of the kernel."""
        return self.family.dimension

    @property
    def tag(self) -> str:
        """Configuration tag of the family."""
        return self.family.value

    @property
    def marginal_df(self) -> float:
        """
        Degrees of freedom of the Student marginal.

        For t2d the marginal of the standardized kernel is a Student-t with
        2 (alpha - 1) degrees of freedom.

        Raises:
            UnsupportedModelError: For non-Student families
        """
        if self.family is ModelFamily.STUDENT_T_1D:
            return float(self.nu)
        if self.family is ModelFamily.STUDENT_T_2D:
            return 2.0 * (self.alpha - 1.0)
        raise UnsupportedModelError(f"{self.tag} has no Student marginal")

    def with_beta(self, beta: float) -> "KernelModel":
        """Return a copy with a different beta (single-parameter families)."""
        if self.family is ModelFamily.GENERAL_NORMAL_2D:
            raise UnsupportedModelError("gnormal2d is parametrized by beta1, beta2, rho")
        return replace(self, beta=float(beta))

    def with_general_normal(self, beta1: float, beta2: float, rho: float) -> "KernelModel":
        """Return a copy with new general-normal parameters."""
        if self.family is not ModelFamily.GENERAL_NORMAL_2D:
            raise UnsupportedModelError(f"{self.tag} is not the general normal model")
        return replace(self, beta1=float(beta1), beta2=float(beta2), rho=float(rho))

    def precision_matrix(self) -> np.ndarray:
        """
        Inverse covariance of the normal kernels.

        Returns:
            np.ndarray: 2x2 matrix Sigma^-1
        """
        if self.family is ModelFamily.GENERAL_NORMAL_2D:
            b1, b2, rho = self.beta1, self.beta2, self.rho
            return np.array([[b1 * b1, -rho * b1 * b2],
                             [-rho * b1 * b2, b2 * b2]]) / (1.0 - rho * rho)
        if self.family is ModelFamily.NORMAL_2D:
            return np.eye(2) * self.beta ** 2
        raise UnsupportedModelError(f"{self.tag} has no precision matrix")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, str]) -> "KernelModel":
        """
        Build a model from a key-value block.

        Args:
            mapping: Keys 'model' plus the parameter keys of the family

        Returns:
            KernelModel: Validated model

        Raises:
            ParameterDomainError: Unknown tag, missing or invalid parameter
        """
        tag = mapping.get("model")
        if tag is None:
            raise ParameterDomainError("missing 'model' key")
        try:
            family = ModelFamily(str(tag).strip().lower())
        except ValueError:
            choices = " | ".join(f.value for f in ModelFamily)
            raise ParameterDomainError(f"unknown model '{tag}' (expected {choices})")

        def number(key: str) -> Optional[float]:
            raw = mapping.get(key)
            if raw is None or str(raw).strip() == "":
                return None
            try:
                return float(raw)
            except (TypeError, ValueError):
                raise ParameterDomainError(f"{key} must be a number, got {raw!r}")

        if family is ModelFamily.GENERAL_NORMAL_2D:
            return cls(family, beta1=number("beta1"), beta2=number("beta2"), rho=number("rho"))

        nu = number("nu")
        return cls(
            family,
            beta=number("beta"),
            nu=nu if family is ModelFamily.STUDENT_T_1D else None,
            alpha=number("alpha") if family is ModelFamily.STUDENT_T_2D else None,
        )

    def to_mapping(self) -> Dict[str, float]:
        """Key-value form of the model (inverse of from_mapping)."""
        out: Dict[str, Union[str, float]] = {"model": self.tag}
        for key in ("beta", "nu", "alpha", "beta1", "beta2", "rho"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out


def _student_norm(df: float) -> float:
    return math.exp(math.lgamma((df + 1.0) / 2.0) - math.lgamma(df / 2.0)) / math.sqrt(math.pi * df)


def density(model: KernelModel, u: ArrayLike) -> ArrayLike:
    """
    Evaluate the kernel density phi.

    Args:
        model: Kernel model
        u: Point(s); scalars or arrays for 1D models, arrays whose last
           axis has length 2 for 2D models

    Returns:
        float or np.ndarray: Density value(s)
    """
    u = np.asarray(u, dtype=float)
    fam = model.family

    if model.dimension == 1:
        bx = model.beta * u
        if fam is ModelFamily.NORMAL_1D:
            value = model.beta * np.exp(-0.5 * bx * bx) / _SQRT_2PI
        elif fam is ModelFamily.DOUBLE_EXP_1D:
            value = 0.5 * model.beta * np.exp(-np.abs(bx))
        else:
            nu = model.nu
            value = model.beta * _student_norm(nu) * (1.0 + bx * bx / nu) ** (-(nu + 1.0) / 2.0)
    else:
        if u.shape[-1:] != (2,):
            raise DomainError(f"{model.tag} expects points with two coordinates")
        x, y = u[..., 0], u[..., 1]
        if fam is ModelFamily.GENERAL_NORMAL_2D:
            b1, b2, rho = model.beta1, model.beta2, model.rho
            one_minus = 1.0 - rho * rho
            quad = (b1 * x) ** 2 - 2.0 * rho * (b1 * x) * (b2 * y) + (b2 * y) ** 2
            value = b1 * b2 / (2.0 * math.pi * math.sqrt(one_minus)) * np.exp(-quad / (2.0 * one_minus))
        else:
            b = model.beta
            if fam is ModelFamily.NORMAL_2D:
                value = b * b / (2.0 * math.pi) * np.exp(-0.5 * b * b * (x * x + y * y))
            elif fam is ModelFamily.EXP_2D:
                value = 0.25 * b * b * np.exp(-b * (np.abs(x) + np.abs(y)))
            else:
                m = 2.0 * (model.alpha - 1.0)
                value = b * b / (2.0 * math.pi) * (1.0 + b * b * (x * x + y * y) / m) ** (-model.alpha)

    return float(value) if np.ndim(value) == 0 else value


def density_function(model: KernelModel) -> Callable[..., float]:
    """
    Scalar density closure built on the math module.

    Quadrature routines call the kernel millions of times with scalar
    arguments, where numpy dispatch dominates the cost.

    Returns:
        Callable: f(x) for 1D models, f(x, y) for 2D models
    """
    fam = model.family
    if fam is ModelFamily.GENERAL_NORMAL_2D:
        b1, b2, rho = model.beta1, model.beta2, model.rho
        one_minus = 1.0 - rho * rho
        norm = b1 * b2 / (2.0 * math.pi * math.sqrt(one_minus))

        def gnormal(x: float, y: float) -> float:
            p, q = b1 * x, b2 * y
            return norm * math.exp(-(p * p - 2.0 * rho * p * q + q * q) / (2.0 * one_minus))
        return gnormal

    b = model.beta
    if fam is ModelFamily.NORMAL_1D:
        norm = b / _SQRT_2PI
        return lambda x: norm * math.exp(-0.5 * (b * x) ** 2)
    if fam is ModelFamily.DOUBLE_EXP_1D:
        return lambda x: 0.5 * b * math.exp(-b * abs(x))
    if fam is ModelFamily.STUDENT_T_1D:
        nu = model.nu
        norm = b * _student_norm(nu)
        power = -(nu + 1.0) / 2.0
        return lambda x: norm * (1.0 + (b * x) ** 2 / nu) ** power
    if fam is ModelFamily.NORMAL_2D:
        norm = b * b / (2.0 * math.pi)
        return lambda x, y: norm * math.exp(-0.5 * b * b * (x * x + y * y))
    if fam is ModelFamily.EXP_2D:
        return lambda x, y: 0.25 * b * b * math.exp(-b * (abs(x) + abs(y)))

    m = 2.0 * (model.alpha - 1.0)
    alpha = model.alpha
    norm = b * b / (2.0 * math.pi)
    return lambda x, y: norm * (1.0 + b * b * (x * x + y * y) / m) ** (-alpha)


def peak_density(model: KernelModel) -> float:
    """Density at the mode (the origin), i.e. sup phi."""
    origin = 0.0 if model.dimension == 1 else np.zeros(2)
    return float(density(model, origin))


def length_scale(model: KernelModel) -> float:
    """Largest per-axis length scale 1/beta of the kernel."""
    if model.family is ModelFamily.GENERAL_NORMAL_2D:
        return max(1.0 / model.beta1, 1.0 / model.beta2)
    return 1.0 / model.beta


def _require_scalar_marginal(model: KernelModel) -> None:
    if model.family is ModelFamily.GENERAL_NORMAL_2D:
        raise UnsupportedModelError("gnormal2d has no common scalar marginal")


def marginal_cdf(model: KernelModel, u: ArrayLike) -> ArrayLike:
    """
    CDF F of the standardized kernel marginal (beta = 1).

    Args:
        model: Kernel model (not gnormal2d)
        u: Evaluation point(s)

    Returns:
        float or np.ndarray: F(u)

    Raises:
        UnsupportedModelError: For gnormal2d
    """
    _require_scalar_marginal(model)
    u = np.asarray(u, dtype=float)
    fam = model.family
    if fam in _NORMAL_FAMILIES:
        value = special.ndtr(u)
    elif fam in _EXP_FAMILIES:
        half_tail = 0.5 * np.exp(-np.abs(u))
        value = np.where(u >= 0, 1.0 - half_tail, half_tail)
    else:
        value = special.stdtr(model.marginal_df, u)
    return float(value) if np.ndim(value) == 0 else value


def marginal_sf(model: KernelModel, u: ArrayLike) -> ArrayLike:
    """Survival function 1 - F(u), computed as F(-u) to avoid cancellation."""
    return marginal_cdf(model, -np.asarray(u, dtype=float))


def marginal_pdf(model: KernelModel, u: ArrayLike) -> ArrayLike:
    """
    Density of the standardized marginal (phi_0 of the estimators).

    Raises:
        UnsupportedModelError: For gnormal2d
    """
    _require_scalar_marginal(model)
    u = np.asarray(u, dtype=float)
    fam = model.family
    if fam in _NORMAL_FAMILIES:
        value = np.exp(-0.5 * u * u) / _SQRT_2PI
    elif fam in _EXP_FAMILIES:
        value = 0.5 * np.exp(-np.abs(u))
    else:
        df = model.marginal_df
        value = _student_norm(df) * (1.0 + u * u / df) ** (-(df + 1.0) / 2.0)
    return float(value) if np.ndim(value) == 0 else value


def _polish_quantile(model: KernelModel, x: float, p: float) -> float:
    # Newton steps, kept only while they shrink the residual.
    residual = abs(marginal_cdf(model, x) - p)
    for _ in range(3):
        if residual == 0.0:
            break
        slope = marginal_pdf(model, x)
        if not slope > 0.0:
            break
        candidate = x - (marginal_cdf(model, x) - p) / slope
        new_residual = abs(marginal_cdf(model, candidate) - p)
        if not new_residual < residual:
            break
        x, residual = candidate, new_residual
    return x


def marginal_quantile(model: KernelModel, p: ArrayLike) -> ArrayLike:
    """
    Quantile function F^-1 of the standardized marginal.

    Args:
        model: Kernel model (not gnormal2d)
        p: Probability or array of probabilities in (0, 1)

    Returns:
        float or np.ndarray: F^-1(p)

    Raises:
        DomainError: If any p is outside (0, 1)
        UnsupportedModelError: For gnormal2d
    """
    _require_scalar_marginal(model)
    p = np.asarray(p, dtype=float)
    if not np.all((p > 0.0) & (p < 1.0)):
        raise DomainError(f"probability must lie in (0, 1), got {p.tolist()!r}")

    fam = model.family
    if fam in _NORMAL_FAMILIES:
        value = special.ndtri(p)
    elif fam in _EXP_FAMILIES:
        lower = np.minimum(p, 1.0 - p)
        magnitude = -np.log(2.0 * lower)
        value = np.where(p >= 0.5, magnitude, -magnitude)
    else:
        raw = np.atleast_1d(special.stdtrit(model.marginal_df, p))
        flat_p = np.atleast_1d(p)
        value = np.array([_polish_quantile(model, float(x), float(q)) for x, q in zip(raw, flat_p)])
        value = value.reshape(p.shape)
    return float(value) if np.ndim(value) == 0 else value


def marginal_isf(model: KernelModel, q: ArrayLike) -> ArrayLike:
    """Inverse survival function, F^-1(1 - q), accurate for small q."""
    return -marginal_quantile(model, q)


def tail_radius(model: KernelModel, tol: float) -> np.ndarray:
    """
    Per-axis radius outside which the kernel carries less than tol mass.

    For 1D kernels the two tails share tol. For 2D kernels the four
    half-planes outside the square share it, which bounds the mass
    outside the square by tol.

    Args:
        model: Kernel model
        tol: Tail mass in (0, 1)

    Returns:
        np.ndarray: Radii, one per axis
    """
    if not 0.0 < tol < 1.0:
        raise DomainError(f"tail mass must lie in (0, 1), got {tol!r}")
    if model.dimension == 1:
        return np.array([marginal_isf(model, tol / 2.0) / model.beta])
    if model.family is ModelFamily.GENERAL_NORMAL_2D:
        z = -special.ndtri(tol / 4.0)
        return np.array([z / model.beta1, z / model.beta2])
    r = marginal_isf(model, tol / 4.0) / model.beta
    return np.array([r, r])
