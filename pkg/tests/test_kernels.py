"""
Unit tests for the kernels module.

Tests kernel densities, the standardized marginals and model parsing.
"""

import math
import unittest

import numpy as np
from scipy import integrate

from movmax.errors import DomainError, ParameterDomainError, UnsupportedModelError
from movmax.kernels import (
    KernelModel,
    ModelFamily,
    density,
    density_function,
    length_scale,
    marginal_cdf,
    marginal_isf,
    marginal_pdf,
    marginal_quantile,
    marginal_sf,
    peak_density,
    tail_radius,
)


def _one_dim_models(beta=1.0):
    return [
        KernelModel(ModelFamily.NORMAL_1D, beta=beta),
        KernelModel(ModelFamily.DOUBLE_EXP_1D, beta=beta),
        KernelModel(ModelFamily.STUDENT_T_1D, beta=beta, nu=3),
    ]


def _scalar_marginal_models():
    return _one_dim_models() + [
        KernelModel(ModelFamily.NORMAL_2D, beta=1.0),
        KernelModel(ModelFamily.EXP_2D, beta=1.0),
        KernelModel(ModelFamily.STUDENT_T_2D, beta=1.0, alpha=2.5),
    ]


class TestKernelModel(unittest.TestCase):
    """Tests for KernelModel validation and parsing."""

    def test_rejects_nonpositive_beta(self):
        """Test that beta must be positive."""
        with self.assertRaises(ParameterDomainError):
            KernelModel(ModelFamily.NORMAL_1D, beta=0.0)
        with self.assertRaises(ParameterDomainError):
            KernelModel(ModelFamily.EXP_2D, beta=-1.0)

    def test_rejects_fractional_nu(self):
        """Test that nu must be a positive integer."""
        with self.assertRaises(ParameterDomainError):
            KernelModel(ModelFamily.STUDENT_T_1D, beta=1.0, nu=1.5)
        with self.assertRaises(ParameterDomainError):
            KernelModel(ModelFamily.STUDENT_T_1D, beta=1.0)

    def test_nu_stored_as_int(self):
        """Test that an integral float nu is normalised to int."""
        model = KernelModel(ModelFamily.STUDENT_T_1D, beta=1.0, nu=4.0)
        self.assertIsInstance(model.nu, int)
        self.assertEqual(model.nu, 4)

    def test_rejects_alpha_at_most_one(self):
        """Test that alpha must exceed 1."""
        with self.assertRaises(ParameterDomainError):
            KernelModel(ModelFamily.STUDENT_T_2D, beta=1.0, alpha=1.0)

    def test_rejects_rho_out_of_range(self):
        """Test that |rho| < 1 for the general normal model."""
        with self.assertRaises(ParameterDomainError):
            KernelModel(ModelFamily.GENERAL_NORMAL_2D, beta1=1.0, beta2=1.0, rho=1.0)

    def test_dimension_and_tag(self):
        """Test dimension and tag properties."""
        self.assertEqual(KernelModel(ModelFamily.DOUBLE_EXP_1D, beta=1.0).dimension, 1)
        self.assertEqual(KernelModel(ModelFamily.EXP_2D, beta=1.0).dimension, 2)
        self.assertEqual(KernelModel(ModelFamily.STUDENT_T_1D, beta=1.0, nu=2).tag, "t1d")

    def test_marginal_df_of_t2d(self):
        """Test that the t2d marginal has 2(alpha - 1) degrees of freedom."""
        model = KernelModel(ModelFamily.STUDENT_T_2D, beta=1.0, alpha=2.5)
        self.assertAlmostEqual(model.marginal_df, 3.0)

    def test_from_mapping(self):
        """Test parsing a key-value model block."""
        model = KernelModel.from_mapping({"model": "T1D", "beta": "0.5", "nu": "3"})
        self.assertIs(model.family, ModelFamily.STUDENT_T_1D)
        self.assertEqual(model.beta, 0.5)
        self.assertEqual(model.nu, 3)

    def test_from_mapping_ignores_foreign_keys(self):
        """Test that parameters of other families are ignored."""
        model = KernelModel.from_mapping({"model": "dexp1d", "beta": "2", "nu": "3", "alpha": "4"})
        self.assertIsNone(model.nu)
        self.assertIsNone(model.alpha)

    def test_from_mapping_unknown_tag(self):
        """Test that an unknown tag is a parameter-domain error."""
        with self.assertRaises(ParameterDomainError) as ctx:
            KernelModel.from_mapping({"model": "gumbel", "beta": "1"})
        self.assertIn("gumbel", str(ctx.exception))

    def test_from_mapping_non_numeric(self):
        """Test that a non-numeric parameter is rejected."""
        with self.assertRaises(ParameterDomainError):
            KernelModel.from_mapping({"model": "normal1d", "beta": "strong"})

    def test_mapping_round_trip(self):
        """Test to_mapping followed by from_mapping."""
        model = KernelModel(ModelFamily.GENERAL_NORMAL_2D, beta1=1.0, beta2=2.0, rho=0.5)
        mapping = {k: str(v) for k, v in model.to_mapping().items()}
        self.assertEqual(KernelModel.from_mapping(mapping), model)

    def test_with_beta(self):
        """Test replacing beta."""
        model = KernelModel(ModelFamily.NORMAL_2D, beta=1.0).with_beta(3.0)
        self.assertEqual(model.beta, 3.0)
        with self.assertRaises(UnsupportedModelError):
            KernelModel(ModelFamily.GENERAL_NORMAL_2D, beta1=1.0, beta2=1.0, rho=0.0).with_beta(2.0)

    def test_precision_matrix(self):
        """Test the general normal precision matrix."""
        model = KernelModel(ModelFamily.GENERAL_NORMAL_2D, beta1=1.0, beta2=2.0, rho=0.5)
        expected = np.array([[1.0, -1.0], [-1.0, 4.0]]) / 0.75
        np.testing.assert_allclose(model.precision_matrix(), expected)


class TestDensity(unittest.TestCase):
    """Tests for density and density_function."""

    def test_documented_values(self):
        """Test the density at the mode for three families."""
        self.assertAlmostEqual(density(KernelModel(ModelFamily.NORMAL_1D, beta=1.0), 0.0),
                               1.0 / math.sqrt(2.0 * math.pi), places=12)
        self.assertAlmostEqual(density(KernelModel(ModelFamily.DOUBLE_EXP_1D, beta=2.0), 0.0), 1.0, places=12)
        self.assertAlmostEqual(density(KernelModel(ModelFamily.EXP_2D, beta=1.0), [0.0, 0.0]), 0.25, places=12)

    def test_peak_density(self):
        """Test that peak_density is the value at the origin."""
        model = KernelModel(ModelFamily.NORMAL_2D, beta=2.0)
        self.assertAlmostEqual(peak_density(model), 4.0 / (2.0 * math.pi), places=12)

    def test_scalar_closure_matches_vectorised(self):
        """Test that density_function agrees with density."""
        models = _one_dim_models(1.7)
        for model in models:
            f = density_function(model)
            for u in (-2.5, 0.0, 0.3, 4.0):
                self.assertAlmostEqual(f(u), density(model, u), places=14)
        models_2d = [
            KernelModel(ModelFamily.NORMAL_2D, beta=0.8),
            KernelModel(ModelFamily.EXP_2D, beta=1.3),
            KernelModel(ModelFamily.STUDENT_T_2D, beta=1.1, alpha=3.0),
            KernelModel(ModelFamily.GENERAL_NORMAL_2D, beta1=1.0, beta2=2.0, rho=-0.4),
        ]
        for model in models_2d:
            f = density_function(model)
            for point in ((0.0, 0.0), (1.0, -0.5), (-2.0, 3.0)):
                self.assertAlmostEqual(f(*point), density(model, np.array(point)), places=14)

    def test_vectorised_shape(self):
        """Test that 2D density evaluates a batch of points."""
        model = KernelModel(ModelFamily.EXP_2D, beta=1.0)
        values = density(model, np.zeros((5, 3, 2)))
        self.assertEqual(values.shape, (5, 3))

    def test_2d_rejects_scalar(self):
        """Test that 2D models need two coordinates."""
        with self.assertRaises(DomainError):
            density(KernelModel(ModelFamily.NORMAL_2D, beta=1.0), 1.0)

    def test_integrates_to_one_1d(self):
        """Test unit mass of the 1D kernels."""
        for beta in (0.25, 1.0, 4.0):
            for model in _one_dim_models(beta):
                f = density_function(model)
                left, _ = integrate.quad(f, -math.inf, 0.0, epsabs=1e-12, limit=200)
                right, _ = integrate.quad(f, 0.0, math.inf, epsabs=1e-12, limit=200)
                self.assertAlmostEqual(left + right, 1.0, delta=1e-8, msg=model.tag)

    def test_integrates_to_one_2d(self):
        """Test unit mass of the light-tailed 2D kernels over a wide box."""
        for beta in (0.25, 1.0, 4.0):
            for model in (KernelModel(ModelFamily.NORMAL_2D, beta=beta), KernelModel(ModelFamily.EXP_2D, beta=beta)):
                f = density_function(model)
                edge = 50.0 / beta
                quadrant, _ = integrate.dblquad(lambda y, x: f(x, y), 0.0, edge, 0.0, edge,
                                                epsabs=1e-12, epsrel=1e-12)
                self.assertAlmostEqual(4.0 * quadrant, 1.0, delta=1e-8, msg=model.tag)

    def test_t2d_radial_mass(self):
        """Test unit mass of the t2d kernel in polar coordinates."""
        for alpha in (1.5, 2.5, 6.0):
            model = KernelModel(ModelFamily.STUDENT_T_2D, beta=1.0, alpha=alpha)
            f = density_function(model)
            mass, _ = integrate.quad(lambda r: 2.0 * math.pi * r * f(r, 0.0), 0.0, math.inf,
                                     epsabs=1e-12, limit=200)
            self.assertAlmostEqual(mass, 1.0, delta=1e-7)

    def test_symmetry(self):
        """Test phi(-u) = phi(u)."""
        model = KernelModel(ModelFamily.GENERAL_NORMAL_2D, beta1=1.0, beta2=0.5, rho=0.7)
        point = np.array([0.4, -1.3])
        self.assertAlmostEqual(density(model, point), density(model, -point), places=15)
        for model in _one_dim_models():
            self.assertAlmostEqual(density(model, 1.7), density(model, -1.7), places=15)

    def test_unimodal_along_rays(self):
        """Test that the density decreases away from the mode."""
        rng = np.random.default_rng(3)
        models = _scalar_marginal_models() + [
            KernelModel(ModelFamily.GENERAL_NORMAL_2D, beta1=1.0, beta2=2.0, rho=0.5),
        ]
        scales = np.linspace(1.0, 6.0, 50)
        for model in models:
            for _ in range(100):
                if model.dimension == 1:
                    u = rng.normal() * scales
                else:
                    u = rng.normal(size=2)[None, :] * scales[:, None]
                values = density(model, u)
                self.assertTrue(np.all(np.diff(values) <= 1e-15), model.tag)

    def test_scaling_identity(self):
        """Test phi_beta(x) = beta phi_1(beta x) in 1D."""
        for model in _one_dim_models(2.5):
            unit = model.with_beta(1.0)
            for x in (-1.0, 0.2, 3.0):
                self.assertAlmostEqual(density(model, x), 2.5 * density(unit, 2.5 * x), places=14)


class TestMarginal(unittest.TestCase):
    """Tests for the standardized marginal distribution."""

    def setUp(self):
        """Set up test fixtures."""
        self.dexp = KernelModel(ModelFamily.DOUBLE_EXP_1D, beta=1.0)
        self.normal = KernelModel(ModelFamily.NORMAL_1D, beta=1.0)

    def test_documented_values(self):
        """Test the CDF and quantile at documented points."""
        self.assertEqual(marginal_cdf(self.dexp, 0.0), 0.5)
        self.assertAlmostEqual(marginal_cdf(self.dexp, math.log(2.0)), 0.75, places=14)
        self.assertEqual(marginal_cdf(self.normal, 0.0), 0.5)
        self.assertEqual(marginal_quantile(self.dexp, 0.5), 0.0)
        self.assertAlmostEqual(marginal_quantile(self.dexp, 0.75), math.log(2.0), places=14)
        self.assertAlmostEqual(marginal_quantile(self.normal, 0.8413), 1.0, delta=1e-3)

    def test_round_trip(self):
        """Test F(F^-1(p)) = p on a probability grid."""
        grid = np.arange(1, 100) / 100.0
        for model in _scalar_marginal_models():
            back = marginal_cdf(model, marginal_quantile(model, grid))
            np.testing.assert_allclose(back, grid, rtol=0, atol=1e-10, err_msg=model.tag)

    def test_symmetry(self):
        """Test F(-u) = 1 - F(u)."""
        for model in _scalar_marginal_models():
            for u in (0.3, 1.0, 2.7):
                self.assertAlmostEqual(marginal_cdf(model, -u), 1.0 - marginal_cdf(model, u), places=14)

    def test_sf_is_accurate_in_the_tail(self):
        """Test that sf keeps relative precision far out."""
        self.assertAlmostEqual(marginal_sf(self.dexp, 40.0) / (0.5 * math.exp(-40.0)), 1.0, places=12)

    def test_isf_small_tail(self):
        """Test the inverse survival function for small tail mass."""
        self.assertAlmostEqual(marginal_isf(self.dexp, 0.5 * math.exp(-30.0)), 30.0, places=10)

    def test_quantile_domain(self):
        """Test that p outside (0, 1) is rejected."""
        for p in (0.0, 1.0, -0.2, 1.5):
            with self.assertRaises(DomainError):
                marginal_quantile(self.normal, p)

    def test_general_normal_unsupported(self):
        """Test that gnormal2d has no scalar marginal."""
        model = KernelModel(ModelFamily.GENERAL_NORMAL_2D, beta1=1.0, beta2=1.0, rho=0.0)
        with self.assertRaises(UnsupportedModelError):
            marginal_cdf(model, 0.0)
        with self.assertRaises(UnsupportedModelError):
            marginal_quantile(model, 0.5)

    def test_pdf_is_cdf_derivative(self):
        """Test marginal_pdf against a central difference of marginal_cdf."""
        h = 1e-5
        for model in _scalar_marginal_models():
            for u in (-1.2, 0.4, 2.0):
                slope = (marginal_cdf(model, u + h) - marginal_cdf(model, u - h)) / (2 * h)
                self.assertAlmostEqual(marginal_pdf(model, u), slope, places=8)

    def test_t2d_marginal_identity(self):
        """Test that integrating the t2d kernel over one axis gives the Student marginal."""
        for alpha in (1.5, 2.5, 4.0):
            model = KernelModel(ModelFamily.STUDENT_T_2D, beta=1.0, alpha=alpha)
            f = density_function(model)
            for u in (0.0, 0.8, 2.5):
                value, _ = integrate.quad(lambda y: f(u, y), -math.inf, math.inf, epsabs=1e-12)
                self.assertAlmostEqual(value, marginal_pdf(model, u), delta=1e-6)


class TestTailRadius(unittest.TestCase):
    """Tests for tail_radius and length_scale."""

    def test_double_exponential_radius(self):
        """Test the closed-form radius of the double exponential kernel."""
        model = KernelModel(ModelFamily.DOUBLE_EXP_1D, beta=2.0)
        radius = tail_radius(model, 1e-8)
        self.assertEqual(radius.shape, (1,))
        self.assertAlmostEqual(radius[0], math.log(1e8) / 2.0, places=10)

    def test_radius_bounds_mass(self):
        """Test that the mass outside the radius equals tol in 1D."""
        for model in _one_dim_models(1.5):
            r = tail_radius(model, 1e-6)[0]
            outside = 2.0 * marginal_sf(model, model.beta * r)
            self.assertAlmostEqual(outside / 1e-6, 1.0, places=6)

    def test_2d_radius_per_axis(self):
        """Test that the general normal radius follows each axis scale."""
        model = KernelModel(ModelFamily.GENERAL_NORMAL_2D, beta1=1.0, beta2=4.0, rho=0.0)
        r1, r2 = tail_radius(model, 1e-8)
        self.assertAlmostEqual(r1 / r2, 4.0, places=12)

    def test_invalid_tol(self):
        """Test that tol must lie in (0, 1)."""
        with self.assertRaises(DomainError):
            tail_radius(KernelModel(ModelFamily.NORMAL_1D, beta=1.0), 0.0)

    def test_length_scale(self):
        """Test the largest per-axis length scale."""
        self.assertEqual(length_scale(KernelModel(ModelFamily.NORMAL_1D, beta=4.0)), 0.25)
        model = KernelModel(ModelFamily.GENERAL_NORMAL_2D, beta1=0.5, beta2=2.0, rho=0.1)
        self.assertEqual(length_scale(model), 2.0)


if __name__ == "__main__":
    unittest.main()
