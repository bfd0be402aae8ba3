"""
Unit tests for the oracle module.

Checks the quadrature evaluations of L and R against the closed forms.
"""

import math
import os
import unittest

import numpy as np

from movmax.data import SiteSet
from movmax.errors import DomainError
from movmax.exactdist import L_pair, PairDependence, R_multi_ones, R_pair, neg_log_bivariate_cdf
from movmax.kernels import KernelModel, ModelFamily
from movmax.oracle import L_numeric, R_numeric, R_range_identity

SLOW = os.environ.get("MOVMAX_SLOW") == "1"


class TestLNumeric(unittest.TestCase):
    """Tests for L_numeric."""

    def test_matches_closed_form_1d(self):
        """Test pairs of 1D sites against L_pair."""
        models = [
            KernelModel(ModelFamily.NORMAL_1D, beta=1.0),
            KernelModel(ModelFamily.DOUBLE_EXP_1D, beta=2.0),
            KernelModel(ModelFamily.STUDENT_T_1D, beta=1.0, nu=3),
        ]
        for model in models:
            for x1, x2 in ((1.0, 1.0), (0.4, 1.5)):
                exact = L_pair(PairDependence(model, 1.2), x1, x2)
                numeric = L_numeric(model, [0.0, 1.2], [x1, x2])
                self.assertAlmostEqual(numeric, exact, delta=1e-7, msg=model.tag)

    def test_single_weight(self):
        """Test L(x, 0) = x."""
        model = KernelModel(ModelFamily.NORMAL_1D, beta=1.0)
        self.assertAlmostEqual(L_numeric(model, [0.0, 2.0], [2.0, 0.0]), 2.0, delta=1e-9)

    def test_coincident_sites(self):
        """Test that identical sites give complete dependence."""
        model = KernelModel(ModelFamily.DOUBLE_EXP_1D, beta=1.0)
        self.assertAlmostEqual(L_numeric(model, [1.0, 1.0], [1.0, 1.0]), 1.0, delta=1e-9)

    def test_accepts_site_set(self):
        """Test that a SiteSet is used as is."""
        model = KernelModel(ModelFamily.NORMAL_1D, beta=1.0)
        sites = SiteSet(np.array([0.0, 1.0, 3.0]))
        value = L_numeric(model, sites, [1.0, 1.0, 1.0])
        self.assertGreater(value, 1.0)
        self.assertLess(value, 3.0)

    def test_input_checks(self):
        """Test weight validation."""
        model = KernelModel(ModelFamily.NORMAL_1D, beta=1.0)
        with self.assertRaises(DomainError):
            L_numeric(model, [0.0, 1.0], [1.0])
        with self.assertRaises(DomainError):
            L_numeric(model, [0.0, 1.0], [1.0, -1.0])
        with self.assertRaises(DomainError):
            L_numeric(model, [0.0, 1.0], [0.0, 0.0])
        with self.assertRaises(DomainError):
            L_numeric(KernelModel(ModelFamily.NORMAL_2D, beta=1.0), [0.0, 1.0], [1.0, 1.0])


class TestRNumeric(unittest.TestCase):
    """Tests for R_numeric and R_range_identity."""

    def test_three_sites(self):
        """Test R(1, 1, 1) against the range formula."""
        model = KernelModel(ModelFamily.DOUBLE_EXP_1D, beta=1.0)
        value = R_numeric(model, [0.0, 1.0, 3.0], [1.0, 1.0, 1.0])
        self.assertAlmostEqual(value, math.exp(-1.5), delta=1e-8)

    def test_pair_with_unequal_weights(self):
        """Test R(x1, x2) against R_pair."""
        model = KernelModel(ModelFamily.NORMAL_1D, beta=1.5)
        exact = R_pair(PairDependence(model, 0.8), 0.6, 1.9)
        self.assertAlmostEqual(R_numeric(model, [0.0, 0.8], [0.6, 1.9]), exact, delta=1e-8)

    def test_range_identity(self):
        """Test that interior sites do not change R(1, ..., 1)."""
        for model in (KernelModel(ModelFamily.NORMAL_1D, beta=1.0),
                      KernelModel(ModelFamily.STUDENT_T_1D, beta=2.0, nu=1)):
            sites = [0.0, 0.4, 1.1, 2.5]
            expected = R_multi_ones(model, sites)
            self.assertAlmostEqual(R_range_identity(model, sites), expected, delta=1e-9, msg=model.tag)
            self.assertAlmostEqual(R_numeric(model, sites, [1.0] * 4), expected, delta=1e-8, msg=model.tag)

    def test_exp2d_pair(self):
        """Test the exponential 2D model at displacement (1, 1)."""
        model = KernelModel(ModelFamily.EXP_2D, beta=1.0)
        value = R_numeric(model, [[0.0, 0.0], [1.0, 1.0]], [1.0, 1.0])
        self.assertAlmostEqual(value, 1.5 * math.exp(-1.0), delta=1e-7)

    def test_normal2d_pair(self):
        """Test the isotropic normal model at displacement (3, 4)."""
        model = KernelModel(ModelFamily.NORMAL_2D, beta=1.0)
        value = R_numeric(model, [[0.0, 0.0], [3.0, 4.0]], [1.0, 1.0])
        self.assertAlmostEqual(value, 0.012419330651552318, delta=1e-7)

    @unittest.skipUnless(SLOW, "set MOVMAX_SLOW=1 to run")
    def test_t2d_pair(self):
        """Test the Student 2D closed form by quadrature."""
        model = KernelModel(ModelFamily.STUDENT_T_2D, beta=1.0, alpha=2.5)
        t = np.array([1.0, 0.5])
        exact = R_pair(PairDependence(model, t), 0.7, 1.3)
        value = R_numeric(model, [[0.0, 0.0], t.tolist()], [0.7, 1.3])
        self.assertAlmostEqual(value, exact, delta=1e-6)

    def test_requires_positive_weights(self):
        """Test that R needs every weight positive."""
        model = KernelModel(ModelFamily.NORMAL_1D, beta=1.0)
        with self.assertRaises(DomainError):
            R_numeric(model, [0.0, 1.0], [1.0, 0.0])

    def test_range_identity_rejects_2d(self):
        """Test that the range identity is 1D only."""
        with self.assertRaises(DomainError):
            R_range_identity(KernelModel(ModelFamily.NORMAL_2D, beta=1.0), [[0.0, 0.0], [1.0, 1.0]])
        with self.assertRaises(DomainError):
            R_range_identity(KernelModel(ModelFamily.NORMAL_1D, beta=1.0), [0.0])


def _assert_closed_form_matches(case, model, displacements, levels, delta=1e-6):
    for t in displacements:
        pd = PairDependence(model, np.array(t))
        sites = [[0.0, 0.0], list(t)]
        for w1, w2 in levels:
            exact = neg_log_bivariate_cdf(pd, w1, w2)
            numeric = L_numeric(model, sites, [1.0 / w1, 1.0 / w2])
            case.assertAlmostEqual(numeric, exact, delta=delta, msg=f"{model.tag} t={t} w=({w1}, {w2})")


class TestClosedFormsAgainstQuadrature(unittest.TestCase):
    """Tests the 2D closed forms of V against the quadrature of L = V(1/x1, 1/x2)."""

    LEVELS = [(1.0, 1.0), (0.5, 2.0), (3.0, 0.8)]
    DISPLACEMENTS = [(1.0, 0.5), (-0.3, 1.2)]

    def test_exp2d(self):
        """Test the exponential 2D model, including both crossing regions."""
        model = KernelModel(ModelFamily.EXP_2D, beta=1.0)
        _assert_closed_form_matches(self, model, self.DISPLACEMENTS + [(0.8, 0.0)], self.LEVELS)

    def test_normal2d(self):
        """Test the isotropic normal model."""
        model = KernelModel(ModelFamily.NORMAL_2D, beta=1.5)
        _assert_closed_form_matches(self, model, self.DISPLACEMENTS, self.LEVELS)

    def test_gnormal2d(self):
        """Test the general normal model with correlated axes."""
        model = KernelModel(ModelFamily.GENERAL_NORMAL_2D, beta1=1.0, beta2=2.0, rho=0.5)
        _assert_closed_form_matches(self, model, self.DISPLACEMENTS, self.LEVELS)

    @unittest.skipUnless(SLOW, "set MOVMAX_SLOW=1 to run")
    def test_t2d(self):
        """Test the Student 2D model on both sides of the equal-weight branch."""
        for alpha in (2.5, 4.0):
            model = KernelModel(ModelFamily.STUDENT_T_2D, beta=1.0, alpha=alpha)
            _assert_closed_form_matches(self, model, self.DISPLACEMENTS, self.LEVELS)

    @unittest.skipUnless(SLOW, "set MOVMAX_SLOW=1 to run")
    def test_full_grid(self):
        """Test a 5 x 5 level grid for every 2D family at two strengths."""
        grid = [0.25, 0.5, 1.0, 2.0, 4.0]
        levels = [(w1, w2) for w1 in grid for w2 in grid]
        for beta in (0.5, 2.0):
            for model in (KernelModel(ModelFamily.EXP_2D, beta=beta),
                          KernelModel(ModelFamily.NORMAL_2D, beta=beta),
                          KernelModel(ModelFamily.GENERAL_NORMAL_2D, beta1=beta, beta2=1.0, rho=-0.4)):
                _assert_closed_form_matches(self, model, [(1.0, 0.5)], levels)


if __name__ == "__main__":
    unittest.main()
