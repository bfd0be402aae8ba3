"""
Unit tests for the data module.

Tests SiteSet, ObservationMatrix and the CSV readers and writers.
"""

import math
import tempfile
import unittest
from pathlib import Path

import numpy as np

from movmax.data import ObservationMatrix, SiteSet, read_observations, read_sites, write_observations, write_sites
from movmax.errors import DataError, DomainError


class TestSiteSet(unittest.TestCase):
    """Tests for SiteSet."""

    def test_one_dimensional(self):
        """Test a 1D design."""
        sites = SiteSet(np.array([0.0, 1.0, 3.0]))
        self.assertEqual(sites.dimension, 1)
        self.assertEqual(sites.d, 3)
        self.assertEqual(len(sites), 3)
        self.assertEqual(sites.pairs(), [(0, 1), (0, 2), (1, 2)])
        self.assertEqual(sites.site_range(), 3.0)
        self.assertEqual(sites.displacement(2, 0), -3.0)
        self.assertEqual(sites.min_pair_distance(), 1.0)

    def test_column_vector_is_1d(self):
        """Test that a (d, 1) array is read as 1D sites."""
        sites = SiteSet(np.array([[0.0], [2.0]]))
        self.assertEqual(sites.dimension, 1)
        self.assertEqual(sites.points().shape, (2, 1))

    def test_two_dimensional(self):
        """Test a 2D design."""
        sites = SiteSet(np.array([[0.0, 0.0], [3.0, 4.0]]))
        self.assertEqual(sites.dimension, 2)
        self.assertEqual(sites.distance(0, 1), 5.0)
        np.testing.assert_array_equal(sites.displacement(0, 1), [3.0, 4.0])
        lo, hi = sites.bounds()
        np.testing.assert_array_equal(lo, [0.0, 0.0])
        np.testing.assert_array_equal(hi, [3.0, 4.0])
        with self.assertRaises(DomainError):
            sites.site_range()

    def test_distinct_sites(self):
        """Test that repeated sites need allow_coincident."""
        with self.assertRaises(DomainError):
            SiteSet(np.array([1.0, 1.0]))
        sites = SiteSet(np.array([1.0, 1.0]), allow_coincident=True)
        self.assertEqual(sites.min_pair_distance(), math.inf)

    def test_invalid_shapes(self):
        """Test rejected coordinate arrays."""
        for coords in (np.zeros((2, 3)), np.array([]), np.array([0.0, math.nan])):
            with self.assertRaises(DomainError):
                SiteSet(coords)

    def test_subset(self):
        """Test selecting sites in a given order."""
        sites = SiteSet(np.array([0.0, 1.0, 3.0]))
        np.testing.assert_array_equal(sites.subset([2, 0]).coords, [3.0, 0.0])

    def test_coords_read_only(self):
        """Test that the coordinates cannot be modified in place."""
        sites = SiteSet(np.array([0.0, 1.0]))
        with self.assertRaises(ValueError):
            sites.coords[0] = 5.0


class TestObservationMatrix(unittest.TestCase):
    """Tests for ObservationMatrix."""

    def test_column_count_must_match(self):
        """Test that columns and sites agree."""
        with self.assertRaises(DataError):
            ObservationMatrix(np.ones((4, 3)), SiteSet(np.array([0.0, 1.0])))

    def test_values_must_be_finite(self):
        """Test that NaN values are refused."""
        with self.assertRaises(DataError):
            ObservationMatrix(np.array([[1.0, math.nan]]), SiteSet(np.array([0.0, 1.0])))

    def test_accessors(self):
        """Test n, d and column."""
        obs = ObservationMatrix(np.arange(6.0).reshape(3, 2), SiteSet(np.array([0.0, 1.0])))
        self.assertEqual((obs.n, obs.d), (3, 2))
        np.testing.assert_array_equal(obs.column(1), [1.0, 3.0, 5.0])


class TestFiles(unittest.TestCase):
    """Tests for the sites and observations CSV files."""

    def setUp(self):
        """Set up a temporary directory."""
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        """Remove the temporary directory."""
        self.tmp.cleanup()

    def test_sites_file(self):
        """Test writing and reading 2D sites."""
        sites = SiteSet(np.array([[0.0, 0.5], [1.0 / 3.0, -2.0]]))
        path = self.dir / "sites.csv"
        write_sites(path, sites)
        self.assertEqual(path.read_text().splitlines()[0], "index,x,y")
        np.testing.assert_array_equal(read_sites(path).coords, sites.coords)

    def test_sites_file_errors(self):
        """Test malformed sites files."""
        path = self.dir / "sites.csv"
        path.write_text("x\n0\n")
        with self.assertRaises(DataError):
            read_sites(path)
        path.write_text("index,x\n0,a\n")
        with self.assertRaises(DataError):
            read_sites(path)
        path.write_text("index,x\n0,1\n1,1\n")
        with self.assertRaises(DataError):
            read_sites(path)
        with self.assertRaises(DataError):
            read_sites(self.dir / "missing.csv")

    def test_observations_file(self):
        """Test that observations keep full precision."""
        sites = SiteSet(np.array([0.0, 1.0]))
        obs = ObservationMatrix(np.array([[1.0 / 3.0, 2.0 ** 0.5], [1e-300, 7.25e10]]), sites)
        path = self.dir / "obs.csv"
        write_observations(path, obs)
        self.assertEqual(path.read_text().splitlines()[0], "site_1,site_2")
        np.testing.assert_array_equal(read_observations(path, sites).values, obs.values)

    def test_observations_column_mismatch(self):
        """Test a header that does not match the sites."""
        path = self.dir / "obs.csv"
        path.write_text("site_1,site_2,site_3\n1,2,3\n")
        with self.assertRaises(DataError):
            read_observations(path, SiteSet(np.array([0.0, 1.0])))

    def test_observations_errors(self):
        """Test unreadable and empty observation files."""
        sites = SiteSet(np.array([0.0, 1.0]))
        with self.assertRaises(DataError):
            read_observations(self.dir / "missing.csv", sites)
        path = self.dir / "obs.csv"
        path.write_text("site_1,site_2\n1,x\n")
        with self.assertRaises(DataError):
            read_observations(path, sites)


if __name__ == "__main__":
    unittest.main()
