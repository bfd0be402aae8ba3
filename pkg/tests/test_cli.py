"""
Integration tests for the CLI.

Tests the complete workflow on small configurations written to a
temporary directory.
"""

import json
import math
import tempfile
import unittest
from io import StringIO
from pathlib import Path
from unittest.mock import patch

from movmax import __version__
from movmax.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, main

CONFIG = (
    "[model]\n"
    "model = dexp1d\n"
    "beta = 1\n"
    "\n"
    "[sites]\n"
    "coords = 0, 1\n"
    "\n"
    "[sim]\n"
    "n = 300\n"
    "seed = 7\n"
    "\n"
    "[estimate]\n"
    "k = 30\n"
)


class CliTestCase(unittest.TestCase):
    """Shared temporary directory and helpers."""

    def setUp(self):
        """Set up a temporary directory with a configuration."""
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.config = self.dir / "run.ini"
        self.config.write_text(CONFIG)

    def tearDown(self):
        """Remove the temporary directory."""
        self.tmp.cleanup()

    def path(self, name):
        return str(self.dir / name)

    def run_cli(self, *argv):
        """Run main and return (exit code, stdout, stderr)."""
        with patch('sys.stdout', new=StringIO()) as fake_out, patch('sys.stderr', new=StringIO()) as fake_err:
            code = main(list(argv))
        return code, fake_out.getvalue(), fake_err.getvalue()

    def simulate(self, *extra):
        return self.run_cli(*extra, "simulate", str(self.config),
                            "-o", self.path("obs.csv"), "--sites-output", self.path("sites.csv"))


class TestArguments(CliTestCase):
    """Tests for argument handling."""

    @patch('sys.stdout', new_callable=StringIO)
    def test_no_arguments_prints_help(self, mock_stdout):
        """Test that running without arguments shows help."""
        self.assertEqual(main([]), EXIT_OK)
        self.assertIn("usage: movmax", mock_stdout.getvalue())

    @patch('sys.stdout', new_callable=StringIO)
    def test_version(self, mock_stdout):
        """Test --version."""
        with self.assertRaises(SystemExit) as ctx:
            main(["--version"])
        self.assertEqual(ctx.exception.code, 0)
        self.assertIn(__version__, mock_stdout.getvalue())

    @patch('sys.stderr', new_callable=StringIO)
    def test_quiet_and_verbose_conflict(self, mock_stderr):
        """Test that -q and -v cannot be combined."""
        with self.assertRaises(SystemExit) as ctx:
            main(["-q", "-v", "simulate", str(self.config)])
        self.assertEqual(ctx.exception.code, 2)
        self.assertIn("cannot be used together", mock_stderr.getvalue())

    @patch('sys.stdout', new_callable=StringIO)
    def test_options_without_command(self, mock_stdout):
        """Test that a bare -v prints help."""
        self.assertEqual(main(["-v"]), EXIT_OK)
        self.assertIn("COMMAND", mock_stdout.getvalue())


class TestSimulateCommand(CliTestCase):
    """Tests for movmax simulate."""

    def test_writes_both_files(self):
        """Test the observations and sites CSV files."""
        code, out, _ = self.simulate()
        self.assertEqual(code, EXIT_OK)
        self.assertIn("Simulated dexp1d(beta=1) at d=2 site(s), n=300, seed=7", out)
        observations = Path(self.path("obs.csv")).read_text().splitlines()
        self.assertEqual(observations[0], "site_1,site_2")
        self.assertEqual(len(observations), 301)
        self.assertEqual(Path(self.path("sites.csv")).read_text().splitlines()[0], "index,x")

    def test_deterministic(self):
        """Test that two runs write identical observations."""
        self.simulate()
        first = Path(self.path("obs.csv")).read_text()
        self.simulate()
        self.assertEqual(Path(self.path("obs.csv")).read_text(), first)

    def test_quiet(self):
        """Test that -q prints nothing."""
        code, out, _ = self.simulate("-q")
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(out, "")

    def test_bad_config(self):
        """Test that a configuration error exits with 2."""
        self.config.write_text(CONFIG.replace("n = 300", "n = 0"))
        code, _, err = self.simulate()
        self.assertEqual(code, EXIT_CONFIG)
        self.assertIn("[sim] n", err)

    def test_missing_config(self):
        """Test an unreadable configuration file."""
        code, _, err = self.run_cli("simulate", self.path("missing.ini"))
        self.assertEqual(code, EXIT_CONFIG)
        self.assertIn("Error:", err)


class TestDistCommand(CliTestCase):
    """Tests for movmax dist."""

    def test_grid_to_stdout(self):
        """Test a small grid printed as CSV."""
        code, out, _ = self.run_cli("dist", str(self.config), "--w1", "1, 2", "--w2", "1")
        self.assertEqual(code, EXIT_OK)
        lines = out.splitlines()
        self.assertEqual(lines[0], "w1,w2,neg_log_cdf")
        self.assertTrue(lines[1].startswith("1,1,"))
        self.assertTrue(lines[2].startswith("2,1,"))
        self.assertIn("R(1,1) =", out)

    def test_grid_value(self):
        """Test the closed-form value at (1, 1)."""
        code, out, _ = self.run_cli("dist", str(self.config), "--w1", "1", "--w2", "1")
        self.assertEqual(code, EXIT_OK)
        value = float(out.splitlines()[1].split(",")[2])
        self.assertAlmostEqual(value, 2.0 - math.exp(-0.5), places=12)

    def test_theta_to_file(self):
        """Test the spectral density written to a file."""
        output = self.path("spectral.csv")
        code, out, _ = self.run_cli("dist", str(self.config), "--theta", "0.5, 0.7853981633974483", "-o", output)
        self.assertEqual(code, EXIT_OK)
        lines = Path(output).read_text().splitlines()
        self.assertEqual(lines[0], "theta,s_theta")
        self.assertEqual(len(lines), 3)
        self.assertIn(f"Wrote {output}", out)

    def test_missing_grid(self):
        """Test that dist needs a grid or angles."""
        code, _, err = self.run_cli("dist", str(self.config), "--w1", "1")
        self.assertEqual(code, EXIT_CONFIG)
        self.assertIn("--w2", err)

    def test_bad_pair(self):
        """Test a site index out of range."""
        code, _, _ = self.run_cli("dist", str(self.config), "--w1", "1", "--w2", "1", "--pair", "0", "5")
        self.assertEqual(code, EXIT_CONFIG)

    def test_non_positive_grid(self):
        """Test that grid values must be positive."""
        code, _, err = self.run_cli("dist", str(self.config), "--w1", "0", "--w2", "1")
        self.assertEqual(code, EXIT_CONFIG)
        self.assertIn("positive", err)


class TestEstimateCommand(CliTestCase):
    """Tests for movmax estimate and diagnose."""

    def setUp(self):
        """Simulate observations to estimate from."""
        super().setUp()
        self.simulate()

    def test_estimate(self):
        """Test a pairwise estimate with its JSON and CSV outputs."""
        code, out, _ = self.run_cli("estimate", self.path("obs.csv"), self.path("sites.csv"),
                                    "--model", "dexp1d", "--k", "30",
                                    "-o", self.path("report.json"), "--pairs-output", self.path("pairs.csv"))
        self.assertEqual(code, EXIT_OK)
        self.assertIn("Estimator pairwise (dexp1d)", out)
        payload = json.loads(Path(self.path("report.json")).read_text())
        self.assertEqual(payload["estimator"], "pairwise")
        self.assertEqual(payload["k"], 30)
        self.assertGreater(payload["beta_hat"], 0.0)
        self.assertEqual(len(Path(self.path("pairs.csv")).read_text().splitlines()), 2)

    def test_k_sweep(self):
        """Test the sweep mode writes one report per k."""
        code, _, _ = self.run_cli("-q", "estimate", self.path("obs.csv"), self.path("sites.csv"),
                                  "--model", "dexp1d", "--k-grid", "20, 40", "--no-variance",
                                  "-o", self.path("sweep.json"), "--pairs-output", self.path("sweep.csv"))
        self.assertEqual(code, EXIT_OK)
        payload = json.loads(Path(self.path("sweep.json")).read_text())
        self.assertEqual([r["k"] for r in payload], [20, 40])
        self.assertTrue(Path(self.path("sweep.csv")).read_text().startswith("k,j,m,"))

    def test_missing_observations(self):
        """Test that a missing file exits with 3."""
        code, _, err = self.run_cli("estimate", self.path("missing.csv"), self.path("sites.csv"),
                                    "--model", "dexp1d", "--k", "30", "-o", self.path("r.json"))
        self.assertEqual(code, EXIT_DATA)
        self.assertIn("Error:", err)

    def test_k_too_large(self):
        """Test a threshold count at the sample size."""
        code, _, _ = self.run_cli("estimate", self.path("obs.csv"), self.path("sites.csv"),
                                  "--model", "dexp1d", "--k", "300", "-o", self.path("r.json"),
                                  "--pairs-output", self.path("p.csv"))
        self.assertNotEqual(code, EXIT_OK)

    def test_diagnose(self):
        """Test the diagnostic table of a fitted model."""
        output = self.path("diag.csv")
        code, out, _ = self.run_cli("diagnose", self.path("obs.csv"), self.path("sites.csv"),
                                    "--model", "dexp1d", "--beta", "1", "--k", "30", "-o", output)
        self.assertEqual(code, EXIT_OK)
        self.assertIn("max |R_hat - R_model|", out)
        lines = Path(output).read_text().splitlines()
        self.assertEqual(lines[0], "j,m,distance,R_hat,R_model,gap")
        self.assertTrue(lines[1].startswith("0,1,1,"))


class TestMcCommand(CliTestCase):
    """Tests for movmax mc."""

    def test_small_experiment(self):
        """Test a three-run experiment."""
        self.config.write_text(CONFIG + "\n[mc]\nruns = 3\nseed = 11\n")
        code, out, _ = self.run_cli("mc", str(self.config), "-o", self.path("runs.csv"),
                                    "--summary", self.path("summary.json"))
        self.assertEqual(code, EXIT_OK)
        self.assertIn("Experiment: 3 run(s)", out)
        rows = Path(self.path("runs.csv")).read_text().splitlines()
        self.assertEqual(len(rows), 4)
        self.assertTrue(rows[1].startswith("0,11,30,"))
        self.assertTrue(rows[2].startswith("1,10,30,"))
        summary = json.loads(Path(self.path("summary.json")).read_text())
        self.assertEqual(summary["runs"], 3)
        self.assertEqual(summary["true_beta"], 1.0)

    def test_threshold_sweep_refused(self):
        """Test that an experiment with several k values exits with 2."""
        self.config.write_text(CONFIG.replace("k = 30", "k_grid = 20, 40") + "\n[mc]\nruns = 2\n")
        code, _, err = self.run_cli("mc", str(self.config), "-o", self.path("runs.csv"))
        self.assertEqual(code, EXIT_CONFIG)
        self.assertIn("k_grid", err)


if __name__ == "__main__":
    unittest.main()
