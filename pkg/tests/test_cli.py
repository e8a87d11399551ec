# Standard libraries
from contextlib import redirect_stderr, redirect_stdout
import io as _io
import json
from pathlib import Path
import tempfile

# Django
from django.test import SimpleTestCase

# choquard-normalized
from choquard_normalized import cli, io
from choquard_normalized.exceptions import UsageError


class ParseConfigTestCase(SimpleTestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.path = Path(self.directory.name)

    def tearDown(self):
        self.directory.cleanup()

    def test_defaults(self):
        config = cli.parse_config(["solve"])

        self.assertEqual(config.command, "solve")
        self.assertEqual(config.grid_n, 512)
        self.assertEqual(config.grid_r, 6.0)
        self.assertEqual(config.grid_scheme, "graded")
        self.assertEqual(config.metric, "l2")
        self.assertEqual(config.alpha, 1.0)
        self.assertFalse(config.verbose)

    def test_invalid_alpha(self):
        with self.assertRaises(UsageError) as context:
            cli.parse_config(["solve", "--alpha", "3.0"])

        self.assertEqual(context.exception.key, "alpha")
        self.assertIn("alpha must lie in (0,2)", str(context.exception))

    def test_unknown_command(self):
        with self.assertRaises(UsageError):
            cli.parse_config(["integrate"])

    def test_flags_override_the_file(self):
        path = io.write_json(self.path / "run.json", {"sigma": 4.0, "mass": 2.0})

        config = cli.parse_config(["solve", "--config", str(path), "--sigma", "4.5"])
        self.assertEqual(config.sigma, 4.5)
        self.assertEqual(config.mass, 2.0)
        self.assertEqual(config.config, str(path))

    def test_unknown_key_in_the_file(self):
        path = io.write_json(self.path / "run.json", {"colour": "red"})

        with self.assertRaises(UsageError) as context:
            cli.parse_config(["solve", "--config", str(path)])
        self.assertEqual(context.exception.key, "colour")

    def test_namespaces_are_flattened(self):
        path = io.write_json(
            self.path / "run.json",
            {"model": {"sigma": 5.0}, "grid": {"n": 64, "grid_r": 3.0}},
        )

        config = cli.parse_config(["solve", "--config", str(path)])
        self.assertEqual((config.sigma, config.grid_n, config.grid_r), (5.0, 64, 3.0))

    def test_moser_scan_defaults(self):
        config = cli.parse_config(["moser-scan"])

        self.assertEqual(config.grid_scheme, "graded")
        self.assertEqual(config.grid_r, 1.0)
        self.assertEqual(config.grid_n, 1024)
        self.assertEqual(config.moser_n, (4, 8, 16, 32, 64, 128, 256, 512, 1024))

        config = cli.parse_config(["moser-scan", "--grid-n", "256", "--moser-n", "8"])
        self.assertEqual((config.grid_n, config.moser_n), (256, (8,)))

    def test_moser_scan_rejects_the_power_model(self):
        with self.assertRaises(UsageError) as context:
            cli.parse_config(["moser-scan", "--variant", "power"])

        self.assertEqual(context.exception.key, "variant")


class CommandsTestCase(SimpleTestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.out = Path(self.directory.name)

    def tearDown(self):
        self.directory.cleanup()

    def run_command(self, *args):
        stdout = _io.StringIO()
        with redirect_stdout(stdout), redirect_stderr(_io.StringIO()):
            code = cli.main([*args, "--out", str(self.out)])
        return code, stdout.getvalue()

    def test_usage_error(self):
        stderr = _io.StringIO()
        with redirect_stderr(stderr):
            code = cli.main(["solve", "--alpha", "3.0"])

        self.assertEqual(code, cli.EXIT_USAGE)
        self.assertIn("alpha must lie in (0,2)", stderr.getvalue())

    def test_check_assumptions_reports_failures(self):
        code, stdout = self.run_command("check-assumptions", "--sigma", "2")

        self.assertEqual(code, cli.EXIT_VERIFICATION)
        self.assertIn("f3", stdout)
        report = json.loads((self.out / "assumptions.json").read_text())
        self.assertFalse(report["report"]["passed"])
        statuses = [check["status"] for check in report["report"]["checks"]]
        self.assertIn("fail", statuses)
        self.assertEqual(report["config"]["sigma"], 2.0)

    def test_check_assumptions_is_deterministic(self):
        self.run_command("check-assumptions", "--sigma", "2")
        first = (self.out / "assumptions.json").read_bytes()
        self.run_command("check-assumptions", "--sigma", "2")

        self.assertEqual((self.out / "assumptions.json").read_bytes(), first)

    def test_check_assumptions_reference_model(self):
        code, _stdout = self.run_command("check-assumptions")

        self.assertEqual(code, cli.EXIT_OK)

    def test_unconverged_solve_and_verify(self):
        code, stdout = self.run_command(
            "solve", "--grid-n", "64", "--grid-r", "8", "--max-iter", "2"
        )

        self.assertEqual(code, cli.EXIT_NUMERICAL)
        self.assertIn("max-iter", stdout)
        for name in ("field.csv", "history.csv", "result.json"):
            self.assertTrue((self.out / name).exists(), name)
        result = json.loads((self.out / "result.json").read_text())
        self.assertFalse(result["result"]["converged"])
        self.assertIsNone(result["verification"])
        self.assertIn("lambda", result["result"])
        self.assertIn("nonlocal", result["result"]["energy"])

        code, _stdout = self.run_command("verify", "--grid-n", "64", "--grid-r", "8")
        self.assertEqual(code, cli.EXIT_VERIFICATION)
        verification = json.loads((self.out / "verification.json").read_text())
        checks = verification["verification"]["checks"]
        self.assertEqual(len(checks), 6)
        failed = [check["name"] for check in checks if check["status"] == "fail"]
        self.assertIn("residual", failed)

    def test_verify_on_another_grid(self):
        self.run_command("solve", "--grid-n", "64", "--grid-r", "8", "--max-iter", "1")

        code, _stdout = self.run_command("verify", "--grid-n", "65", "--grid-r", "8")
        self.assertEqual(code, cli.EXIT_USAGE)

    def test_convolve_test(self):
        code, stdout = self.run_command(
            "convolve-test", "--grid-n", "512", "--grid-r", "4"
        )

        self.assertEqual(code, cli.EXIT_OK)
        report = json.loads((self.out / "convolve.json").read_text())
        self.assertEqual(
            [case["field"] for case in report["cases"]],
            ["gaussian", "bump", "polynomial"],
        )
        for case in report["cases"]:
            self.assertTrue(case["passed"], case)
        self.assertTrue(report["passed"])
        self.assertIn("convolve-test", stdout)

    def test_convolve_test_on_a_coarse_grid(self):
        code, _stdout = self.run_command(
            "convolve-test", "--grid-n", "16", "--grid-r", "4"
        )

        self.assertEqual(code, cli.EXIT_VERIFICATION)
        report = json.loads((self.out / "convolve.json").read_text())
        self.assertFalse(report["passed"])

    def test_moser_scan_without_a_witness(self):
        code, stdout = self.run_command(
            "moser-scan", "--grid-n", "256", "--moser-n", "8", "16"
        )

        self.assertEqual(code, cli.EXIT_VERIFICATION)
        report = json.loads((self.out / "moser.json").read_text())
        self.assertIsNone(report["witness"])
        self.assertEqual([scan["n"] for scan in report["scans"]], [8, 16])
        rows = io.read_rows_csv(self.out / "moser-n8.csv", io.MOSER_HEADER)
        self.assertEqual(rows.shape, (400, 2))
        self.assertTrue((self.out / "moser-n16.csv").exists())
        self.assertIn("moser-scan", stdout)

    def test_moser_scan_with_a_witness(self):
        code, stdout = self.run_command(
            "moser-scan", "--grid-n", "256", "--beta0", "4", "--moser-n", "256"
        )

        self.assertEqual(code, cli.EXIT_OK)
        report = json.loads((self.out / "moser.json").read_text())
        self.assertEqual(report["witness"], 256)
        self.assertIn("witness 256", stdout)
