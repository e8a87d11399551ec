# Standard libraries
import dataclasses
import math

# Django
from django.test import SimpleTestCase

# Third party
import numpy as np

# choquard-normalized
from choquard_normalized.energy import el_residual
from choquard_normalized.exceptions import InvalidArgument, InvalidState
from choquard_normalized.fiber import fiber_max
from choquard_normalized.grid import GRADED, lp_norm
from choquard_normalized.moser import g_scan
from choquard_normalized.solver import (
    CONVERGED,
    FAIL,
    H1,
    MAX_ITER,
    PASS,
    SKIPPED,
    TENT,
    SolverConfig,
    initial_guess,
    lambda_upper_bound,
    minimize_reduced,
    verify_solution,
)
from tests.fields import kernel_for, power_model, reference_model


class SolverConfigTestCase(SimpleTestCase):
    def test_defaults(self):
        config = SolverConfig()

        self.assertEqual(config.a, 1.0)
        self.assertEqual(config.metric, "l2")
        self.assertEqual(config.profile, "gaussian")

    def test_validation(self):
        for options in (
            {"a": 0.0},
            {"step": -1.0},
            {"tol_grad": 0.0},
            {"max_iter": 0},
            {"armijo_factor": 1.0},
            {"profile": "square"},
            {"metric": "h2"},
        ):
            with self.assertRaises(InvalidArgument, msg=options):
                SolverConfig(**options)


class InitialGuessTestCase(SimpleTestCase):
    def test_profiles_have_the_requested_mass(self):
        grid, _kernel = kernel_for(256, 12.0)

        for profile in ("gaussian", TENT):
            guess = initial_guess(grid, 1.7, profile)
            self.assertAlmostEqual(lp_norm(grid, guess), 1.7, delta=1e-12)
            self.assertTrue(np.all(guess.values >= 0))

        with self.assertRaises(InvalidArgument):
            initial_guess(grid, 1.0, "square")


class LambdaBoundTestCase(SimpleTestCase):
    def test_reference_value(self):
        self.assertAlmostEqual(lambda_upper_bound(1.0, 1.0, 1.0, 4.0), 3 * math.pi)


class ReferenceSolveTestCase(SimpleTestCase):
    @classmethod
    def setUpClass(cls) -> None:
        super().setUpClass()
        cls.grid, cls.kernel = kernel_for(512, 6.0, 1.0, GRADED)
        cls.model = reference_model()
        cls.config = SolverConfig(metric=H1)
        cls.result = minimize_reduced(cls.config, cls.grid, cls.kernel, cls.model)

    def test_converges(self):
        result = self.result

        self.assertTrue(result.converged, result.diagnostic)
        self.assertEqual(result.diagnostic, CONVERGED)
        self.assertLess(result.residual, 1e-4)
        self.assertLess(abs(result.energy.pohozaev) / result.energy.gradient_sq, 1e-4)

    def test_energy_decreases(self):
        J = np.array([entry.J for entry in self.result.history])

        self.assertTrue(np.all(np.diff(J) <= 1e-12 * np.abs(J[1:])))

    def test_solution_is_admissible(self):
        u = self.result.field

        self.assertAlmostEqual(lp_norm(self.grid, u), 1.0, delta=1e-10)
        self.assertTrue(np.all(u.values >= 0))
        self.assertGreater(self.result.energy.J, 0)

    def test_multipliers_agree(self):
        self.assertAlmostEqual(
            self.result.lambda_multiplier / self.result.lambda_, 1.0, delta=1e-3
        )

    def test_fiber_of_the_solution_peaks_at_zero(self):
        _value, s_star = fiber_max(
            self.grid, self.kernel, self.model, self.result.field
        )

        self.assertAlmostEqual(s_star, 0.0, delta=1e-3)

    def test_below_every_moser_level(self):
        for n in (4, 8, 16, 32):
            scan = g_scan(self.grid, self.kernel, self.model, n, self.config.a)
            with self.subTest(n=n):
                self.assertLess(self.result.energy.J, scan.g_refined)

    def test_independent_of_the_initial_profile(self):
        config = dataclasses.replace(self.config, profile=TENT)
        tent = minimize_reduced(config, self.grid, self.kernel, self.model)

        self.assertTrue(tent.converged, tent.diagnostic)
        self.assertAlmostEqual(tent.energy.J / self.result.energy.J, 1.0, delta=1e-6)
        self.assertAlmostEqual(tent.lambda_ / self.result.lambda_, 1.0, delta=1e-4)

    def test_verification_passes(self):
        report = verify_solution(
            self.result, self.grid, self.kernel, self.model, self.config
        )

        self.assertEqual(
            [check.name for check in report.checks],
            ["pohozaev", "residual", "lambda", "gradient", "positivity", "level"],
        )
        self.assertTrue(report.passed, report.failed)
        for check in report.checks:
            self.assertEqual(check.status, PASS, check.name)
        self.assertLess(report["lambda"].value, 3 * math.pi)

    def test_negative_field_fails_positivity(self):
        negated = dataclasses.replace(self.result, field=self.result.field.scaled(-1.0))
        report = verify_solution(
            negated, self.grid, self.kernel, self.model, self.config
        )

        self.assertEqual(report["positivity"].status, FAIL)
        self.assertEqual(report["positivity"].value, float(self.grid.nodes[0]))
        self.assertIn("positivity", report.failed)

    def test_only_converged_results_are_verified(self):
        stopped = dataclasses.replace(self.result, converged=False, diagnostic=MAX_ITER)

        with self.assertRaises(InvalidState):
            verify_solution(stopped, self.grid, self.kernel, self.model, self.config)


class PowerSolveTestCase(SimpleTestCase):
    @classmethod
    def setUpClass(cls) -> None:
        super().setUpClass()
        cls.model = power_model(4.0)
        cls.config = SolverConfig(metric=H1)
        cls.results = {n: cls.solve(n) for n in (256, 512)}

    @classmethod
    def solve(cls, n, profile="gaussian"):
        grid, kernel = kernel_for(n, 6.0, 1.0, GRADED)
        config = dataclasses.replace(cls.config, profile=profile)
        return grid, kernel, minimize_reduced(config, grid, kernel, cls.model)

    def test_stable_under_refinement(self):
        _grid, _kernel, coarse = self.results[256]
        _grid, _kernel, fine = self.results[512]

        self.assertTrue(coarse.converged, coarse.diagnostic)
        self.assertTrue(fine.converged, fine.diagnostic)
        self.assertAlmostEqual(coarse.energy.J / fine.energy.J, 1.0, delta=1e-2)

    def test_residual_with_the_pohozaev_multiplier_shrinks(self):
        residuals = []
        for n in (256, 512):
            grid, kernel, result = self.results[n]
            _field, residual = el_residual(
                grid, kernel, self.model, result.field, result.lambda_
            )
            residuals.append(residual)

        self.assertLess(residuals[1], residuals[0])
        self.assertLess(residuals[1], 1e-3)

    def test_independent_of_the_initial_profile(self):
        _grid, _kernel, gaussian = self.results[256]
        _grid, _kernel, tent = self.solve(256, TENT)

        self.assertTrue(gaussian.converged and tent.converged)
        self.assertAlmostEqual(gaussian.energy.J / tent.energy.J, 1.0, delta=1e-6)

    def test_bounds_needing_gamma0_are_skipped(self):
        grid, kernel, result = self.results[256]
        report = verify_solution(result, grid, kernel, self.model, self.config)

        self.assertEqual(report["lambda"].status, SKIPPED)
        self.assertEqual(report["level"].status, SKIPPED)
        self.assertTrue(report.passed, report.failed)

    def test_iteration_cap(self):
        grid, kernel = kernel_for(256, 6.0, 1.0, GRADED)
        config = dataclasses.replace(self.config, max_iter=1)
        result = minimize_reduced(config, grid, kernel, self.model)

        self.assertFalse(result.converged)
        self.assertEqual(result.diagnostic, MAX_ITER)
        self.assertEqual(result.iterations, 1)
        self.assertEqual(len(result.history), 2)

    def test_l2_descent_lowers_the_energy(self):
        grid, kernel = kernel_for(256, 6.0, 1.0, GRADED)
        config = SolverConfig(max_iter=50)
        result = minimize_reduced(config, grid, kernel, self.model)
        J = np.array([entry.J for entry in result.history])

        self.assertEqual(result.iterations, len(result.history) - 1)
        self.assertLess(J[-1], J[0])
        self.assertTrue(np.all(np.diff(J) <= 1e-12 * np.abs(J[1:])))
