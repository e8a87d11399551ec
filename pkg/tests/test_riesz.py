# Standard libraries
import math
import tempfile

# Django
from django.test import SimpleTestCase, override_settings

# Third party
import numpy as np
from scipy.integrate import quad

# choquard-normalized
from choquard_normalized import io
from choquard_normalized.exceptions import InvalidArgument
from choquard_normalized.cli import oracle_fields
from choquard_normalized.grid import GRADED, UNIFORM_MIDPOINT, inner, make_grid
from choquard_normalized.riesz import (
    RieszKernelMatrix,
    angular_kernel,
    assemble_kernel,
    brute_force_oracle,
    convolve,
    hls_ratio,
    riesz_constant,
)
from tests.fields import bump, kernel_for


class RieszConstantTestCase(SimpleTestCase):
    def test_known_values(self):
        self.assertAlmostEqual(riesz_constant(1.0), 1 / (2 * math.pi), places=12)
        self.assertAlmostEqual(riesz_constant(0.5), 0.0760, places=3)

    def test_continuous_on_the_admissible_range(self):
        values = [riesz_constant(alpha) for alpha in np.linspace(0.1, 1.9, 37)]

        self.assertTrue(all(math.isfinite(value) and value > 0 for value in values))

    def test_alpha_out_of_range(self):
        for alpha in (0.0, 2.0, -1.0, 3.0):
            with self.assertRaises(InvalidArgument):
                riesz_constant(alpha)


class AngularKernelTestCase(SimpleTestCase):
    def test_matches_direct_quadrature(self):
        for alpha in (0.5, 1.0, 1.5):
            for r, s in ((1.0, 0.5), (0.3, 2.0), (1.0, 0.9)):
                expected, _error = quad(
                    lambda theta: (r * r + s * s - 2 * r * s * math.cos(theta))
                    ** ((alpha - 2) / 2),
                    0,
                    2 * math.pi,
                    limit=200,
                )
                self.assertAlmostEqual(
                    float(angular_kernel(alpha, r, s)) / expected, 1.0, places=6
                )

    def test_symmetric(self):
        self.assertEqual(
            float(angular_kernel(0.7, 0.4, 1.3)), float(angular_kernel(0.7, 1.3, 0.4))
        )

    def test_finite_as_the_radii_meet(self):
        for alpha in (0.5, 1.0, 1.5):
            gaps = np.array([1e-6, 1e-12, 1e-18])
            values = angular_kernel(alpha, 1.0, 1.0 - gaps, gaps)

            self.assertTrue(np.all(np.isfinite(values)), alpha)
            if alpha <= 1:
                self.assertTrue(np.all(np.diff(values) > 0), alpha)

    def test_limit_on_the_diagonal(self):
        expected, _error = quad(
            lambda theta: (2 - 2 * math.cos(theta)) ** -0.25, 0, 2 * math.pi
        )

        self.assertAlmostEqual(
            float(angular_kernel(1.5, 1.0, 1.0)) / expected, 1.0, places=6
        )

    def test_continuous_across_the_expansion_switch(self):
        for alpha in (0.5, 1.5):
            values = [
                float(angular_kernel(alpha, 1.0, math.sqrt(1.0 - complement)))
                for complement in (0.5 - 1e-9, 0.5 + 1e-9)
            ]
            self.assertAlmostEqual(values[0] / values[1], 1.0, delta=1e-7)

class KernelMatrixTestCase(SimpleTestCase):
    @classmethod
    def setUpClass(cls) -> None:
        super().setUpClass()
        cls.grid, cls.kernel = kernel_for(256, 10.0)

    def test_entries_nonnegative(self):
        self.assertTrue(np.all(self.kernel.matrix >= 0))

    def test_weighted_symmetry(self):
        self.assertLess(self.kernel.weighted_asymmetry(), 1e-12)

    def test_wrong_shape(self):
        with self.assertRaises(InvalidArgument):
            RieszKernelMatrix(alpha=1.0, grid=self.grid, matrix=np.zeros((3, 3)))

    def test_non_finite_entries(self):
        matrix = np.array(self.kernel.matrix)
        matrix[7, 7] = np.inf

        with self.assertRaises(InvalidArgument):
            RieszKernelMatrix(alpha=1.0, grid=self.grid, matrix=matrix)

    def test_finite_on_fine_grids(self):
        for alpha in (0.5, 1.0, 1.5):
            for n, r_max, scheme in (
                (512, 12.0, UNIFORM_MIDPOINT),
                (1024, 1.0, GRADED),
            ):
                with self.subTest(alpha=alpha, n=n, scheme=scheme):
                    _grid, kernel = kernel_for(n, r_max, alpha, scheme)
                    self.assertTrue(np.all(np.isfinite(kernel.matrix)))
                    self.assertTrue(np.all(np.diag(kernel.matrix) > 0))

    def test_matches_the_oracle_for_smooth_fields(self):
        for alpha in (0.5, 1.0, 1.5):
            grid, kernel = kernel_for(512, 4.0, alpha)
            index = np.arange(0, np.searchsorted(grid.nodes, 3.0), 48)
            for name, g in oracle_fields(grid).items():
                with self.subTest(alpha=alpha, field=name):
                    computed = convolve(kernel, g).values[index]
                    expected = np.array(
                        brute_force_oracle(g, alpha, grid.nodes[index])
                    )
                    error = np.max(np.abs(computed - expected)) / np.max(expected)
                    self.assertLess(error, 1e-3)

    def test_potential_of_the_unit_disk_at_the_origin(self):
        for alpha in (0.5, 1.0, 1.5):
            grid, kernel = kernel_for(256, 2.0, alpha)
            disk = grid.sample(lambda r: (r < 1).astype(float))
            expected = riesz_constant(alpha) * 2 * math.pi / alpha

            self.assertAlmostEqual(
                convolve(kernel, disk).values[0] / expected, 1.0, delta=1e-3
            )

    def test_convolve_is_linear_and_positive(self):
        grid, kernel = self.grid, self.kernel

        np.testing.assert_array_equal(convolve(kernel, grid.zeros()).values, 0.0)
        g = bump(grid)
        self.assertTrue(np.all(convolve(kernel, g).values >= 0))
        np.testing.assert_allclose(
            convolve(kernel, g.scaled(3.0)).values,
            3.0 * convolve(kernel, g).values,
            rtol=1e-14,
        )

    def test_self_adjoint(self):
        grid, kernel = self.grid, self.kernel
        rng = np.random.default_rng(20240605)
        g = grid.field(rng.random(grid.size))
        h = grid.field(rng.random(grid.size))

        left = inner(grid, convolve(kernel, g), h)
        right = inner(grid, g, convolve(kernel, h))
        self.assertAlmostEqual(left / right, 1.0, delta=1e-8)

    def test_foreign_field(self):
        with self.assertRaises(InvalidArgument):
            convolve(self.kernel, make_grid(16, 1.0).zeros())

    def test_matches_brute_force_oracle(self):
        grid, kernel = self.grid, self.kernel
        g = grid.sample(lambda r: np.exp(-r * r))
        index = np.arange(0, 80, 10)

        computed = convolve(kernel, g).values[index]
        expected = np.array(brute_force_oracle(g, 1.0, grid.nodes[index]))
        error = np.max(np.abs(computed - expected)) / np.max(np.abs(expected))
        self.assertLess(error, 1e-3)

    def test_graded_grid(self):
        grid = make_grid(192, 4.0, GRADED)
        kernel = assemble_kernel(grid, 0.5, use_cache=False)
        g = grid.sample(lambda r: np.exp(-r * r))
        index = np.arange(20, 150, 26)

        computed = convolve(kernel, g).values[index]
        expected = np.array(brute_force_oracle(g, 0.5, grid.nodes[index]))
        error = np.max(np.abs(computed - expected)) / np.max(np.abs(expected))
        self.assertLess(error, 1e-3)

    def test_hls_ratio_is_stable_under_refinement(self):
        ratios = []
        for n in (128, 256):
            grid, kernel = kernel_for(n, 10.0)
            g = grid.sample(lambda r: np.exp(-r * r))
            ratios.append(hls_ratio(kernel, g, g))

        self.assertGreater(ratios[0], 0)
        self.assertAlmostEqual(ratios[0] / ratios[1], 1.0, delta=1e-2)


class BruteForceOracleTestCase(SimpleTestCase):
    @classmethod
    def setUpClass(cls) -> None:
        super().setUpClass()
        cls.grid = make_grid(256, 10.0)

    def test_zero_field(self):
        zeros = brute_force_oracle(self.grid.zeros(), 1.0, [0.5, 1.0])
        self.assertEqual(zeros, [0.0, 0.0])

    def test_converges_in_resolution(self):
        g = self.grid.sample(lambda r: np.exp(-r * r))
        radii = [0.3, 1.0, 2.0]
        coarse = np.array(brute_force_oracle(g, 1.0, radii, points=128, epsilon=1e-6))
        fine = np.array(brute_force_oracle(g, 1.0, radii, points=256, epsilon=5e-7))

        np.testing.assert_allclose(fine, coarse, rtol=1e-4)

    def test_scaling_law(self):
        alpha = 1.0
        g = self.grid.sample(lambda r: np.exp(-r * r))
        for factor in (0.5, 2.0):
            stretched = self.grid.sample(lambda r: np.exp(-((factor * r) ** 2)))
            for radius in (0.4, 1.2):
                left = brute_force_oracle(stretched, alpha, [radius])[0]
                right = factor ** (-alpha) * brute_force_oracle(
                    g, alpha, [factor * radius]
                )[0]
                self.assertAlmostEqual(left / right, 1.0, delta=1e-3)


class KernelCacheTestCase(SimpleTestCase):
    def test_cache_round_trip(self):
        grid = make_grid(24, 2.0)
        with tempfile.TemporaryDirectory() as cache:
            with override_settings(CHOQUARD={"KERNEL_CACHE": cache}):
                first = assemble_kernel(grid, 1.0)
                path = io.kernel_cache_path(cache, grid, 1.0)
                self.assertTrue(path.exists())

                second = assemble_kernel(grid, 1.0)
                np.testing.assert_array_equal(first.matrix, second.matrix)

    def test_foreign_cache_file_is_ignored(self):
        grid = make_grid(24, 2.0)
        with tempfile.TemporaryDirectory() as cache:
            path = io.kernel_cache_path(cache, grid, 1.0)
            path.write_bytes(b"not a kernel")
            self.assertIsNone(io.load_kernel_matrix(cache, grid, 1.0))

            other = make_grid(25, 2.0)
            io.store_kernel_matrix(cache, other, 1.0, np.ones((25, 25)))
            payload = io.kernel_cache_path(cache, other, 1.0).read_bytes()
            self.assertEqual(payload[:8], io.KERNEL_MAGIC)
            self.assertEqual(len(payload), 16 + 8 * 25 * 25)

            path.write_bytes(payload[:16] + bytes(8 * 24 * 24))
            self.assertIsNone(io.load_kernel_matrix(cache, grid, 1.0))

    def test_non_finite_cache_file_is_ignored(self):
        grid = make_grid(24, 2.0)
        with tempfile.TemporaryDirectory() as cache:
            matrix = np.ones((24, 24))
            matrix[3, 3] = np.inf
            io.store_kernel_matrix(cache, grid, 0.5, matrix)

            self.assertIsNone(io.load_kernel_matrix(cache, grid, 0.5))
            with override_settings(CHOQUARD={"KERNEL_CACHE": cache}):
                kernel = assemble_kernel(grid, 0.5)
            self.assertTrue(np.all(np.isfinite(kernel.matrix)))
