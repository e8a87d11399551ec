# Standard libraries
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
import logging
import math
import time

# Django
from django.utils.translation import gettext as _

# Third party
import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline
from scipy.special import ellipkm1, gamma, hyp2f1

# choquard-normalized
from choquard_normalized import io
from choquard_normalized.conf import choquard_settings
from choquard_normalized.exceptions import InvalidArgument
from choquard_normalized.grid import RadialField, lp_norm

logger = logging.getLogger(__name__)

# Gauss-Legendre orders per block type of the cell-averaged matrix.
FAR_POINTS = 4
MID_POINTS = 6
SINGULAR_POINTS = 16
# Blocks whose cell indices differ by less than this use MID_POINTS.
FAR_OFFSET = 4
# Upper limit of the xi^k grading of the singular blocks.
MAX_GRADING_POWER = 12
# Below this distance from 1 the order alpha is treated as exactly 1.
UNIT_ORDER_TOLERANCE = 1e-8
# Complements w = 1 - (low/rho)^2 below this use the expansion around w = 0.
CONNECTION_THRESHOLD = 0.5


def check_alpha(alpha):
    if not 0 < alpha < 2:
        raise InvalidArgument(_("alpha must lie in (0,2), got {}.").format(alpha))


def riesz_constant(alpha):
    check_alpha(alpha)
    return float(gamma((2 - alpha) / 2) / (2**alpha * np.pi * gamma(alpha / 2)))




def _hypergeometric_near_one(alpha, complement):
    """
    2F1(nu, nu; 1; 1 - w) for small w, expanded around w = 0 so that w is
    never rebuilt from 1 - z. With delta = alpha - 1:

        Gamma(delta) / Gamma(alpha/2)^2 * 2F1(nu, nu; 1 - delta; w)
        + w^delta * Gamma(-delta) / Gamma(nu)^2 * 2F1(alpha/2, alpha/2; 1 + delta; w)
    """
    nu = (2 - alpha) / 2
    delta = alpha - 1
    half = alpha / 2
    regular = gamma(delta) / gamma(half) ** 2 * hyp2f1(nu, nu, 1 - delta, complement)
    singular = (
        complement**delta
        * gamma(-delta)
        / gamma(nu) ** 2
        * hyp2f1(half, half, 1 + delta, complement)
    )
    return regular + singular


def angular_kernel(alpha, r, s, gap=None):
    """
    Integral over theta in (0, 2*pi) of (r^2 + s^2 - 2rs cos(theta))^((alpha-2)/2).

    Expanding in Gegenbauer polynomials gives
    2*pi * rho^(alpha-2) * 2F1(nu, nu; 1; (m/rho)^2), with rho = max(r, s),
    m = min(r, s) and nu = (2-alpha)/2. At alpha == 1 the hypergeometric
    factor is 2K(m^2/rho^2)/pi.

    The factor is singular at r == s when alpha <= 1. Callers that know the
    offset |r - s| more accurately than the difference of the rounded radii
    pass it as ``gap``.
    """
    r, s = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(s, dtype=float))
    rho = np.maximum(r, s)
    gap = np.abs(r - s) if gap is None else np.broadcast_to(np.asarray(gap), r.shape)
    complement = np.clip(gap * (2 * rho - gap) / rho**2, 0.0, 1.0)

    if abs(alpha - 1) < UNIT_ORDER_TOLERANCE:
        return 4.0 * ellipkm1(complement) / rho

    nu = (2 - alpha) / 2
    near = complement < CONNECTION_THRESHOLD
    factor = np.empty_like(complement)
    factor[near] = _hypergeometric_near_one(alpha, complement[near])
    factor[~near] = hyp2f1(nu, nu, 1.0, 1.0 - complement[~near])
    return 2 * np.pi * rho ** (alpha - 2) * factor


@lru_cache(maxsize=None)
def _unit_rule(points):
    nodes, weights = leggauss(points)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def _grading_power(alpha):
    return min(MAX_GRADING_POWER, max(3, math.ceil(2.0 / alpha)))


@dataclass(frozen=True, eq=False)
class RieszKernelMatrix:
    """
    Cell-averaged Riesz potential on a radial grid: (I_alpha * g) averaged
    over cell i is approximately sum_j matrix[i, j] * g(r_j).
    """

    alpha: float
    grid: object
    matrix: np.ndarray

    def __post_init__(self):
        check_alpha(self.alpha)
        matrix = np.array(self.matrix, dtype=float)
        if matrix.shape != (self.grid.size, self.grid.size):
            raise InvalidArgument(_("The kernel matrix does not fit its grid."))
        if not np.all(np.isfinite(matrix)):
            raise InvalidArgument(_("The kernel matrix has non-finite entries."))
        matrix.flags.writeable = False
        object.__setattr__(self, "matrix", matrix)

    def weighted_asymmetry(self):
        weighted = self.grid.weights[:, None] * self.matrix
        scale = np.max(np.abs(weighted))
        return float(np.max(np.abs(weighted - weighted.T)) / scale)


class _CellPairIntegrals:
    """
    Entries M[i, j] of c * int_{cell i} int_{cell j} 2*pi*r * s * A(r, s) ds dr
    for j >= i. Singular blocks (j == i and j == i + 1) are integrated with
    Gauss-Legendre rules graded towards the singular diagonal or corner.
    """

    def __init__(self, grid, alpha):
        self.alpha = alpha
        self.edges = grid.edges
        self.widths = np.diff(grid.edges)
        self.size = grid.size
        self.constant = riesz_constant(alpha)
        self.power = _grading_power(alpha)

    def _integrand(self, r, s, gap=None):
        return 2 * np.pi * r * s * angular_kernel(self.alpha, r, s, gap)

    def _regular(self, i, columns, points):
        xi, omega = _unit_rule(points)
        r = self.edges[i] + self.widths[i] * xi
        wr = self.widths[i] * omega
        s = self.edges[columns, None] + self.widths[columns, None] * xi[None, :]
        ws = self.widths[columns, None] * omega[None, :]
        values = self._integrand(r[:, None, None], s[None, :, :])
        return np.einsum("a,abc,bc->b", wr, values, ws)

    def _adjacent(self, i):
        xi, omega = _unit_rule(SINGULAR_POINTS)
        k = self.power
        shared = self.edges[i + 1]
        graded = xi**k
        jacobian = k * xi ** (k - 1) * omega
        below = self.widths[i] * graded
        above = self.widths[i + 1] * graded
        r = shared - below
        s = shared + above
        wr = self.widths[i] * jacobian
        ws = self.widths[i + 1] * jacobian
        gap = below[:, None] + above[None, :]
        values = self._integrand(r[:, None], s[None, :], gap)
        return float(wr @ values @ ws)

    def _diagonal(self, i):
        xi, omega = _unit_rule(SINGULAR_POINTS)
        k = self.power
        lower = self.edges[i]
        graded = xi**k
        jacobian = k * xi ** (k - 1) * omega
        r = lower + self.widths[i] * graded
        wr = self.widths[i] * jacobian
        reach = self.widths[i] * graded
        gap = reach[:, None] * graded[None, :]
        s = r[:, None] - gap
        ws = reach[:, None] * jacobian[None, :]
        values = self._integrand(r[:, None], s, gap)
        # The integrand is symmetric in (r, s): twice the s < r triangle.
        return 2.0 * float(np.sum(wr[:, None] * values * ws))

    def row(self, i):
        values = np.zeros(self.size)
        values[i] = self._diagonal(i)
        if i + 1 < self.size:
            values[i + 1] = self._adjacent(i)

        mid = np.arange(i + 2, min(i + FAR_OFFSET, self.size))
        if mid.size:
            values[mid] = self._regular(i, mid, MID_POINTS)

        far = np.arange(i + FAR_OFFSET, self.size)
        if far.size:
            values[far] = self._regular(i, far, FAR_POINTS)

        return self.constant * values

    def rows(self, indices):
        return [self.row(i) for i in indices]


def _assemble_matrix(grid, alpha, workers):
    pairs = _CellPairIntegrals(grid, alpha)
    chunks = np.array_split(np.arange(grid.size), max(1, 4 * workers))
    upper = np.zeros((grid.size, grid.size))

    with ThreadPoolExecutor(max_workers=workers) as executor:
        for chunk, rows in zip(chunks, executor.map(pairs.rows, chunks)):
            for i, row in zip(chunk, rows):
                upper[i] = row

    symmetric = upper + np.triu(upper, 1).T
    return symmetric / grid.weights[:, None]


def assemble_kernel(grid, alpha, workers=None, use_cache=True):
    check_alpha(alpha)
    workers = workers or choquard_settings.KERNEL_WORKERS
    cache_dir = choquard_settings.kernel_cache_dir if use_cache else None

    if cache_dir:
        matrix = io.load_kernel_matrix(cache_dir, grid, alpha)
        if matrix is not None:
            logger.debug("Riesz kernel cache hit for N=%d alpha=%r", grid.size, alpha)
            return RieszKernelMatrix(alpha=alpha, grid=grid, matrix=matrix)

    started = time.perf_counter()
    matrix = _assemble_matrix(grid, alpha, workers)
    logger.info(
        "Assembled Riesz kernel N=%d alpha=%r in %.2fs",
        grid.size,
        alpha,
        time.perf_counter() - started,
    )

    if cache_dir:
        io.store_kernel_matrix(cache_dir, grid, alpha, matrix)

    return RieszKernelMatrix(alpha=alpha, grid=grid, matrix=matrix)


def convolve(kernel, g):
    kernel.grid.check(g)
    return RadialField(kernel.grid, kernel.matrix @ g.values)


def hls_ratio(kernel, g, h):
    """
    |int (I_alpha * g) h| / (||g||_p ||h||_p) with p = 4/(2+alpha), the
    quotient bounded by the Hardy-Littlewood-Sobolev inequality.
    """
    grid = kernel.grid
    exponent = 4.0 / (2.0 + kernel.alpha)
    pairing = abs(float(np.dot(grid.weights, convolve(kernel, g).values * h.values)))
    denominator = lp_norm(grid, g, exponent) * lp_norm(grid, h, exponent)
    if denominator == 0:
        return 0.0
    return pairing / denominator


def _radial_profile(g):
    """
    Even cubic spline through the samples of g, cut at the edge of its
    support (at most r_max).
    """
    grid = g.grid
    nonzero = np.flatnonzero(g.values)
    if not nonzero.size:
        return None, 0.0

    support = float(grid.edges[nonzero[-1] + 1])
    spline = CubicSpline(
        np.concatenate((-grid.nodes[::-1], grid.nodes)),
        np.concatenate((g.values[::-1], g.values)),
    )

    def profile(radius):
        return np.where(radius <= support, spline(np.minimum(radius, support)), 0.0)

    return profile, support


def brute_force_oracle(g, alpha, eval_radii, points=None, epsilon=None):
    """
    Direct 2D quadrature of c * int g(|y|) |x - y|^(alpha-2) dy at |x| = r in
    polar coordinates centred at x. The ball of radius epsilon around x is
    replaced by its analytic value c * g(r) * 2*pi * epsilon^alpha / alpha;
    outside it tau = rho^alpha removes the remaining singularity.
    """
    check_alpha(alpha)
    points = points or choquard_settings.ORACLE_POINTS
    epsilon = epsilon or choquard_settings.ORACLE_EPSILON

    profile, support = _radial_profile(g)
    if profile is None:
        return [0.0 for _radius in eval_radii]

    constant = riesz_constant(alpha)
    xi, omega = _unit_rule(points)
    phi = np.pi * xi
    phi_weights = 2 * np.pi * omega

    results = []
    for radius in eval_radii:
        radius = float(radius)
        reach = radius + support
        breaks = sorted(
            {epsilon, reach, *(b for b in (abs(support - radius),) if b > epsilon)}
        )
        total = 0.0
        for start, stop in zip(breaks[:-1], breaks[1:]):
            low, high = start**alpha, stop**alpha
            tau = low + (high - low) * xi
            rho = tau ** (1.0 / alpha)
            distance = np.sqrt(
                np.maximum(
                    radius**2
                    + rho[:, None] ** 2
                    + 2 * radius * rho[:, None] * np.cos(phi)[None, :],
                    0.0,
                )
            )
            ring = profile(distance) @ phi_weights
            total += (high - low) * float(omega @ ring) / alpha

        ball = float(profile(np.array(radius))) * 2 * np.pi * epsilon**alpha / alpha
        results.append(constant * (total + ball))

    return results
