# Standard libraries
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import logging
import math
from typing import Optional

# Django
from django.utils.translation import gettext as _

# Third party
import numpy as np

# choquard-normalized
from choquard_normalized.conf import choquard_settings
from choquard_normalized.energy import check_compatible, nonlocal_terms, pairing
from choquard_normalized.exceptions import (
    EnergyOverflow,
    InvalidArgument,
    ResolutionError,
    ScanOverflow,
)
from choquard_normalized.grid import grad_norm_sq, rescale_mass
from choquard_normalized.riesz import check_alpha

logger = logging.getLogger(__name__)

PLATEAU_NODES = 4
DEFAULT_SWEEP = tuple(2**k for k in range(2, 11))


def default_t_grid(points=400):
    return np.geomspace(0.01, 10.0, points)


def mp_upper_bound(alpha, gamma0):
    check_alpha(alpha)
    if not gamma0 > 0:
        raise InvalidArgument(_("gamma0 must be positive, got {}.").format(gamma0))
    return (2 + alpha) * math.pi / (2 * gamma0)


def moser_field(grid, n):
    """
    w_n(r) = (2 pi)^(-1/2) * sqrt(log n) on [0, 1/n],
    log(1/r) / sqrt(log n) on (1/n, 1) and 0 beyond.
    """
    if n < 2:
        raise InvalidArgument(
            _("The Moser index must be at least 2, got {}.").format(n)
        )
    if grid.r_max < 1:
        raise InvalidArgument(
            _("Moser fields need r_max >= 1, got {}.").format(grid.r_max)
        )

    plateau = 1.0 / n
    resolved = int(np.count_nonzero(grid.nodes <= plateau))
    if resolved < PLATEAU_NODES:
        raise ResolutionError(
            _(
                "Only {} nodes fall inside [0, 1/{}]; at least {} are needed. "
                "Use a finer or graded grid."
            ).format(resolved, n, PLATEAU_NODES)
        )

    log_n = math.log(n)
    r = grid.nodes
    values = np.where(
        r <= plateau,
        math.sqrt(log_n),
        np.where(r < 1.0, np.log(1.0 / r) / math.sqrt(log_n), 0.0),
    )
    return grid.field(values / math.sqrt(2 * math.pi))


def normalized_moser(grid, n, a):
    return rescale_mass(moser_field(grid, n), a)


@dataclass(frozen=True)
class MoserScanResult:
    n: int
    t_values: np.ndarray
    g_values: np.ndarray
    t_n: float
    g_max: float
    t_refined: float
    g_refined: float
    bound: float

    @property
    def margin(self):
        """Distance from the refined maximum to the mountain pass bound."""
        return self.bound - self.g_refined

    def rows(self):
        return np.column_stack((self.t_values, self.g_values))


def _parabolic_peak(x, y, index):
    """Vertex of the parabola through three consecutive samples."""
    if index == 0 or index == len(x) - 1:
        return x[index], y[index]
    if not (np.isfinite(y[index - 1]) and np.isfinite(y[index + 1])):
        return x[index], y[index]

    x0, x1, x2 = x[index - 1 : index + 2]
    y0, y1, y2 = y[index - 1 : index + 2]
    denominator = (x0 - x1) * (x0 - x2) * (x1 - x2)
    curvature = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denominator
    if curvature >= 0:
        return x[index], y[index]
    slope = (x2**2 * (y0 - y1) + x1**2 * (y2 - y0) + x0**2 * (y1 - y2)) / denominator
    offset = (
        x1 * x2 * (x1 - x2) * y0 + x2 * x0 * (x2 - x0) * y1 + x0 * x1 * (x0 - x1) * y2
    ) / denominator

    vertex = -slope / (2 * curvature)
    if not x0 <= vertex <= x2:
        return x[index], y[index]
    return vertex, curvature * vertex**2 + slope * vertex + offset


def g_value(grid, kernel, model, w, t, gradient_sq=None):
    """
    g_n(t) = t^2/2 ||grad w||^2 - t^-(2+alpha)/2 int (I_alpha * F(t w)) F(t w).
    """
    if gradient_sq is None:
        gradient_sq = grad_norm_sq(grid, w)
    values = t * w.values
    _f_values, F_values, potential = nonlocal_terms(kernel, model, values)
    with np.errstate(over="ignore", invalid="ignore"):
        weighted = grid.weights * potential
    nonlocal_ = pairing(model, values, weighted, F_values)
    return t * t / 2 * gradient_sq - t ** (-(2 + model.alpha)) / 2 * nonlocal_


def g_scan(grid, kernel, model, n, a, t_grid=None):
    if not model.exponential:
        raise InvalidArgument(_("Moser scans need a model with exponential growth."))
    check_compatible(grid, kernel, model)

    t_values = default_t_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    if t_values.ndim != 1 or np.any(t_values <= 0) or np.any(np.diff(t_values) <= 0):
        raise InvalidArgument(_("The t grid must be positive and strictly increasing."))

    w = normalized_moser(grid, n, a)
    gradient_sq = grad_norm_sq(grid, w)

    g_values = np.full(t_values.shape, -np.inf)
    for index, t in enumerate(t_values):
        try:
            g_values[index] = g_value(grid, kernel, model, w, t, gradient_sq)
        except EnergyOverflow:
            continue

    if not np.any(np.isfinite(g_values)):
        raise ScanOverflow(
            _("Every g_{} value overflows on t in [{}, {}].").format(
                n, t_values[0], t_values[-1]
            )
        )

    index = int(np.argmax(g_values))
    log_vertex, g_refined = _parabolic_peak(np.log(t_values), g_values, index)
    return MoserScanResult(
        n=n,
        t_values=t_values,
        g_values=g_values,
        t_n=float(t_values[index]),
        g_max=float(g_values[index]),
        t_refined=float(math.exp(log_vertex)),
        g_refined=float(max(g_refined, g_values[index])),
        bound=mp_upper_bound(model.alpha, model.gamma0),
    )


@dataclass(frozen=True)
class MoserSweep:
    scans: tuple
    witness: Optional[int] = None

    @property
    def best(self):
        return max(self.scans, key=lambda scan: scan.margin)


def moser_sweep(grid, kernel, model, ns=DEFAULT_SWEEP, a=1.0, t_grid=None):
    def scan(n):
        result = g_scan(grid, kernel, model, n, a, t_grid)
        logger.info(
            "Moser n=%d: max g=%.6f at t=%.4f, margin %.6f",
            n,
            result.g_refined,
            result.t_refined,
            result.margin,
        )
        return result

    with ThreadPoolExecutor(max_workers=choquard_settings.KERNEL_WORKERS) as executor:
        scans = tuple(executor.map(scan, ns))

    witness = next((result.n for result in scans if result.margin > 0), None)
    return MoserSweep(scans=scans, witness=witness)
