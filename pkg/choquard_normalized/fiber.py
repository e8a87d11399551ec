"""
The mass preserving scaling H(u, s) = e^s u(e^s .) and the energy along it.

J(H(u, s)) and P(H(u, s)) have closed forms in terms of the amplitude scaled
field e^s u on the original grid, so the fibered functional and the Pohozaev
projection never interpolate. `scale_field` is the only place where a field
is actually moved in space.
"""
# Standard libraries
from dataclasses import dataclass
import math
from typing import Optional

# Django
from django.utils.translation import gettext as _

# Third party
import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

# choquard-normalized
from choquard_normalized.conf import choquard_settings
from choquard_normalized.energy import check_compatible, nonlocal_terms, pairing
from choquard_normalized.exceptions import (
    EnergyOverflow,
    InvalidArgument,
    MonotonicityViolation,
    ProjectionFailed,
)
from choquard_normalized.grid import grad_norm_sq

LINEAR = "linear"
CUBIC = "cubic"

BRACKET_LIMIT = 20.0


def _amplitude_terms(grid, kernel, model, u, s):
    """Nonlocal and coupling integrals of the amplitude scaled field e^s u."""
    values = math.exp(s) * u.values
    f_values, F_values, potential = nonlocal_terms(kernel, model, values)
    with np.errstate(over="ignore", invalid="ignore"):
        weighted = grid.weights * potential
        forces = f_values * values
    return (
        pairing(model, values, weighted, F_values),
        pairing(model, values, weighted, forces),
    )


def jtilde(grid, kernel, model, u, s):
    check_compatible(grid, kernel, model, u)
    gradient_sq = grad_norm_sq(grid, u)
    nonlocal_, _coupling = _amplitude_terms(grid, kernel, model, u, s)
    return (
        math.exp(2 * s) / 2 * gradient_sq
        - math.exp(-(2 + model.alpha) * s) / 2 * nonlocal_
    )


def pohozaev_scaled(grid, kernel, model, u, s):
    """P(H(u, s)), the derivative of jtilde in s."""
    check_compatible(grid, kernel, model, u)
    gradient_sq = grad_norm_sq(grid, u)
    nonlocal_, coupling = _amplitude_terms(grid, kernel, model, u, s)
    scale = math.exp(-(2 + model.alpha) * s)
    return (
        math.exp(2 * s) * gradient_sq
        + (2 + model.alpha) / 2 * (scale * nonlocal_)
        - scale * coupling
    )


def _relative_pohozaev(grid, kernel, model, u, gradient_sq):
    """
    s -> P(H(u, s)) / (e^{2s} ||grad u||^2), strictly decreasing under (f6).
    Amplitudes past the overflow threshold count as negative.
    """

    def relative(s):
        try:
            value = pohozaev_scaled(grid, kernel, model, u, s)
        except EnergyOverflow:
            return -1.0
        return value / (math.exp(2 * s) * gradient_sq)

    return relative


def _sign_changes(values):
    signs = np.sign(values)
    signs = signs[signs != 0]
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def project_pohozaev(grid, kernel, model, u, s_bracket=(-1.0, 1.0), tol=None):
    check_compatible(grid, kernel, model, u)
    tol = choquard_settings.PROJECTION_TOL if tol is None else tol
    low, high = s_bracket
    if not low < high:
        raise InvalidArgument(_("The bracket must satisfy low < high."))

    gradient_sq = grad_norm_sq(grid, u)
    if gradient_sq == 0 or not np.any(u.values > 0):
        raise ProjectionFailed(
            _("The field is degenerate: its Pohozaev fiber has no root.")
        )

    relative = _relative_pohozaev(grid, kernel, model, u, gradient_sq)

    while not (relative(low) > 0 > relative(high)):
        if low <= -BRACKET_LIMIT and high >= BRACKET_LIMIT:
            raise ProjectionFailed(
                _("No sign change of P(H(u, s)) for s in [{}, {}].").format(
                    -BRACKET_LIMIT, BRACKET_LIMIT
                )
            )
        centre, width = (low + high) / 2, high - low
        low = max(centre - width, -BRACKET_LIMIT)
        high = min(centre + width, BRACKET_LIMIT)

    scan = np.linspace(low, high, choquard_settings.PROJECTION_SCAN_POINTS)
    values = np.array([relative(s) for s in scan])
    if _sign_changes(values) > 1:
        raise MonotonicityViolation(
            _("P(H(u, s)) changes sign more than once on [{}, {}].").format(low, high)
        )

    index = int(np.flatnonzero(values > 0)[-1])
    s_star = brentq(relative, scan[index], scan[index + 1], xtol=1e-14, rtol=1e-14)

    if abs(relative(s_star)) >= tol:
        raise ProjectionFailed(
            _("Bisection stalled at s={} with relative P(H(u, s))={}.").format(
                s_star, relative(s_star)
            )
        )
    return s_star


def scale_field(grid, u, s, interpolation=LINEAR):
    """
    H(u, s)(r_i) = e^s u(e^s r_i), interpolated on the source grid, flat
    between the last node and r_max and zero beyond r_max.
    """
    grid.check(u)
    if s == 0:
        return u

    radii = math.exp(s) * grid.nodes
    inside = np.minimum(radii, grid.nodes[-1])

    if interpolation == LINEAR:
        values = np.interp(inside, grid.nodes, u.values)
    elif interpolation == CUBIC:
        spline = CubicSpline(
            np.concatenate((-grid.nodes[::-1], grid.nodes)),
            np.concatenate((u.values[::-1], u.values)),
        )
        values = spline(inside)
    else:
        raise InvalidArgument(
            _("Unknown interpolation {!r}, expected {!r} or {!r}.").format(
                interpolation, LINEAR, CUBIC
            )
        )

    values = np.where(radii <= grid.r_max, values, 0.0)
    return u.with_values(math.exp(s) * values)


@dataclass(frozen=True)
class FiberScan:
    s_values: np.ndarray
    jtilde_values: np.ndarray
    pohozaev_values: np.ndarray
    root: Optional[float] = None

    @property
    def sign_changes(self):
        finite = np.isfinite(self.pohozaev_values)
        values = np.where(finite, self.pohozaev_values, -1.0)
        return _sign_changes(values)

    def rows(self):
        return np.column_stack(
            (self.s_values, self.jtilde_values, self.pohozaev_values)
        )


def fiber_scan(grid, kernel, model, u, s_values):
    s_values = np.asarray(s_values, dtype=float)
    if s_values.ndim != 1 or np.any(np.diff(s_values) <= 0):
        raise InvalidArgument(_("Scan points must be strictly increasing."))

    jtilde_values = np.empty_like(s_values)
    pohozaev_values = np.empty_like(s_values)
    for index, s in enumerate(s_values):
        try:
            jtilde_values[index] = jtilde(grid, kernel, model, u, s)
            pohozaev_values[index] = pohozaev_scaled(grid, kernel, model, u, s)
        except EnergyOverflow:
            jtilde_values[index] = -np.inf
            pohozaev_values[index] = -np.inf

    scan = FiberScan(s_values, jtilde_values, pohozaev_values)
    if scan.sign_changes != 1:
        return scan

    positive = np.flatnonzero(pohozaev_values > 0)
    bracket = (s_values[positive[-1]], s_values[positive[-1] + 1])
    root = project_pohozaev(grid, kernel, model, u, s_bracket=bracket)
    return FiberScan(s_values, jtilde_values, pohozaev_values, root=root)


def fiber_max(grid, kernel, model, u):
    """E(u) = max_s jtilde(u, s) and the maximizing s."""
    s_star = project_pohozaev(grid, kernel, model, u)
    return jtilde(grid, kernel, model, u, s_star), s_star
