# Standard libraries
from dataclasses import dataclass
import math

# Django
from django.utils.translation import gettext as _

# Third party
import numpy as np

# choquard-normalized
from choquard_normalized.exceptions import EnergyOverflow, InvalidArgument
from choquard_normalized.grid import grad_norm_sq, laplacian, lp_norm
from choquard_normalized.nonlin import field_terms


@dataclass(frozen=True)
class EnergyBreakdown:
    """
    The terms of J(u) = 1/2 ||grad u||^2 - 1/2 int (I_alpha * F(u)) F(u).

    `nonlocal_` is the second half of J; `coupling` is int (I_alpha * F(u)) f(u) u
    and `pohozaev` = 2 kinetic + (2+alpha) nonlocal - coupling.
    """

    kinetic: float
    nonlocal_: float
    J: float
    pohozaev: float
    coupling: float
    lambda_est: float
    mass: float

    @property
    def gradient_sq(self):
        return 2.0 * self.kinetic


def check_compatible(grid, kernel, model, u=None):
    if not kernel.grid.matches(grid):
        raise InvalidArgument(_("The kernel was assembled on another grid."))
    if kernel.alpha != model.alpha:
        raise InvalidArgument(
            _("Kernel alpha {} differs from model alpha {}.").format(
                kernel.alpha, model.alpha
            )
        )
    if u is not None:
        grid.check(u)


def _overflow(model, values):
    peak = float(np.max(np.abs(values)))
    log_magnitude = model.log_f(peak)
    raise EnergyOverflow(
        _("The nonlocal integrals overflow at amplitude {:g} (log f = {:g}).").format(
            peak, log_magnitude
        ),
        log_magnitude=log_magnitude,
    )


def nonlocal_terms(kernel, model, values):
    """f(v), F(v) and the potential I_alpha * F(v) for nodal values v."""
    f_values, F_values = field_terms(model, values)
    with np.errstate(over="ignore", invalid="ignore"):
        potential = kernel.matrix @ F_values
    if not np.all(np.isfinite(potential)):
        _overflow(model, values)
    return f_values, F_values, potential


def pairing(model, values, weighted, other):
    """
    sum(weighted * other) for a field with nodal values `values`. Sums past
    the floating point range raise EnergyOverflow.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        result = float(np.dot(weighted, other))
    if not math.isfinite(result):
        _overflow(model, values)
    return result


def evaluate_energy(grid, kernel, model, u, a):
    if not a > 0:
        raise InvalidArgument(_("The mass must be positive, got {}.").format(a))
    check_compatible(grid, kernel, model, u)

    gradient_sq = grad_norm_sq(grid, u)
    f_values, F_values, potential = nonlocal_terms(kernel, model, u.values)
    with np.errstate(over="ignore", invalid="ignore"):
        weighted = grid.weights * potential
        forces = f_values * u.values

    nonlocal_ = 0.5 * pairing(model, u.values, weighted, F_values)
    coupling = pairing(model, u.values, weighted, forces)
    kinetic = 0.5 * gradient_sq

    return EnergyBreakdown(
        kinetic=kinetic,
        nonlocal_=nonlocal_,
        J=kinetic - nonlocal_,
        pohozaev=gradient_sq + (2 + model.alpha) * nonlocal_ - coupling,
        coupling=coupling,
        lambda_est=(1 + model.alpha / 2) * 2 * nonlocal_ / a**2,
        mass=lp_norm(grid, u, 2),
    )


def first_variation(grid, kernel, model, u):
    """J'(u) = -Laplacian(u) - (I_alpha * F(u)) f(u), nodewise."""
    check_compatible(grid, kernel, model, u)
    f_values, _F_values, potential = nonlocal_terms(kernel, model, u.values)
    return -laplacian(grid, u).values - potential * f_values


def el_residual(grid, kernel, model, u, lambda_):
    if not math.isfinite(lambda_):
        raise InvalidArgument(_("lambda must be finite, got {}.").format(lambda_))
    check_compatible(grid, kernel, model, u)

    linear = -laplacian(grid, u).values + lambda_ * u.values
    f_values, _F_values, potential = nonlocal_terms(kernel, model, u.values)
    residual = linear - potential * f_values

    scale = math.sqrt(float(np.dot(grid.weights, linear * linear)))
    norm = math.sqrt(float(np.dot(grid.weights, residual * residual)))
    return u.with_values(residual), (norm / scale if scale > 0 else 0.0)


def tangential_gradient(grid, kernel, model, u, a):
    """
    J'(u) + lambda(u) u with lambda(u) = -<J'(u), u> / a^2, the gradient of J
    along the sphere ||u|| = a, together with lambda(u).
    """
    if not a > 0:
        raise InvalidArgument(_("The mass must be positive, got {}.").format(a))

    variation = first_variation(grid, kernel, model, u)
    lambda_ = -float(np.dot(grid.weights, variation * u.values)) / a**2
    return u.with_values(variation + lambda_ * u.values), lambda_
