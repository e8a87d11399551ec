# Standard libraries
from dataclasses import dataclass
import logging
import math
from typing import NamedTuple, Optional

# Django
from django.utils.translation import gettext as _

# Third party
import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import minimize_scalar

# choquard-normalized
from choquard_normalized.conf import choquard_settings
from choquard_normalized.energy import (
    check_compatible,
    el_residual,
    evaluate_energy,
    tangential_gradient,
)
from choquard_normalized.exceptions import EnergyOverflow, InvalidArgument, InvalidState
from choquard_normalized.fiber import CUBIC, project_pohozaev, scale_field
from choquard_normalized.grid import positive_part, rescale_mass, stiffness_bands
from choquard_normalized.moser import mp_upper_bound

logger = logging.getLogger(__name__)

GAUSSIAN = "gaussian"
TENT = "tent"
PROFILES = (GAUSSIAN, TENT)

H1 = "h1"
L2 = "l2"
METRICS = (H1, L2)

CONVERGED = "converged"
TRIVIAL_BRANCH = "trivial-branch"
MAX_ITER = "max-iter"
STALLED = "line-search-stalled"
POHOZAEV_DEFECT = "pohozaev-defect"

PASS = "pass"
FAIL = "fail"
SKIPPED = "skipped"

MIN_STEP = 1e-14
STEP_GROWTH_CAP = 64.0
PRECONDITIONER_FLOOR = 1e-2
FIBER_WINDOW = 0.05
FIBER_XATOL = 1e-12
FIBER_EXPANSIONS = 4


@dataclass(frozen=True)
class SolverConfig:
    a: float = 1.0
    step: float = 0.5
    tol_grad: float = 1e-5
    tol_pohozaev: float = 1e-4
    max_iter: int = 5000
    profile: str = GAUSSIAN
    armijo_factor: float = 0.5
    armijo_constant: float = 1e-4
    metric: str = L2
    log_every: int = 100

    def __post_init__(self):
        if not self.a > 0:
            raise InvalidArgument(
                _("The mass must be positive, got {}.").format(self.a)
            )
        if not self.step > 0:
            raise InvalidArgument(_("step must be positive."))
        if not (self.tol_grad > 0 and self.tol_pohozaev > 0):
            raise InvalidArgument(_("Tolerances must be positive."))
        if self.max_iter < 1:
            raise InvalidArgument(_("max_iter must be at least 1."))
        if not 0 < self.armijo_factor < 1 or not 0 < self.armijo_constant < 1:
            raise InvalidArgument(_("Armijo parameters must lie in (0,1)."))
        if self.profile not in PROFILES:
            raise InvalidArgument(
                _("Unknown profile {!r}, expected one of {}.").format(
                    self.profile, ", ".join(PROFILES)
                )
            )
        if self.metric not in METRICS:
            raise InvalidArgument(
                _("Unknown metric {!r}, expected one of {}.").format(
                    self.metric, ", ".join(METRICS)
                )
            )


class HistoryEntry(NamedTuple):
    J: float
    pohozaev: float
    gradient: float


@dataclass(frozen=True)
class SolveResult:
    field: object
    lambda_: float
    lambda_multiplier: float
    energy: object
    iterations: int
    converged: bool
    history: tuple
    diagnostic: str = CONVERGED
    residual: Optional[float] = None


def initial_guess(grid, a, profile=GAUSSIAN):
    if profile == GAUSSIAN:
        guess = grid.sample(lambda r: np.exp(-r * r))
    elif profile == TENT:
        guess = grid.sample(lambda r: np.maximum(1.0 - r / grid.r_max, 0.0))
    else:
        raise InvalidArgument(_("Unknown profile {!r}.").format(profile))
    return rescale_mass(guess, a)


class _Reducer:
    """
    Evaluates E(u) = max_s J(H(u, s)) on the mass sphere.

    The closed-form Pohozaev projection s* seeds a maximization of the
    discrete J along the interpolated fiber t -> H(u, t) of u itself. A
    field that already maximizes J along its fiber comes back unchanged, so
    the Armijo test compares energies of one and the same functional.
    """

    def __init__(self, grid, kernel, model, a):
        self.grid = grid
        self.kernel = kernel
        self.model = model
        self.a = a

    def fiber_point(self, u, s):
        moved = positive_part(scale_field(self.grid, u, s, interpolation=CUBIC))
        return rescale_mass(moved, self.a)

    def energy(self, v):
        return evaluate_energy(self.grid, self.kernel, self.model, v, self.a)

    def __call__(self, u):
        s_star = project_pohozaev(self.grid, self.kernel, self.model, u)

        def negative_energy(t):
            try:
                return -self.energy(self.fiber_point(u, t)).J
            except EnergyOverflow:
                return math.inf

        window = FIBER_WINDOW
        for _attempt in range(FIBER_EXPANSIONS):
            best = minimize_scalar(
                negative_energy,
                bounds=(s_star - window, s_star + window),
                method="bounded",
                options={"xatol": FIBER_XATOL},
            )
            if abs(best.x - s_star) < 0.99 * window:
                break
            window *= 4

        v = self.fiber_point(u, best.x)
        return v, self.energy(v)


class _Preconditioner:
    """
    (-Laplacian + c)^-1 g = (L + c W)^-1 W g, L the stiffness matrix of
    grad_norm_sq and W the quadrature weights.
    """

    def __init__(self, grid, metric):
        self.grid = grid
        self.metric = metric
        self.diagonal, self.off_diagonal = stiffness_bands(grid)

    def __call__(self, gradient, shift):
        if self.metric == L2:
            return gradient

        bands = np.zeros((3, self.grid.size))
        bands[0, 1:] = self.off_diagonal
        bands[1] = self.diagonal + max(shift, PRECONDITIONER_FLOOR) * self.grid.weights
        bands[2, :-1] = self.off_diagonal
        return solve_banded((1, 1), bands, self.grid.weights * gradient)


def _relative_pohozaev(energy):
    gradient_sq = energy.gradient_sq
    return abs(energy.pohozaev) / gradient_sq if gradient_sq > 0 else math.inf


def minimize_reduced(config, grid, kernel, model):
    check_compatible(grid, kernel, model)
    a = config.a
    reduce = _Reducer(grid, kernel, model, a)
    precondition = _Preconditioner(grid, config.metric)
    weights = grid.weights

    v, energy = reduce(initial_guess(grid, a, config.profile))
    step = config.step
    history = []
    diagnostic = MAX_ITER
    iterations = 0

    while True:
        gradient, lambda_ = tangential_gradient(grid, kernel, model, v, a)
        _residual, relative_gradient = el_residual(grid, kernel, model, v, lambda_)
        history.append(
            HistoryEntry(energy.J, _relative_pohozaev(energy), relative_gradient)
        )

        if iterations % config.log_every == 0:
            logger.info(
                "iteration %d: J=%.12g |P|/G=%.3e gradient=%.3e step=%.3e",
                iterations,
                energy.J,
                history[-1].pohozaev,
                relative_gradient,
                step,
            )

        if relative_gradient < config.tol_grad:
            diagnostic = CONVERGED
            break
        if iterations >= config.max_iter:
            break

        g = gradient.values
        direction = -precondition(g, lambda_)
        direction -= float(np.dot(weights, direction * v.values)) / a**2 * v.values
        slope = float(np.dot(weights, g * direction))

        tau = step
        while tau >= MIN_STEP:
            moved = positive_part(v.with_values(v.values + tau * direction))
            trial, trial_energy = reduce(rescale_mass(moved, a))
            if trial_energy.J <= energy.J + config.armijo_constant * tau * slope:
                break
            tau *= config.armijo_factor
        else:
            diagnostic = STALLED
            break

        v, energy = trial, trial_energy
        step = min(tau / config.armijo_factor, STEP_GROWTH_CAP * config.step)
        iterations += 1

    _gradient, lambda_multiplier = tangential_gradient(grid, kernel, model, v, a)
    converged = diagnostic == CONVERGED
    if converged and energy.J <= 0:
        converged, diagnostic = False, TRIVIAL_BRANCH
    elif converged and _relative_pohozaev(energy) >= config.tol_pohozaev:
        converged, diagnostic = False, POHOZAEV_DEFECT

    logger.info(
        "Solver stopped after %d iterations (%s): J=%.12g lambda=%.12g",
        iterations,
        diagnostic,
        energy.J,
        energy.lambda_est,
    )
    return SolveResult(
        field=v,
        lambda_=energy.lambda_est,
        lambda_multiplier=lambda_multiplier,
        energy=energy,
        iterations=iterations,
        converged=converged,
        history=tuple(history),
        diagnostic=diagnostic,
        residual=history[-1].gradient,
    )


@dataclass(frozen=True)
class VerificationCheck:
    name: str
    status: str
    value: Optional[float] = None
    bound: Optional[float] = None
    detail: str = ""

    @property
    def passed(self):
        return self.status != FAIL


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple

    @property
    def passed(self):
        return all(check.passed for check in self.checks)

    @property
    def failed(self):
        return [check.name for check in self.checks if not check.passed]

    def __getitem__(self, name):
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)


def _status(ok):
    return PASS if ok else FAIL


def lambda_upper_bound(alpha, gamma0, a, mu):
    return (2 + alpha) ** 2 * math.pi / (2 * gamma0 * a**2 * (mu - 2 - alpha / 2))


def verify_solution(result, grid, kernel, model, config):
    if not result.converged:
        raise InvalidState(
            _("Only converged results can be verified ({}).").format(result.diagnostic)
        )
    check_compatible(grid, kernel, model, result.field)

    u = result.field
    a = config.a
    energy = evaluate_energy(grid, kernel, model, u, a)
    gradient_sq = energy.gradient_sq
    mu = model.mu
    alpha = model.alpha
    checks = []

    relative = _relative_pohozaev(energy)
    checks.append(
        VerificationCheck(
            "pohozaev",
            _status(relative < config.tol_pohozaev),
            value=relative,
            bound=config.tol_pohozaev,
            detail=_("|P(u)| / ||grad u||^2"),
        )
    )

    _field, residual = el_residual(grid, kernel, model, u, result.lambda_multiplier)
    checks.append(
        VerificationCheck(
            "residual",
            _status(residual < choquard_settings.RESIDUAL_TOL),
            value=residual,
            bound=choquard_settings.RESIDUAL_TOL,
            detail=_("Relative Euler-Lagrange residual with the multiplier lambda."),
        )
    )

    if model.exponential:
        upper = lambda_upper_bound(alpha, model.gamma0, a, mu)
        checks.append(
            VerificationCheck(
                "lambda",
                _status(0 < result.lambda_ < upper),
                value=result.lambda_,
                bound=upper,
                detail=_(
                    "0 < lambda < (2+alpha)^2 pi / (2 gamma0 a^2 (mu-2-alpha/2))."
                ),
            )
        )
    else:
        checks.append(
            VerificationCheck(
                "lambda",
                SKIPPED,
                value=result.lambda_,
                detail=_("The bound needs gamma0."),
            )
        )

    gradient_bound = (
        2 * energy.J * (mu - (2 + alpha) / 2) / (mu - (2 + alpha / 2))
    ) * (1 + choquard_settings.GRADIENT_BOUND_TOL)
    checks.append(
        VerificationCheck(
            "gradient",
            _status(gradient_sq <= gradient_bound),
            value=gradient_sq,
            bound=gradient_bound,
            detail=_("||grad u||^2 <= 2 J (mu-(2+alpha)/2) / (mu-(2+alpha/2))."),
        )
    )

    interior = u.values[:-1]
    offending = np.flatnonzero(interior <= 0)
    if offending.size:
        node = int(offending[0])
        checks.append(
            VerificationCheck(
                "positivity",
                FAIL,
                value=float(grid.nodes[node]),
                detail=_("u <= 0 at node {} (r={}).").format(node, grid.nodes[node]),
            )
        )
    else:
        checks.append(
            VerificationCheck(
                "positivity",
                PASS,
                value=float(interior.min()),
                detail=_("u > 0 on interior nodes."),
            )
        )

    if model.exponential:
        level = mp_upper_bound(alpha, model.gamma0)
        checks.append(
            VerificationCheck(
                "level",
                _status(energy.J < level),
                value=energy.J,
                bound=level,
                detail=_("J(u) < (2+alpha) pi / (2 gamma0)."),
            )
        )
    else:
        checks.append(
            VerificationCheck(
                "level", SKIPPED, value=energy.J, detail=_("The bound needs gamma0.")
            )
        )

    return VerificationReport(checks=tuple(checks))
