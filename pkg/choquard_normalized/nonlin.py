# Standard libraries
from dataclasses import dataclass, field
import math
from typing import NamedTuple, Optional

# Django
from django.utils.translation import gettext as _

# Third party
import numpy as np
from scipy.optimize import brentq

# choquard-normalized
from choquard_normalized.conf import choquard_settings
from choquard_normalized.exceptions import (
    EnergyOverflow,
    InvalidArgument,
    NoMatchingPoint,
)
from choquard_normalized.riesz import check_alpha

EXP_CRITICAL = "exp-critical"
POWER = "power"
HYBRID = "hybrid"
VARIANTS = (EXP_CRITICAL, POWER, HYBRID)

PASS = "pass"
FAIL = "fail"
NOT_APPLICABLE = "not-applicable"

MATCHING_BRACKET_LIMIT = 1e6
MATCHING_RTOL = 1e-12
MATCHING_SCAN_POINTS = 512


def _matching_gap(s, sigma, gamma0, beta0):
    """
    log(s^(sigma-1)) - log(beta0 (gamma0 s^2 - 1) e^(gamma0 s^2) / (gamma0 s^3)),
    positive just above 1/sqrt(gamma0) and negative for large s.
    """
    return (
        (sigma + 2) * math.log(s)
        - math.log(beta0 / gamma0)
        - math.log(gamma0 * s * s - 1.0)
        - gamma0 * s * s
    )


def _matching_root(sigma, gamma0, beta0):
    lower = 1.0 / math.sqrt(gamma0)
    upper = 10.0 * lower

    def gap(s):
        return _matching_gap(s, sigma, gamma0, beta0)

    while gap(upper) > 0:
        upper *= 2.0
        if upper > MATCHING_BRACKET_LIMIT:
            raise NoMatchingPoint(
                _(
                    "No matching point below {:g} for sigma={}, gamma0={}, beta0={}."
                ).format(MATCHING_BRACKET_LIMIT, sigma, gamma0, beta0)
            )

    # Sample from the top so that the largest sign change wins.
    samples = lower + (upper - lower) * np.geomspace(1e-9, 1.0, MATCHING_SCAN_POINTS)
    previous = upper
    for s in samples[::-1][1:]:
        if gap(s) > 0:
            return brentq(gap, s, previous, xtol=1e-300, rtol=MATCHING_RTOL)
        previous = s

    raise NoMatchingPoint(
        _(
            "The matching equation has no sign change for sigma={}, gamma0={}, "
            "beta0={}."
        ).format(sigma, gamma0, beta0)
    )


def solve_matching(sigma, gamma0, beta0, alpha):
    check_alpha(alpha)
    if not 2 + alpha < sigma < 6:
        raise InvalidArgument(
            _("sigma must lie in (2+alpha, 6) = ({}, 6), got {}.").format(
                2 + alpha, sigma
            )
        )
    if not (gamma0 > 0 and beta0 > 0):
        raise InvalidArgument(_("gamma0 and beta0 must be positive."))

    return _matching_root(sigma, gamma0, beta0)


def hybrid_threshold(p, q, gamma0):
    return math.sqrt(max(p + q, 0.0) / (2.0 * gamma0))


@dataclass(frozen=True)
class NonlinearityModel:
    """
    The nonlinearity f together with its primitive F.

    exp-critical:
        f(s) = s^(sigma-1) on (0, s0) and
        beta0 (gamma0 s^2 - 1) e^(gamma0 s^2) / (gamma0 s^3) beyond,
        s0 making f continuous.
    power:
        f(s) = s^(p-1), F(s) = s^p / p.
    hybrid:
        F(s) = s^p on (0, s0) and B e^(gamma0 s^2) / s^q beyond, B making f
        continuous.

    `strict=False` skips the parameter ranges so that broken models can be
    audited by `check_assumptions`.
    """

    variant: str
    alpha: float
    sigma: Optional[float] = None
    gamma0: Optional[float] = None
    beta0: Optional[float] = None
    s0: Optional[float] = None
    p: Optional[float] = None
    q: Optional[float] = None
    strict: bool = field(default=True, compare=False)

    def __post_init__(self):
        check_alpha(self.alpha)
        validate = getattr(self, "_validate_{}".format(self._suffix), None)
        if validate is None:
            raise InvalidArgument(
                _("Unknown nonlinearity variant {!r}, expected one of {}.").format(
                    self.variant, ", ".join(VARIANTS)
                )
            )
        validate()

    @classmethod
    def exp_critical(cls, alpha=1.0, sigma=4.0, gamma0=1.0, beta0=1.0, strict=True):
        return cls(
            EXP_CRITICAL,
            alpha=alpha,
            sigma=sigma,
            gamma0=gamma0,
            beta0=beta0,
            strict=strict,
        )

    @classmethod
    def power(cls, alpha=1.0, p=4.0, strict=True):
        return cls(POWER, alpha=alpha, p=p, strict=strict)

    @classmethod
    def hybrid(cls, alpha=1.0, p=4.0, q=2.0, gamma0=1.0, s0=None, strict=True):
        return cls(HYBRID, alpha=alpha, p=p, q=q, gamma0=gamma0, s0=s0, strict=strict)

    def _validate_exp_critical(self):
        if not (self.gamma0 and self.gamma0 > 0 and self.beta0 and self.beta0 > 0):
            raise InvalidArgument(_("gamma0 and beta0 must be positive."))
        if self.sigma is None or self.sigma <= 0:
            raise InvalidArgument(_("sigma must be positive."))

        if self.strict and not 2 + self.alpha < self.sigma < 6:
            raise InvalidArgument(
                _("sigma must lie in (2+alpha, 6) = ({}, 6), got {}.").format(
                    2 + self.alpha, self.sigma
                )
            )
        s0 = self.s0 or _matching_root(self.sigma, self.gamma0, self.beta0)
        object.__setattr__(self, "s0", float(s0))

        if self.strict:
            if s0 <= 1.0 / math.sqrt(self.gamma0):
                raise InvalidArgument(_("s0 must exceed 1/sqrt(gamma0)."))
            left, right = self._exp_branches_at(s0)
            if abs(left - right) > 1e-10 * abs(left):
                raise InvalidArgument(
                    _("f is discontinuous at s0={} ({} != {}).").format(s0, left, right)
                )

    def _validate_power(self):
        if self.p is None or self.p <= 1:
            raise InvalidArgument(_("p must exceed 1."))
        if self.strict and self.p <= 2 + self.alpha / 2:
            raise InvalidArgument(
                _("p must exceed 2+alpha/2 = {}, got {}.").format(
                    2 + self.alpha / 2, self.p
                )
            )

    def _validate_hybrid(self):
        if not (self.gamma0 and self.gamma0 > 0):
            raise InvalidArgument(_("gamma0 must be positive."))
        if self.p is None or self.q is None:
            raise InvalidArgument(_("The hybrid model needs both p and q."))

        threshold = hybrid_threshold(self.p, self.q, self.gamma0)
        s0 = self.s0
        if s0 is None:
            s0 = 1.25 * threshold if threshold > 0 else 1.0 / math.sqrt(self.gamma0)
        object.__setattr__(self, "s0", float(s0))

        if 2 * self.gamma0 * self.s0**2 <= self.q:
            raise InvalidArgument(
                _("The hybrid model needs 2*gamma0*s0^2 > q for f to stay positive.")
            )
        if self.strict:
            if self.p <= 2 + self.alpha / 2:
                raise InvalidArgument(
                    _("p must exceed 2+alpha/2 = {}, got {}.").format(
                        2 + self.alpha / 2, self.p
                    )
                )
            if self.q > 2:
                raise InvalidArgument(_("q must not exceed 2, got {}.").format(self.q))
            if self.s0 <= threshold:
                raise InvalidArgument(
                    _("s0 must exceed sqrt(max(p+q,0)/(2 gamma0)) = {}.").format(
                        threshold
                    )
                )

    def _exp_branches_at(self, s):
        left = s ** (self.sigma - 1)
        right = (
            self.beta0
            * (self.gamma0 * s * s - 1)
            * math.exp(self.gamma0 * s * s)
            / (self.gamma0 * s**3)
        )
        return left, right

    @property
    def _suffix(self):
        return str(self.variant).replace("-", "_")

    @property
    def mu(self):
        return self.p if self.variant in (POWER, HYBRID) else self.sigma

    @property
    def coefficient(self):
        """B of the hybrid model."""
        if self.variant != HYBRID:
            return None
        s0 = self.s0
        return (
            self.p
            * s0 ** (self.p + self.q)
            * math.exp(-self.gamma0 * s0 * s0)
            / (2 * self.gamma0 * s0 * s0 - self.q)
        )

    @property
    def asymptote(self):
        """
        beta0, the lower limit of t f(t) / e^(gamma0 t^2); None without
        exponential growth.
        """
        if self.variant == EXP_CRITICAL:
            return self.beta0
        if self.variant == HYBRID:
            return 2 * self.gamma0 * self.coefficient
        return None

    @property
    def exponential(self):
        return self.variant != POWER

    def exponent(self, t):
        if not self.exponential:
            return np.zeros_like(np.asarray(t, dtype=float))
        t = np.asarray(t, dtype=float)
        return self.gamma0 * t * t

    def terms(self, t):
        """
        f(t) and F(t) for an array t. Entries whose exponent gamma0 t^2 goes
        past OVERFLOW_EXPONENT come back as inf and are flagged in the mask.
        """
        t = np.asarray(t, dtype=float)
        overflow = self.exponent(t) > choquard_settings.OVERFLOW_EXPONENT
        safe = np.where(overflow | (t <= 0), 1.0, t)
        small = safe < self.s0 if self.exponential else np.ones(safe.shape, bool)

        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            f_values, F_values = getattr(self, "_terms_{}".format(self._suffix))(
                safe, small
            )

        positive = (t > 0) & ~overflow
        f_values = np.where(positive, f_values, 0.0)
        F_values = np.where(positive, F_values, 0.0)
        f_values = np.where(overflow, np.inf, f_values)
        F_values = np.where(overflow, np.inf, F_values)
        return f_values, F_values, overflow

    def _terms_exp_critical(self, t, small):
        sigma, gamma0, beta0, s0 = self.sigma, self.gamma0, self.beta0, self.s0
        growth = np.exp(gamma0 * t * t)
        at_s0 = math.exp(gamma0 * s0 * s0) / s0**2
        f_values = np.where(
            small,
            t ** (sigma - 1),
            beta0 * (gamma0 * t * t - 1) * growth / (gamma0 * t**3),
        )
        F_values = np.where(
            small,
            t**sigma / sigma,
            s0**sigma / sigma + beta0 / (2 * gamma0) * (growth / (t * t) - at_s0),
        )
        return f_values, F_values

    def _terms_power(self, t, small):
        return t ** (self.p - 1), t**self.p / self.p

    def _terms_hybrid(self, t, small):
        p, q, gamma0 = self.p, self.q, self.gamma0
        coefficient = self.coefficient
        growth = np.exp(gamma0 * t * t)
        f_values = np.where(
            small,
            p * t ** (p - 1),
            coefficient * growth * (2 * gamma0 * t * t - q) / t ** (q + 1),
        )
        F_values = np.where(small, t**p, coefficient * growth / t**q)
        return f_values, F_values

    def log_f(self, t):
        """log f(t) for t > 0, evaluated without forming e^(gamma0 t^2)."""
        if t <= 0:
            return -math.inf
        if self.variant == POWER or t < self.s0:
            f_value, _F_value, _overflow = self.terms(np.array([t]))
            return math.log(f_value[0]) if f_value[0] > 0 else -math.inf
        if self.variant == EXP_CRITICAL:
            return (
                math.log(self.beta0 / self.gamma0)
                + math.log(self.gamma0 * t * t - 1)
                + self.gamma0 * t * t
                - 3 * math.log(t)
            )
        return (
            math.log(self.coefficient)
            + self.gamma0 * t * t
            + math.log(2 * self.gamma0 * t * t - self.q)
            - (self.q + 1) * math.log(t)
        )


class NonlinearityValues(NamedTuple):
    f: float
    F: float
    Ftilde: float
    overflow: bool = False
    log_magnitude: Optional[float] = None


def evaluate(model, t):
    f_values, F_values, overflow = model.terms(np.array([float(t)]))
    if overflow[0]:
        return NonlinearityValues(
            math.inf, math.inf, math.inf, overflow=True, log_magnitude=model.log_f(t)
        )

    f_value, F_value = float(f_values[0]), float(F_values[0])
    Ftilde = f_value * t - (2 + model.alpha) / 2 * F_value if t > 0 else 0.0
    return NonlinearityValues(f_value, F_value, Ftilde)


def field_terms(model, values):
    """f(u) and F(u) nodewise, refusing amplitudes past the overflow threshold."""
    f_values, F_values, overflow = model.terms(values)
    if np.any(overflow):
        peak = float(np.max(np.abs(values)))
        log_magnitude = model.log_f(peak)
        raise EnergyOverflow(
            _(
                "Field amplitude {:g} puts e^(gamma0 t^2) past the overflow "
                "threshold (log f = {:g})."
            ).format(peak, log_magnitude),
            log_magnitude=log_magnitude,
        )
    return f_values, F_values


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    status: str
    witness: Optional[float] = None
    at: Optional[float] = None
    detail: str = ""

    @property
    def passed(self):
        return self.status != FAIL


@dataclass(frozen=True)
class AssumptionReport:
    model: NonlinearityModel
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


def default_sample_grids(model, points=400):
    upper = model.s0 if model.exponential else 1.0
    t_small = np.geomspace(1e-6, upper * (1 - 1e-9), points)

    if model.exponential:
        t_max = math.sqrt(choquard_settings.OVERFLOW_EXPONENT / model.gamma0)
        t_max *= 1 - 1e-9
        t_large = np.linspace(model.s0, t_max, points)
    else:
        t_large = np.linspace(upper, 50.0, points)
    return t_small, t_large


def _check_sorted(name, grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 3:
        raise InvalidArgument(_("{} needs at least 3 samples.").format(name))
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise InvalidArgument(
            _("{} must be positive and strictly increasing.").format(name)
        )
    return grid


def _tail(grid):
    return grid[-max(3, grid.size // 10) :]


def _limit_estimate(t, values):
    """Largest of the last sample and the 1/t^2 -> 0 intercept of a linear fit."""
    slope, intercept = np.polyfit(1.0 / (t * t), values, 1)
    return max(float(values[-1]), float(intercept))


class _Auditor:
    def __init__(self, model, t_small, t_large, tol):
        self.model = model
        self.tol = tol
        self.t_small = t_small
        self.t_large = t_large
        self.t_all = np.unique(np.concatenate((t_small, t_large)))
        self.f, self.F, overflow = model.terms(self.t_all)
        if np.any(overflow):
            raise InvalidArgument(_("Sample grids reach past the overflow threshold."))

    def values_at(self, grid):
        index = np.searchsorted(self.t_all, grid)
        return self.f[index], self.F[index]

    def f0(self):
        f_neg, F_neg, _overflow = self.model.terms(np.array([-1.0, -0.5, 0.0]))
        worst = float(np.max(np.abs(np.concatenate((f_neg, F_neg)))))
        lowest = float(min(np.min(self.f), np.min(self.F)))
        ok = worst == 0 and lowest >= 0 and np.all(np.isfinite(self.f))
        return AssumptionCheck(
            "f0",
            PASS if ok else FAIL,
            witness=worst if worst else lowest,
            detail=_("f and F vanish on t <= 0 and are nonnegative."),
        )

    def f1(self):
        t = self.t_small[self.t_small < (self.model.s0 or np.inf)]
        f_values, _F = self.values_at(t)
        ratio = f_values / t ** (1 + self.model.alpha / 2)
        slack = self.tol * np.abs(ratio[1:])
        ok = ratio[0] < self.tol and np.all(np.diff(ratio) >= -slack)
        return AssumptionCheck(
            "f1",
            PASS if ok else FAIL,
            witness=float(ratio[0]),
            at=float(t[0]),
            detail=_("f(t)/t^(1+alpha/2) decreases to 0 as t -> 0+."),
        )

    def f2(self):
        if not self.model.exponential:
            return AssumptionCheck(
                "f2", NOT_APPLICABLE, detail=_("No exponential growth.")
            )
        t = _tail(self.t_large)
        log_f = np.array([self.model.log_f(x) for x in t])
        above = np.diff(log_f - 1.05 * self.model.gamma0 * t * t)
        below = np.diff(log_f - 0.95 * self.model.gamma0 * t * t)
        ok = np.all(above < 0) and np.all(below > 0)
        return AssumptionCheck(
            "f2",
            PASS if ok else FAIL,
            witness=float(log_f[-1] / t[-1] ** 2),
            at=float(t[-1]),
            detail=_("log f(t)/t^2 approaches gamma0 from the right scale."),
        )

    def f3(self):
        model = self.model
        threshold = 2 + model.alpha / 2
        mu = max(model.mu, threshold)
        t = self.t_all
        product = self.f * t
        deficit = product - mu * self.F
        relative = deficit / np.maximum(product, np.finfo(float).tiny)
        worst = int(np.argmin(relative))
        ok = (
            model.mu > threshold
            and relative[worst] >= -self.tol
            and np.all(self.F > 0)
        )
        return AssumptionCheck(
            "f3",
            PASS if ok else FAIL,
            witness=float(deficit[worst]),
            at=float(t[worst]),
            detail=_("mu F(t) <= f(t) t with mu = {} > 2+alpha/2 = {}.").format(
                model.mu, threshold
            ),
        )

    def f4(self):
        if not self.model.exponential:
            return AssumptionCheck(
                "f4",
                NOT_APPLICABLE,
                detail=_("F/(f t) is constant without exponential growth."),
            )
        t = _tail(self.t_large)
        f_values, F_values = self.values_at(t)
        ratio = F_values / (f_values * t)
        ok = ratio[-1] < 0.05 and np.all(np.diff(ratio) <= 0)
        return AssumptionCheck(
            "f4",
            PASS if ok else FAIL,
            witness=float(ratio[-1]),
            at=float(t[-1]),
            detail=_("F(t)/(f(t) t) tends to 0."),
        )

    def f5(self):
        if not self.model.exponential:
            return AssumptionCheck(
                "f5", NOT_APPLICABLE, detail=_("No exponential growth.")
            )
        t = _tail(self.t_large)
        f_values, _F = self.values_at(t)
        scaled = f_values * t * np.exp(-self.model.gamma0 * t * t)
        limit = _limit_estimate(t, scaled)
        ok = limit >= self.model.asymptote * (1 - self.tol)
        return AssumptionCheck(
            "f5",
            PASS if ok else FAIL,
            witness=limit,
            at=float(t[-1]),
            detail=_("t f(t) e^(-gamma0 t^2) tends to at least beta0 = {}.").format(
                self.model.asymptote
            ),
        )

    def f6(self):
        t = self.t_all
        Ftilde = self.f * t - (2 + self.model.alpha) / 2 * self.F
        steps = np.diff(Ftilde)
        slack = self.tol * np.maximum(np.abs(Ftilde[1:]), 1.0)
        worst = int(np.argmin(steps + slack))
        ok = np.all(steps >= -slack)
        return AssumptionCheck(
            "f6",
            PASS if ok else FAIL,
            witness=float(steps[worst]),
            at=float(t[worst + 1]),
            detail=_("Ftilde(t) = f(t) t - (2+alpha)/2 F(t) is nondecreasing."),
        )

    def ruf(self):
        if not self.model.exponential:
            return AssumptionCheck(
                "F_Ruf", NOT_APPLICABLE, detail=_("No exponential growth.")
            )
        t = _tail(self.t_large)
        _f, F_values = self.values_at(t)
        scaled = F_values * t * t * np.exp(-self.model.gamma0 * t * t)
        limit = _limit_estimate(t, scaled)
        bound = self.model.asymptote / (2 * self.model.gamma0)
        return AssumptionCheck(
            "F_Ruf",
            PASS if limit >= bound * (1 - self.tol) else FAIL,
            witness=limit,
            at=float(t[-1]),
            detail=_(
                "F(t) t^2 e^(-gamma0 t^2) tends to at least beta0/(2 gamma0) = {}."
            ).format(bound),
        )


def check_assumptions(model, t_small_grid=None, t_large_grid=None, tol=None):
    default_small, default_large = default_sample_grids(model)
    t_small = _check_sorted(
        "t_small_grid", default_small if t_small_grid is None else t_small_grid
    )
    t_large = _check_sorted(
        "t_large_grid", default_large if t_large_grid is None else t_large_grid
    )
    tol = choquard_settings.ASSUMPTION_TOL if tol is None else tol

    auditor = _Auditor(model, t_small, t_large, tol)
    checks = (
        auditor.f0(),
        auditor.f1(),
        auditor.f2(),
        auditor.f3(),
        auditor.f4(),
        auditor.f5(),
        auditor.f6(),
        auditor.ruf(),
    )
    return AssumptionReport(model=model, checks=checks)
