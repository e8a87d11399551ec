# Django
from django.utils.translation import gettext_lazy as _


class ChoquardError(Exception):
    default_message = _("Choquard computation failed.")

    def __init__(self, message=None, **context):
        self.context = context
        if message is None:
            message = self.default_message
        super().__init__(str(message))


class InvalidArgument(ChoquardError, ValueError):
    pass


class UsageError(InvalidArgument):
    """Raised for malformed command lines or configuration files."""

    def __init__(self, message=None, key=None, **context):
        self.key = key
        super().__init__(message, key=key, **context)


class DegenerateField(ChoquardError, ValueError):
    pass


class NoMatchingPoint(ChoquardError, ArithmeticError):
    pass


class EnergyOverflow(ChoquardError, ArithmeticError):
    """
    A field amplitude reached the region where e^{gamma0 t^2} cannot be
    represented. Carries the largest log-magnitude seen in `log_magnitude`.
    """

    def __init__(self, message=None, log_magnitude=None, **context):
        self.log_magnitude = log_magnitude
        super().__init__(message, log_magnitude=log_magnitude, **context)


class ProjectionFailed(ChoquardError, ArithmeticError):
    pass


class MonotonicityViolation(ChoquardError, ArithmeticError):
    pass


class ResolutionError(ChoquardError, ValueError):
    pass


class ScanOverflow(EnergyOverflow):
    pass


class InvalidState(ChoquardError, RuntimeError):
    pass
