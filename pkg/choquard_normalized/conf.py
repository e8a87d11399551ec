"""
Settings for choquard-normalized are all namespaced in the CHOQUARD setting.
For example your project's `settings.py` file might look like this:

CHOQUARD = {
    "KERNEL_CACHE": "/var/cache/choquard",
    "KERNEL_WORKERS": 8,
}

This module provides the `choquard_settings` object, that is used to access
choquard-normalized settings, checking for user settings first, then falling
back to the defaults.
"""
# Standard libraries
import os

# Django
import django
from django.conf import settings
from django.core.signals import setting_changed

# Rest Framework
from rest_framework.settings import APISettings

DEFAULTS = {
    # Directory of the optional Riesz kernel cache.
    "KERNEL_CACHE": None,
    "KERNEL_WORKERS": 4,
    # e^{gamma0 t^2} is only evaluated while gamma0 t^2 stays below this.
    "OVERFLOW_EXPONENT": 700.0,
    "ASSUMPTION_TOL": 1e-6,
    "PROJECTION_TOL": 1e-10,
    "PROJECTION_SCAN_POINTS": 9,
    "RESIDUAL_TOL": 1e-4,
    "GRADIENT_BOUND_TOL": 1e-3,
    "ORACLE_POINTS": 256,
    "ORACLE_EPSILON": 1e-8,
}

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {"format": "%(levelname)s %(name)s: %(message)s"},
    },
    "handlers": {
        "stderr": {
            "class": "logging.StreamHandler",
            "stream": "ext://sys.stderr",
            "formatter": "plain",
        },
    },
    "loggers": {
        "choquard_normalized": {"handlers": ["stderr"], "level": "INFO"},
    },
}


class ChoquardSettings(APISettings):
    @property
    def user_settings(self):
        if not hasattr(self, "_user_settings"):
            self._user_settings = getattr(settings, "CHOQUARD", {})
        return self._user_settings

    @property
    def kernel_cache_dir(self):
        return self.KERNEL_CACHE or os.environ.get("CHOQUARD_KERNEL_CACHE") or None


choquard_settings = ChoquardSettings(None, DEFAULTS, ())


def reload_choquard_settings(*args, **kwargs):
    if kwargs["setting"] == "CHOQUARD":
        choquard_settings.reload()


setting_changed.connect(reload_choquard_settings)


def configure(verbose=False, **overrides):
    """
    Configure minimal Django settings when the host process has none, so the
    library can run outside of a Django project.
    """
    if not settings.configured:
        logging_config = dict(LOGGING)
        if verbose:
            logging_config["loggers"] = {
                "choquard_normalized": {"handlers": ["stderr"], "level": "DEBUG"},
            }
        settings.configure(
            USE_I18N=True,
            INSTALLED_APPS=["choquard_normalized"],
            LOGGING=logging_config,
            CHOQUARD=overrides,
        )
        django.setup()
    return settings
