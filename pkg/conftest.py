# Standard libraries
import os

# Django
import django

# Mirror runtests.py so plain `pytest` collects the Django-backed suite.
os.environ.setdefault("DJANGO_SETTINGS_MODULE", "tests.settings")
# The kernel cache directory of the host must not leak into the suite.
os.environ.pop("CHOQUARD_KERNEL_CACHE", None)
django.setup()
