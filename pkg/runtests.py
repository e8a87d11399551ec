#!/usr/bin/env python
# Standard libraries
import os
import sys

# Django
from django.core.management import execute_from_command_line


def runtests():
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "tests.settings")
    # The kernel cache directory of the host must not leak into the suite.
    os.environ.pop("CHOQUARD_KERNEL_CACHE", None)
    labels = sys.argv[1:] or ["tests"]
    execute_from_command_line(sys.argv[:1] + ["test"] + labels)


if __name__ == "__main__":
    runtests()
