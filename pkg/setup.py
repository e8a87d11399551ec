# Standard libraries
from pathlib import Path

# choquard-normalized
from setuptools import find_packages, setup

VERSION = "0.3.0"
DESCRIPTION = (
    "Normalized ground states of the planar Choquard equation "
    "with Trudinger-Moser critical growth."
)
this_directory = Path(__file__).parent
LONG_DESCRIPTION = (this_directory / "README.md").read_text()

setup(
    name="choquard-normalized",
    version=VERSION,
    description=DESCRIPTION,
    long_description=LONG_DESCRIPTION,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=("tests", "examples", "examples.*")),
    python_requires=">=3.10",
    install_requires=(
        "django>=4.2",
        "djangorestframework>=3.14",
        "numpy>=1.24",
        "scipy>=1.10",
    ),
    entry_points={"console_scripts": ["choquard = choquard_normalized.cli:main"]},
)
