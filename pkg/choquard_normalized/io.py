"""
Persistence: CSV exports, JSON reports and the on-disk Riesz kernel cache.

Kernel cache files start with a 16 byte header, the magic b"RIESZK1\\0"
followed by N as a little endian uint64, then the N*N matrix as little endian
float64 in row-major order.
"""
# Standard libraries
import io as _io
import logging
import os
from pathlib import Path
import struct
import tempfile

# Django
from django.utils.translation import gettext as _

# Rest Framework
from rest_framework.exceptions import ParseError
from rest_framework.parsers import JSONParser
from rest_framework.renderers import JSONRenderer

# Third party
import numpy as np

# choquard-normalized
from choquard_normalized.exceptions import InvalidArgument, UsageError

logger = logging.getLogger(__name__)

KERNEL_MAGIC = b"RIESZK1\x00"
KERNEL_HEADER = struct.Struct("<8sQ")

FIELD_HEADER = "r,u"
GRID_HEADER = "r,w"
HISTORY_HEADER = "iteration,J,pohozaev,gradient"
FIBER_HEADER = "s,jtilde,pohozaev"
MOSER_HEADER = "t,g"


def kernel_cache_path(cache_dir, grid, alpha):
    name = "riesz-{}-n{}-r{!r}-a{!r}.bin".format(
        grid.scheme, grid.size, grid.r_max, alpha
    )
    return Path(cache_dir) / name


def load_kernel_matrix(cache_dir, grid, alpha):
    """The cached matrix for (grid, alpha), or None when absent or unreadable."""
    path = kernel_cache_path(cache_dir, grid, alpha)
    try:
        payload = path.read_bytes()
    except FileNotFoundError:
        logger.debug("Riesz kernel cache miss: %s", path)
        return None

    size = grid.size
    if len(payload) != KERNEL_HEADER.size + 8 * size * size:
        logger.warning("Ignoring truncated kernel cache file %s", path)
        return None

    magic, stored_size = KERNEL_HEADER.unpack_from(payload)
    if magic != KERNEL_MAGIC or stored_size != size:
        logger.warning("Ignoring kernel cache file %s with a foreign header", path)
        return None

    matrix = np.frombuffer(payload, dtype="<f8", offset=KERNEL_HEADER.size)
    if not np.all(np.isfinite(matrix)):
        logger.warning("Ignoring kernel cache file %s with non-finite entries", path)
        return None
    return matrix.reshape(size, size).astype(float)


def store_kernel_matrix(cache_dir, grid, alpha, matrix):
    path = kernel_cache_path(cache_dir, grid, alpha)
    path.parent.mkdir(parents=True, exist_ok=True)

    header = KERNEL_HEADER.pack(KERNEL_MAGIC, grid.size)
    payload = np.ascontiguousarray(matrix, dtype="<f8").tobytes()

    # Rename into place so concurrent readers never see a partial file.
    handle, temporary = tempfile.mkstemp(dir=path.parent, suffix=".part")
    with os.fdopen(handle, "wb") as stream:
        stream.write(header)
        stream.write(payload)
    os.replace(temporary, path)
    logger.debug("Stored Riesz kernel in %s", path)
    return path


def write_rows_csv(path, header, rows):
    np.savetxt(
        path,
        np.asarray(rows, dtype=float),
        fmt="%.17g",
        delimiter=",",
        header=header,
        comments="",
    )
    return path


def read_rows_csv(path, header):
    path = Path(path)
    try:
        with path.open() as stream:
            first = stream.readline().strip()
            rows = np.loadtxt(stream, delimiter=",", ndmin=2)
    except OSError as exc:
        raise UsageError(_("Cannot read {}: {}").format(path, exc), key="field")
    except ValueError as exc:
        raise UsageError(
            _("{} is not a valid CSV file: {}").format(path, exc), key="field"
        )

    if first != header:
        raise UsageError(
            _("{} must start with the header {!r}, found {!r}.").format(
                path, header, first
            ),
            key="field",
        )
    return rows


def write_field_csv(path, field):
    rows = np.column_stack((field.grid.nodes, field.values))
    return write_rows_csv(path, FIELD_HEADER, rows)


def read_field_csv(path, grid):
    """The field stored at `path`, which must have been written on `grid`."""
    rows = read_rows_csv(path, FIELD_HEADER)
    same_nodes = rows.shape == (grid.size, 2) and np.allclose(
        rows[:, 0], grid.nodes, rtol=1e-12, atol=0
    )
    if not same_nodes:
        raise InvalidArgument(
            _("{} does not hold a field on a grid of {} nodes ({}).").format(
                path, grid.size, grid.scheme
            )
        )
    return grid.field(rows[:, 1])


def write_grid_csv(path, grid):
    rows = np.column_stack((grid.nodes, grid.weights))
    return write_rows_csv(path, GRID_HEADER, rows)


def write_history_csv(path, history):
    rows = [(index, *entry) for index, entry in enumerate(history)]
    return write_rows_csv(path, HISTORY_HEADER, rows)


def render_json(data):
    return JSONRenderer().render(data, renderer_context={"indent": 2}) + b"\n"


def write_json(path, data):
    Path(path).write_bytes(render_json(data))
    return path


def read_json(path):
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as exc:
        raise UsageError(_("Cannot read {}: {}").format(path, exc), key="config")

    try:
        data = JSONParser().parse(_io.BytesIO(payload))
    except ParseError as exc:
        raise UsageError(
            _("{} is not valid JSON: {}").format(path, exc.detail), key="config"
        )
    if not isinstance(data, dict):
        raise UsageError(_("{} must hold a JSON object.").format(path), key="config")
    return data
