# Standard libraries
from dataclasses import dataclass
from functools import cached_property

# Django
from django.utils.translation import gettext as _

# Third party
import numpy as np

# choquard-normalized
from choquard_normalized.exceptions import DegenerateField, InvalidArgument

UNIFORM_MIDPOINT = "uniform-midpoint"
GRADED = "graded"
SCHEMES = (UNIFORM_MIDPOINT, GRADED)

MIN_NODES = 8


def _frozen(values):
    array = np.array(values, dtype=float)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """
    Cell-centred discretization of the disk of radius `r_max`.

    `edges` are the N+1 cell faces (edges[0] == 0, edges[-1] == r_max), the
    `nodes` sit inside the cells and `weights` fold the 2*pi*r Jacobian in, so
    that sum(weights * g(nodes)) approximates the integral of g(|x|) over R^2
    for g vanishing beyond r_max.
    """

    nodes: np.ndarray
    weights: np.ndarray
    edges: np.ndarray
    r_max: float
    scheme: str

    def __post_init__(self):
        object.__setattr__(self, "nodes", _frozen(self.nodes))
        object.__setattr__(self, "weights", _frozen(self.weights))
        object.__setattr__(self, "edges", _frozen(self.edges))
        object.__setattr__(self, "r_max", float(self.r_max))

        if self.nodes.ndim != 1 or self.nodes.size < MIN_NODES:
            raise InvalidArgument(
                _("A radial grid needs at least {} nodes.").format(MIN_NODES)
            )
        if self.weights.shape != self.nodes.shape:
            raise InvalidArgument(_("Grid weights and nodes differ in length."))
        if self.edges.size != self.nodes.size + 1:
            raise InvalidArgument(_("A grid of N cells needs N+1 edges."))
        if np.any(self.nodes <= 0) or np.any(np.diff(self.nodes) <= 0):
            raise InvalidArgument(_("Grid nodes must be positive and increasing."))
        if self.nodes[-1] > self.r_max or np.any(self.weights <= 0):
            raise InvalidArgument(
                _("Grid nodes must lie in (0, r_max] with positive weights.")
            )

    @property
    def size(self):
        return self.nodes.size

    @cached_property
    def face_radii(self):
        return 0.5 * (self.nodes[1:] + self.nodes[:-1])

    @cached_property
    def face_areas(self):
        """
        Annulus areas attached to the N-1 faces between consecutive nodes; the
        innermost disk and the outermost half-cell go to the nearest face.
        """
        areas = np.pi * (self.nodes[1:] ** 2 - self.nodes[:-1] ** 2)
        areas[0] += np.pi * self.nodes[0] ** 2
        areas[-1] += np.pi * (self.r_max**2 - self.nodes[-1] ** 2)
        return _frozen(areas)

    @cached_property
    def conductances(self):
        return _frozen(self.face_areas / np.diff(self.nodes) ** 2)

    def matches(self, other):
        if self is other:
            return True

        return (
            isinstance(other, RadialGrid)
            and self.scheme == other.scheme
            and self.size == other.size
            and self.r_max == other.r_max
            and np.array_equal(self.nodes, other.nodes)
        )

    def check(self, field):
        if not self.matches(field.grid):
            raise InvalidArgument(_("The field does not live on this grid."))

    def field(self, values):
        return RadialField(self, values)

    def sample(self, func):
        return RadialField(self, func(self.nodes))

    def zeros(self):
        return RadialField(self, np.zeros(self.size))


@dataclass(frozen=True, eq=False)
class RadialField:
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values)
        if values.shape != (self.grid.size,):
            raise InvalidArgument(
                _("A field on a grid of {} nodes cannot have shape {}.").format(
                    self.grid.size, values.shape
                )
            )
        if not np.all(np.isfinite(values)):
            raise InvalidArgument(_("Field values must be finite."))
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size

    def with_values(self, values):
        return RadialField(self.grid, values)

    def scaled(self, factor):
        return RadialField(self.grid, factor * self.values)


def make_grid(n, r_max, scheme=UNIFORM_MIDPOINT):
    if n < MIN_NODES:
        raise InvalidArgument(
            _("A radial grid needs at least {} nodes, got {}.").format(MIN_NODES, n)
        )
    if not r_max > 0:
        raise InvalidArgument(_("r_max must be positive, got {}.").format(r_max))

    index = np.arange(1, n + 1)
    if scheme == UNIFORM_MIDPOINT:
        width = r_max / n
        edges = np.linspace(0.0, r_max, n + 1)
        nodes = (index - 0.5) * width
        weights = 2 * np.pi * nodes * width
    elif scheme == GRADED:
        edges = r_max * (np.arange(n + 1) / n) ** 2
        nodes = r_max * ((index - 0.5) / n) ** 2
        weights = np.pi * (edges[1:] ** 2 - edges[:-1] ** 2)
    else:
        raise InvalidArgument(
            _("Unknown grid scheme {!r}, expected one of {}.").format(
                scheme, ", ".join(SCHEMES)
            )
        )

    return RadialGrid(
        nodes=nodes, weights=weights, edges=edges, r_max=r_max, scheme=scheme
    )


def integrate(grid, g):
    grid.check(g)
    return float(np.dot(grid.weights, g.values))


def inner(grid, g, h):
    grid.check(g)
    grid.check(h)
    return float(np.dot(grid.weights, g.values * h.values))


def grad_norm_sq(grid, u):
    grid.check(u)
    jumps = np.diff(u.values)
    return float(np.dot(grid.conductances, jumps * jumps))


def stiffness_bands(grid):
    """
    Diagonal and off-diagonal of the symmetric tridiagonal L with
    u.L.u == grad_norm_sq(u).
    """
    c = grid.conductances
    diagonal = np.zeros(grid.size)
    diagonal[:-1] += c
    diagonal[1:] += c
    return diagonal, -c


def laplacian(grid, u):
    """
    Discrete u'' + u'/r. No flux crosses r=0; at r_max the outermost face is
    the last one, matching `grad_norm_sq`, whose weighted gradient is -2 times
    this operator.
    """
    grid.check(u)
    flux = grid.conductances * np.diff(u.values)
    divergence = np.zeros(grid.size)
    divergence[:-1] += flux
    divergence[1:] -= flux
    return RadialField(grid, divergence / grid.weights)


def lp_norm(grid, u, p=2):
    if p < 1:
        raise InvalidArgument(_("p must be at least 1, got {}.").format(p))

    grid.check(u)
    return float(np.dot(grid.weights, np.abs(u.values) ** p) ** (1.0 / p))


def rescale_mass(u, a):
    if not a > 0:
        raise InvalidArgument(_("The mass must be positive, got {}.").format(a))

    norm = lp_norm(u.grid, u, 2)
    if norm == 0:
        raise DegenerateField(_("Cannot rescale a field of zero mass."))

    return u.scaled(a / norm)


def positive_part(u):
    return u.with_values(np.maximum(u.values, 0.0))
