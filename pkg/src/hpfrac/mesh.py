"""Geometric tensor-product meshes of the unit cube, layer tags and cutoff."""

from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
import itertools

import numpy as np

VARIANTS = ("figure", "text")


class Layer(IntEnum):
    L0 = 0
    L1 = 1
    INT = 2


@dataclass(frozen=True)
class GeoNodes1D:
    sigma: float
    layers: int
    variant: str
    nodes: np.ndarray

    @property
    def n_elements(self):
        return len(self.nodes) - 1

    @property
    def widths(self):
        return np.diff(self.nodes)


def _powers(sigma, L):
    # sigma**k for k = L, L-1, ..., 0 by repeated multiplication, descending
    out = [1.0]
    for _ in range(L):
        out.append(out[-1] * sigma)
    return out[::-1]


def geometric_nodes_1d(sigma, L, variant="figure"):
    """Nodes of the geometric partition of (0, 1) with L layers.

    ``figure`` mirrors the left half so both end elements have width
    sigma**L / 2 (2L + 2 elements, nested in L). ``text`` follows the
    closed-form node list literally (2L + 1 elements, asymmetric).
    """
    sigma = float(sigma)
    if not 0.0 < sigma < 1.0:
        raise ValueError(f"sigma must lie in (0, 1), got {sigma}")
    if int(L) != L or L < 1:
        raise ValueError(f"L must be a positive integer, got {L}")
    L = int(L)
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    pw = _powers(sigma, L)  # pw[k] == sigma**(L - k)
    if variant == "figure":
        left = [pw[j] / 2.0 for j in range(L + 1)]
        right = [1.0 - pw[j] / 2.0 for j in range(L)][::-1]
        nodes = [0.0] + left + right + [1.0]
    else:
        left = [pw[i] / 2.0 for i in range(1, L + 1)]
        # x_i = 1 - sigma**(i - L) / 2 for i = L+1..2L
        right = [1.0 - sigma ** (i - L) / 2.0 for i in range(L + 1, 2 * L + 1)]
        nodes = [0.0] + left + right + [1.0]
    nodes = np.array(nodes)
    if np.any(np.diff(nodes) <= 0.0):
        raise ValueError("generated nodes are not strictly increasing")
    nodes.setflags(write=False)
    return GeoNodes1D(sigma, L, variant, nodes)


@dataclass(frozen=True)
class Element:
    index: int
    axis_index: tuple
    lower: np.ndarray
    widths: np.ndarray
    layer: Layer

    @property
    def upper(self):
        return self.lower + self.widths

    @property
    def volume(self):
        return float(np.prod(self.widths))

    def to_reference(self, x):
        """Inverse element map F_K^{-1}; F_K(t) = lower + diag(widths) t."""
        return (np.asarray(x) - self.lower) / self.widths

    def from_reference(self, t):
        return self.lower + self.widths * np.asarray(t)

    @property
    def barycenter(self):
        return self.lower + 0.5 * self.widths

    def vertices(self):
        return np.array([self.lower + self.widths * np.array(c)
                         for c in itertools.product((0.0, 1.0), repeat=len(self.lower))])


def _layer_tags(n, dim):
    """Tags for all elements of an n^dim grid, flat index with axis 0 fastest."""
    shape = (n,) * dim
    idx = np.indices(shape[::-1])[::-1]  # idx[k] = axis-k element index
    on_bdry = np.zeros(shape[::-1], dtype=bool)
    near = np.zeros(shape[::-1], dtype=bool)
    for k in range(dim):
        on_bdry |= (idx[k] == 0) | (idx[k] == n - 1)
        near |= (idx[k] <= 1) | (idx[k] >= n - 2)
    # closures meet an L0 element iff some axis index is within 1 of the rim
    tags = np.full(shape[::-1], Layer.INT, dtype=int)
    tags[near] = Layer.L1
    tags[on_bdry] = Layer.L0
    return tags.reshape(-1)


@dataclass(frozen=True, eq=False)
class TensorMesh:
    dim: int
    axis: GeoNodes1D
    elements: tuple = field(repr=False)

    @property
    def n_axis(self):
        return self.axis.n_elements

    @property
    def nodes(self):
        return self.axis.nodes

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __getitem__(self, i):
        return self.elements[i]

    @cached_property
    def lowers(self):
        return np.array([e.lower for e in self.elements])

    @cached_property
    def widths(self):
        return np.array([e.widths for e in self.elements])

    @cached_property
    def axis_indices(self):
        return np.array([e.axis_index for e in self.elements], dtype=int)

    @cached_property
    def layers(self):
        return np.array([int(e.layer) for e in self.elements], dtype=int)

    @property
    def is_symmetric(self):
        x = self.nodes
        return bool(np.allclose(x, 1.0 - x[::-1], rtol=0, atol=1e-14))

    def element_index(self, axis_index):
        n = self.n_axis
        return int(sum(int(e) * n**k for k, e in enumerate(axis_index)))

    def locate(self, x):
        """Element indices containing points x (..., dim); ties go to the lower index."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if np.any(x < 0.0) or np.any(x > 1.0):
            raise ValueError("point outside the closed unit cube")
        n = self.n_axis
        ax = np.clip(np.searchsorted(self.nodes, x, side="left") - 1, 0, n - 1)
        flat = np.zeros(len(x), dtype=int)
        for k in range(self.dim):
            flat += ax[:, k] * n**k
        return flat, ax

    def dump(self, path):
        with open(path, "w") as fh:
            fh.write(f"# dim={self.dim} sigma={self.axis.sigma!r} "
                     f"L={self.axis.layers} variant={self.axis.variant}\n")
            for e in self.elements:
                fields = [str(e.index)]
                fields += [repr(float(v)) for v in e.lower]
                fields += [repr(float(v)) for v in e.widths]
                fields.append(str(int(e.layer)))
                fh.write(" ".join(fields) + "\n")


def build_tensor_mesh(nodes, dim):
    if dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
    x = nodes.nodes
    n = nodes.n_elements
    tags = _layer_tags(n, dim)
    elements = []
    for flat, rev in enumerate(itertools.product(range(n), repeat=dim)):
        ai = tuple(rev[::-1])  # axis 0 fastest
        lower = np.array([x[i] for i in ai])
        widths = np.array([x[i + 1] - x[i] for i in ai])
        elements.append(Element(flat, ai, lower, widths, Layer(tags[flat])))
    return TensorMesh(dim, nodes, tuple(elements))


def geometric_mesh(sigma, L, dim, variant="figure"):
    return build_tensor_mesh(geometric_nodes_1d(sigma, L, variant), dim)


def elements_adjacent(a, b):
    """Closures intersect (a shared vertex is enough)."""
    return bool(np.all(np.abs(np.subtract(a.axis_index, b.axis_index)) <= 1))


@dataclass(frozen=True, eq=False)
class CutoffFunction:
    """Piecewise-multilinear g = prod_k g1(x_k) with nodal 0/1 values per axis."""
    mesh: TensorMesh
    axis_values: np.ndarray

    def _g1(self, t):
        return np.interp(t, self.mesh.nodes, self.axis_values)

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.prod(self._g1(x), axis=1)

    def vertex_values(self):
        """Values at all tensor-grid vertices, shape (n + 1,) * dim (axis 0 last)."""
        g = self.axis_values
        out = g
        for _ in range(self.mesh.dim - 1):
            out = np.multiply.outer(g, out)
        return out


def build_cutoff(mesh):
    n = mesh.n_axis
    if n < 3:
        raise ValueError(f"cutoff needs at least 3 elements per axis, got {n}")
    vals = np.ones(n + 1)
    vals[[0, 1, n - 1, n]] = 0.0
    vals.setflags(write=False)
    return CutoffFunction(mesh, vals)


@dataclass(frozen=True)
class BoundarySubdomain:
    elements: tuple
    measure: float


def boundary_subdomain(mesh):
    """Union of the elements touching the boundary, with its exact measure."""
    elems = tuple(e.index for e in mesh.elements if e.layer == Layer.L0)
    w = mesh.axis.widths
    inner = 1.0 - w[0] - w[-1]
    return BoundarySubdomain(elems, 1.0 - inner**mesh.dim)
