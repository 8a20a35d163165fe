"""Continuous tensor Q_q Lagrange space on a TensorMesh with zero Dirichlet trace."""

from functools import cached_property
import itertools

import numpy as np

from .quadrature import gll_rule, lagrange_basis

BOUNDARY = -1


def tensor_values(factors):
    """Tensor product of per-axis tables.

    ``factors[k]`` has shape (npts, q + 1); the result has shape
    (npts, (q + 1)**d) with local index sum_k i_k (q + 1)**k.
    """
    out = factors[0]
    for f in factors[1:]:
        out = (f[:, :, None] * out[:, None, :]).reshape(len(out), -1)
    return out


def local_multi_indices(q, d):
    """(n_loc, d) array of tensor indices, axis 0 fastest."""
    return np.array([rev[::-1] for rev in itertools.product(range(q + 1), repeat=d)],
                    dtype=int)


class FeSpace:
    def __init__(self, mesh, q):
        if int(q) != q or q < 1:
            raise ValueError(f"degree must be a positive integer, got {q}")
        self.mesh = mesh
        self.q = int(q)
        self.dim = mesh.dim
        self.basis = lagrange_basis(self.q)
        n, q = mesh.n_axis, self.q
        ref = gll_rule(q).points
        grid = np.empty(n * q + 1)
        x = mesh.nodes
        for e in range(n):
            grid[e * q:(e + 1) * q + 1] = x[e] + (x[e + 1] - x[e]) * ref
        grid[0], grid[-1] = 0.0, 1.0
        grid.setflags(write=False)
        self.axis_grid = grid
        self.n_interior = n * q - 1
        self.dof_count = self.n_interior**self.dim

    @property
    def N(self):
        return self.dof_count

    @property
    def n_local(self):
        return (self.q + 1) ** self.dim

    @cached_property
    def local_indices(self):
        return local_multi_indices(self.q, self.dim)

    @cached_property
    def element_dofs(self):
        """(M, n_local) global DOF per element-local index, BOUNDARY where pinned."""
        q, m = self.q, self.n_interior
        ai = self.mesh.axis_indices  # (M, d)
        g = ai[:, None, :] * q + self.local_indices[None, :, :]  # global grid idx
        inside = np.all((g >= 1) & (g <= m), axis=2)
        dof = np.zeros(g.shape[:2], dtype=int)
        for k in range(self.dim):
            dof += (g[:, :, k] - 1) * m**k
        dof[~inside] = BOUNDARY
        dof.setflags(write=False)
        return dof

    @cached_property
    def dof_points(self):
        """(N, d) coordinates of the DOF grid points, DOF order."""
        inner = self.axis_grid[1:-1]
        idx = np.indices((self.n_interior,) * self.dim).reshape(self.dim, -1)[::-1]
        return np.stack([inner[idx[k]] for k in range(self.dim)], axis=1)

    def shape_values(self, t):
        """Local shape functions at reference points t (npts, d)."""
        t = np.atleast_2d(t)
        return tensor_values([self.basis(t[:, k]) for k in range(self.dim)])

    def shape_grads(self, t):
        """Reference gradients, shape (npts, n_local, d)."""
        t = np.atleast_2d(t)
        vals = [self.basis(t[:, k]) for k in range(self.dim)]
        ders = [self.basis.deriv(t[:, k]) for k in range(self.dim)]
        out = []
        for k in range(self.dim):
            f = list(vals)
            f[k] = ders[k]
            out.append(tensor_values(f))
        return np.stack(out, axis=2)

    def function(self, coeffs=None):
        return FeFunction(self, np.zeros(self.N) if coeffs is None else coeffs)

    def dump_function(self, f, path):
        with open(path, "w") as fh:
            fh.write(f"# N={self.N} q={self.q}\n")
            for i, v in enumerate(f.coeffs):
                fh.write(f"{i} {float(v)!r}\n")


def build_space(mesh, q):
    return FeSpace(mesh, q)


class FeFunction:
    def __init__(self, space, coeffs):
        coeffs = np.array(coeffs, dtype=float)
        if coeffs.shape != (space.N,):
            raise ValueError(f"expected {space.N} coefficients, got {coeffs.shape}")
        self.space = space
        self._coeffs = coeffs

    @property
    def coeffs(self):
        return self._coeffs

    @coeffs.setter
    def coeffs(self, value):
        value = np.array(value, dtype=float)
        if value.shape != self._coeffs.shape:
            raise ValueError("coefficient array must be replaced whole")
        self._coeffs = value

    def element_block(self, k):
        """Local (q + 1)**d coefficients on element k, zeros at pinned nodes."""
        dofs = self.space.element_dofs[k]
        out = np.zeros(len(dofs))
        live = dofs != BOUNDARY
        out[live] = self._coeffs[dofs[live]]
        return out

    def element_blocks(self):
        dofs = self.space.element_dofs
        padded = np.append(self._coeffs, 0.0)
        return padded[dofs]  # BOUNDARY == -1 picks the appended zero

    def _prepare(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.space.dim:
            raise ValueError("point dimension mismatch")
        elem, _ = self.space.mesh.locate(x)
        mesh = self.space.mesh
        t = (x - mesh.lowers[elem]) / mesh.widths[elem]
        return x, elem, t

    def __call__(self, x):
        x, elem, t = self._prepare(x)
        sp = self.space
        factors = [sp.basis(t[:, k]) for k in range(sp.dim)]
        vals = tensor_values(factors)
        return np.einsum("pi,pi->p", vals, self.element_blocks()[elem])

    def grad(self, x):
        x, elem, t = self._prepare(x)
        g = self.space.shape_grads(t)
        blocks = self.element_blocks()[elem]
        ref = np.einsum("pik,pi->pk", g, blocks)
        return ref / self.space.mesh.widths[elem]


def restrict_to_element(f, k):
    return f.element_block(k)


def evaluate(f, x):
    return f(x)


def evaluate_grad(f, x):
    return f.grad(x)
