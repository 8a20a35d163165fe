"""Tensor GLL interpolation on the reference cube and on an FeSpace."""

import numpy as np

from .quadrature import gll_rule
from .space import FeFunction, tensor_values

BOUNDARY_TOL = 1e-10


def _grid(nodes, d):
    """Tensor grid (npts, d) in flat local order (axis 0 fastest)."""
    idx = np.indices((len(nodes),) * d).reshape(d, -1)[::-1]
    return np.stack([nodes[idx[k]] for k in range(d)], axis=1)


def interp_reference(f, q, d):
    """Values of f at the tensor GLL nodes of [0,1]^d, flat local order.

    ``f`` takes an (npts, d) array and returns npts values.
    """
    pts = _grid(gll_rule(q).points, d)
    return np.asarray(f(pts), dtype=float).reshape(-1)


def eval_reference(values, q, t):
    """Evaluate the Q_q interpolant with node values ``values`` at points t (npts, d)."""
    from .quadrature import lagrange_basis
    t = np.atleast_2d(np.asarray(t, dtype=float))
    basis = lagrange_basis(q)
    phi = tensor_values([basis(t[:, k]) for k in range(t.shape[1])])
    return phi @ values


def interp_global(f, space, tol=BOUNDARY_TOL):
    """Global interpolant: coefficient of every DOF is f at its grid point.

    f must vanish on the boundary; boundary grid points are sampled and a
    value above ``tol`` is rejected. FeFunctions are accepted directly.
    """
    if isinstance(f, FeFunction) and f.space is space:
        # already interpolatory in this space; evaluating would only add roundoff
        return FeFunction(space, f.coeffs.copy())
    d = space.dim
    grid = space.axis_grid
    # boundary grid points: every grid point with some coordinate at 0 or 1
    full = _grid(grid, d)
    on_bdry = np.any((full == 0.0) | (full == 1.0), axis=1)
    bvals = np.asarray(f(full[on_bdry]), dtype=float)
    if bvals.size and np.max(np.abs(bvals)) > tol:
        raise ValueError(f"function does not vanish on the boundary "
                         f"(max |f| = {np.max(np.abs(bvals)):.3e})")
    return FeFunction(space, np.asarray(f(space.dof_points), dtype=float))


def face_trace_mismatch(f, space, n_points=20, seed=0):
    """Max jump of the interpolant across interior element faces at random face points.

    Evaluates the local polynomials of both neighbours at shared face points;
    a conforming interpolant gives zero up to roundoff.
    """
    from .quadrature import lagrange_basis
    u = f if isinstance(f, FeFunction) else interp_global(f, space)
    mesh, q, d = space.mesh, space.q, space.dim
    basis = lagrange_basis(q)
    blocks = u.element_blocks()
    rng = np.random.default_rng(seed)
    n = mesh.n_axis
    worst = 0.0
    for k in range(d):
        for _ in range(n_points):
            ai = rng.integers(0, n, size=d)
            ai[k] = rng.integers(0, n - 1)
            right = ai.copy()
            right[k] += 1
            el, er = mesh.element_index(ai), mesh.element_index(right)
            t = rng.random(d)
            tl, tr = t.copy(), t.copy()
            tl[k], tr[k] = 1.0, 0.0
            vl = tensor_values([basis(np.array([tl[j]])) for j in range(d)]) @ blocks[el]
            vr = tensor_values([basis(np.array([tr[j]])) for j in range(d)]) @ blocks[er]
            worst = max(worst, float(abs(vl[0] - vr[0])))
    return worst
