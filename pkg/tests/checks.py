"""Structural checks shared by the mesh tests and the acceptance suite."""

import numpy as np

from hpfrac.mesh import Layer, build_cutoff, elements_adjacent


def check_layers_and_cutoff(mesh):
    """Layer partition and cutoff properties, sampled at vertices and barycenters."""
    tags = mesh.layers
    assert set(np.unique(tags)) <= {0, 1, 2}
    assert abs(sum(e.volume for e in mesh) - 1.0) < 1e-12
    n = mesh.n_axis
    ai = mesh.axis_indices
    touching = np.any((ai == 0) | (ai == n - 1), axis=1)
    assert np.array_equal(touching, tags == Layer.L0)
    l0 = [e for e in mesh if e.layer == Layer.L0]
    for e in mesh:
        if e.layer == Layer.L0:
            continue
        near = any(elements_adjacent(e, b) for b in l0)
        assert (e.layer == Layer.L1) == near
    g = build_cutoff(mesh)
    for e in mesh:
        pts = np.vstack([e.vertices(), e.barycenter[None, :]])
        vals = g(pts)
        assert np.all(vals >= 0.0) and np.all(vals <= 1.0)
        if e.layer == Layer.L0:
            assert np.all(vals == 0.0)
        elif e.layer == Layer.INT:
            assert np.all(vals == 1.0)
    # zero on the boundary of the cube
    rng = np.random.default_rng(1)
    p = rng.random((50, mesh.dim))
    p[np.arange(50), rng.integers(0, mesh.dim, 50)] = rng.integers(0, 2, 50)
    assert np.all(g(p) == 0.0)
