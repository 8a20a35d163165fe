"""Dense Galerkin system for the fractional Laplacian on an FeSpace."""

from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
import itertools
import logging
import math
import time

import numpy as np
import scipy.linalg
import scipy.sparse

from .kernel import (KernelParams, PairClass, QuadOrders, classify_boxes,
                     exterior_weight, far_pair_matrix, near_pair_matrix, _merge_map)
from .quadrature import gauss_rule, graded_rule
from .space import BOUNDARY, FeFunction, tensor_values

log = logging.getLogger(__name__)


class AssemblyError(RuntimeError):
    pass


class SolveError(RuntimeError):
    pass


@dataclass
class StiffnessSystem:
    space: object
    params: KernelParams
    matrix: np.ndarray
    load: np.ndarray
    orders: QuadOrders
    stats: dict = field(default_factory=dict)

    def dump_matrix(self, path):
        A = self.matrix
        with open(path, "w") as fh:
            for i in range(A.shape[0]):
                for j in range(i, A.shape[1]):
                    fh.write(f"{i} {j} {float(A[i, j])!r}\n")


# ---------------------------------------------------------------------------
# forcing


_FORCINGS = {}


def register_forcing(name, func):
    _FORCINGS[name] = func


def forcing(spec):
    """Resolve a forcing: a number, a callable, ``const:<v>`` or a registered name."""
    if callable(spec):
        return spec
    if isinstance(spec, (int, float)):
        v = float(spec)
        return lambda x: np.full(len(x), v)
    if isinstance(spec, str):
        if spec.startswith("const:"):
            return forcing(float(spec.split(":", 1)[1]))
        if spec in _FORCINGS:
            return _FORCINGS[spec]
    raise ValueError(f"unknown forcing {spec!r}")


register_forcing("one", lambda x: np.ones(len(x)))
register_forcing("sines", lambda x: np.prod(np.sin(np.pi * x), axis=1))


def load_vector(space, f, order=None):
    f = forcing(f)
    mesh, d = space.mesh, space.dim
    g = gauss_rule(order or space.q + 3)
    t = np.array(np.meshgrid(*[g.points] * d, indexing="ij")).reshape(d, -1).T
    w = np.ones(1)
    for _ in range(d):
        w = np.multiply.outer(w, g.weights).reshape(-1)
    phi = space.shape_values(t)
    F = np.zeros(space.N)
    for k, el in enumerate(mesh):
        vals = f(el.from_reference(t))
        loc = phi.T @ (w * vals) * el.volume
        dofs = space.element_dofs[k]
        live = dofs != BOUNDARY
        F[dofs[live]] += loc[live]
    return F


# ---------------------------------------------------------------------------
# exterior-weight mass term


def _distance_rule(a, b, n, depth, q):
    """Rule on [a, b] (0 <= a < b) for integrands singular at 0 like r^(-2s)."""
    if a <= 0.0:
        return graded_rule(b, n, depth=depth, min_points=q + 2)
    pts, wts = [], []
    lo = a
    while lo < b:
        hi = min(b, 2.0 * lo)
        if b - hi < 0.25 * (hi - lo):
            hi = b
        p, w = gauss_rule(n).on(lo, hi)
        pts.append(p)
        wts.append(w)
        lo = hi
    return np.concatenate(pts), np.concatenate(wts)


def _axis_rule(a, b, n, depth, q):
    """Rule on [a, b] graded toward whichever of 0 / 1 is nearer, split at 1/2."""
    parts = []
    if a < 0.5:
        hi = min(b, 0.5)
        parts.append(_distance_rule(a, hi, n, depth, q))
    if b > 0.5:
        lo = max(a, 0.5)
        p, w = _distance_rule(1.0 - b, 1.0 - lo, n, depth, q)
        parts.append((1.0 - p, w))
    return np.concatenate([p for p, _ in parts]), np.concatenate([w for _, w in parts])


def _canonical(axis_index, n, symmetric):
    r, flip = [], []
    for e in axis_index:
        if symmetric and e > n - 1 - e:
            r.append(n - 1 - e)
            flip.append(True)
        else:
            r.append(e)
            flip.append(False)
    perm = sorted(range(len(r)), key=lambda k: r[k])
    return tuple(r[k] for k in perm), flip, perm


def _local_permutation(space, flip, perm):
    """Index into the canonical element's local matrix for each local index."""
    q, d = space.q, space.dim
    mi = space.local_indices.copy()
    for k in range(d):
        if flip[k]:
            mi[:, k] = q - mi[:, k]
    mi = mi[:, perm]
    return np.sum(mi * (q + 1) ** np.arange(d), axis=1)


def _mass_matrix_element(space, lower, widths, s, orders):
    d = space.dim
    rules = [_axis_rule(lower[k], lower[k] + widths[k], orders.mass, orders.mass_depth,
                        space.q) for k in range(d)]
    x = np.array(np.meshgrid(*[r[0] for r in rules], indexing="ij")).reshape(d, -1).T
    w = np.ones(1)
    for r in rules:
        w = np.multiply.outer(w, r[1]).reshape(-1)
    kap = exterior_weight(x, d, s)
    phi = space.shape_values((x - lower) / widths)
    return phi.T @ ((w * kap)[:, None] * phi)


def exterior_mass(space, s, orders):
    """Per-element matrices of int_K phi_a phi_b kappa, symmetry-reduced."""
    mesh = space.mesh
    sym = mesh.is_symmetric
    n = mesh.n_axis
    cache = {}
    out = []
    for el in mesh:
        key, flip, perm = _canonical(el.axis_index, n, sym)
        if key not in cache:
            x = mesh.nodes
            lower = np.array([x[i] for i in key])
            widths = np.array([x[i + 1] - x[i] for i in key])
            cache[key] = _mass_matrix_element(space, lower, widths, s, orders)
        idx = _local_permutation(space, flip, perm)
        out.append(cache[key][np.ix_(idx, idx)])
    return out, len(cache)


# ---------------------------------------------------------------------------
# element-pair loop


@lru_cache(maxsize=None)
def _cube_symmetries(d):
    """(flip, perm) pairs of the hyperoctahedral group acting on axes."""
    return [(flip, perm) for flip in itertools.product((False, True), repeat=d)
            for perm in itertools.permutations(range(d))]


def _transform_pair(hK, hKp, off, flip, perm):
    off = np.where(flip, hK - hKp - off, off)
    p = list(perm)
    return hK[p], hKp[p], off[p]


def _geometry_key(hK, hKp, off, use_symmetry=True):
    """Canonical shape of an element pair up to translation, scale and cube symmetry.

    Returns (key, scale, canonical widths/offset, swap, flip, perm); swap says
    the canonical first element is the actual second one.
    """
    best = None
    variants = [(False, hK, hKp, off)]
    if use_symmetry:
        variants.append((True, hKp, hK, -off))
        syms = _cube_symmetries(len(hK))
    else:
        syms = [((False,) * len(hK), tuple(range(len(hK))))]
    for swap, a, b, o in variants:
        for flip, perm in syms:
            ta, tb, to = _transform_pair(a, b, o, np.array(flip), perm)
            scale = ta[0]
            key = tuple(np.round(np.concatenate([ta, tb, to]) / scale, 11).tolist())
            if best is None or key < best[0]:
                best = (key, scale, (ta, tb, to), swap, flip, perm)
    return best


def _near_job(args):
    hK, hKp, off, q, s, n_near, eta = args
    return near_pair_matrix(hK, hKp, off, q, s, n_near, eta)


def _classify_pairs(space, orders):
    """Ordered list of unordered element pairs (i <= j) with their handling."""
    mesh = space.mesh
    lo, h, ai = mesh.lowers, mesh.widths, mesh.axis_indices
    diam = np.sqrt(np.sum(h * h, axis=1))
    near, far = [], np.zeros((len(mesh), len(mesh)), dtype=bool)
    for i in range(len(mesh)):
        j = np.arange(i, len(mesh))
        touching = np.all(np.abs(ai[j] - ai[i]) <= 1, axis=1)
        gap = np.maximum(0.0, np.maximum(lo[j] - (lo[i] + h[i]), lo[i] - (lo[j] + h[j])))
        dist = np.sqrt(np.sum(gap * gap, axis=1))
        admissible = (~touching) & (dist >= orders.eta_far * np.maximum(diam[i], diam[j]))
        for jj in j[~admissible]:
            near.append((i, int(jj)))
        far[i, j[admissible]] = True
        far[j[admissible], i] = True
    return near, far


def _assembly_operator(space):
    dofs = space.element_dofs.reshape(-1)
    live = dofs != BOUNDARY
    rows = np.nonzero(live)[0]
    return scipy.sparse.csr_matrix((np.ones(len(rows)), (rows, dofs[live])),
                                   shape=(len(dofs), space.N))


def _far_field(space, s, far, orders, A, C):
    """Add C * (diagonal + cross) blocks of all admissible pairs, row element by row element."""
    mesh, d, q = space.mesh, space.dim, space.q
    g = gauss_rule(orders.far)
    t = np.array(np.meshgrid(*[g.points] * d, indexing="ij")).reshape(d, -1).T
    wref = np.ones(1)
    for _ in range(d):
        wref = np.multiply.outer(wref, g.weights).reshape(-1)
    phi = space.shape_values(t)
    n_g, n_loc = phi.shape
    X = (mesh.lowers[:, None, :] + mesh.widths[:, None, :] * t[None, :, :])  # (M, n_g, d)
    W = wref[None, :] * np.prod(mesh.widths, axis=1)[:, None]               # (M, n_g)
    P = _assembly_operator(space)
    dofs = space.element_dofs
    power = -(d + 2 * s) / 2
    for i in range(len(mesh)):
        js = np.nonzero(far[i])[0]
        if len(js) == 0:
            continue
        Z = X[js].reshape(-1, d)
        wz = W[js].reshape(-1)
        r2 = np.zeros((n_g, len(Z)))
        for k in range(d):
            r2 += (X[i][:, k][:, None] - Z[None, :, k]) ** 2
        ker = r2**power * (W[i][:, None] * wz[None, :])
        diag = phi.T @ (ker.sum(axis=1)[:, None] * phi)
        T = (phi.T @ ker).reshape(n_loc, len(js), n_g)
        cross = np.einsum("ajg,gb->ajb", T, phi).reshape(n_loc, len(js) * n_loc)
        rows = (js[:, None] * n_loc + np.arange(n_loc)[None, :]).reshape(-1)
        glob = (P[rows].T @ cross.T).T  # (n_loc, N)
        di = dofs[i]
        live = di != BOUNDARY
        A[np.ix_(di[live], di[live])] += C * diag[np.ix_(live, live)]
        A[di[live]] -= C * glob[live]


def assemble(space, params, f=1.0, orders=None, workers=1):
    """Assemble A_ij = a(phi_j, phi_i) and F_i = <f, phi_i>."""
    if params.d != space.dim:
        raise AssemblyError("kernel dimension does not match the space")
    t0 = time.perf_counter()
    orders = (orders or QuadOrders()).resolve(space.q)
    mesh, q, d, s = space.mesh, space.q, space.dim, params.s
    C = params.C
    N = space.N
    A = np.zeros((N, N))
    near, far = _classify_pairs(space, orders)

    # near pairs: singular / nearly singular quadrature, cached by shape
    keyed, jobs, job_index = [], [], {}
    counts = Counter()
    for i, j in near:
        Ki, Kj = mesh[i], mesh[j]
        counts[classify_boxes(Ki.lower, Ki.widths, Kj.lower, Kj.widths).value] += 1
        key, scale, (ha, hb, off), swap, flip, perm = _geometry_key(
            Ki.widths, Kj.widths, Kj.lower - Ki.lower, orders.use_symmetry)
        if key not in job_index:
            job_index[key] = len(jobs)
            jobs.append((ha / scale, hb / scale, off / scale,
                         q, s, orders.near, orders.eta_near))
        keyed.append((i, j, job_index[key], scale, swap, flip, perm))
    if workers and workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_near_job, jobs))
    else:
        results = [_near_job(job) for job in jobs]
    dofs = space.element_dofs
    for i, j, idx, scale, swap, flip, perm in keyed:
        M, col = results[idx]
        first, second = (j, i) if swap else (i, j)
        loc = _local_permutation(space, flip, perm)
        g = np.full(M.shape[0], BOUNDARY)
        g[col[loc]] = dofs[second]
        g[loc] = dofs[first]
        live = g != BOUNDARY
        factor = C * scale ** (d - 2 * s) * (0.5 if i == j else 1.0)
        gl = g[live]
        A[np.ix_(gl, gl)] += factor * M[np.ix_(live, live)]
    t_near = time.perf_counter()

    n_far_pairs = int(np.count_nonzero(np.triu(far)))
    counts[PairClass.DISJOINT.value] += n_far_pairs
    _far_field(space, s, far, orders, A, C)
    t_far = time.perf_counter()

    masses, n_mass = exterior_mass(space, s, orders)
    for k, Mk in enumerate(masses):
        dk = dofs[k]
        live = dk != BOUNDARY
        A[np.ix_(dk[live], dk[live])] += C * Mk[np.ix_(live, live)]
    A = 0.5 * (A + A.T)
    F = load_vector(space, f)
    t1 = time.perf_counter()
    stats = {
        "pairs": dict(counts),
        "near_pairs": len(near),
        "far_pairs": n_far_pairs,
        "near_shapes": len(jobs),
        "mass_shapes": n_mass,
        "near_seconds": t_near - t0,
        "far_seconds": t_far - t_near,
        "mass_seconds": t1 - t_far,
        "seconds": t1 - t0,
    }
    log.info("assembled N=%d in %.2fs (%d near shapes)", N, t1 - t0, len(jobs))
    return StiffnessSystem(space, params, A, F, orders, stats)


def pair_entry(space, params, k, kp, i, j, orders=None):
    """Integral over K x K' of (phi_i(x) - phi_i(z)) (phi_j(x) - phi_j(z)) |x - z|^(-d-2s).

    ``k``, ``kp`` are element indices and ``i``, ``j`` global DOF indices;
    basis functions absent from both elements contribute zero.
    """
    orders = (orders or QuadOrders()).resolve(space.q)
    mesh, q, s = space.mesh, space.q, params.s
    K, Kp = mesh[k], mesh[kp]
    off = Kp.lower - K.lower
    touching = np.all(np.abs(np.subtract(K.axis_index, Kp.axis_index)) <= 1)
    gap = np.maximum(0.0, np.maximum(Kp.lower - K.upper, K.lower - Kp.upper))
    diam = max(np.linalg.norm(K.widths), np.linalg.norm(Kp.widths))
    dk, dkp = space.element_dofs[k], space.element_dofs[kp]
    if touching or np.linalg.norm(gap) < orders.eta_far * diam:
        scale = K.widths[0]
        M, col = near_pair_matrix(K.widths / scale, Kp.widths / scale, off / scale,
                                  q, s, orders.near, orders.eta_near)
        M = M * scale ** (space.dim - 2 * s)
    else:
        M = far_pair_matrix(K.widths, Kp.widths, off, q, s, orders.far)
        col = space.n_local + np.arange(space.n_local)

    def coeffs(g):
        c = np.zeros(M.shape[0])
        c[:space.n_local][dk == g] = 1.0
        c[col[dkp == g]] = 1.0
        return c

    ci, cj = coeffs(i), coeffs(j)
    return float(ci @ M @ cj)


@dataclass
class Solution:
    u: FeFunction
    energy: float
    energy_quadratic: float
    residual: float
    seconds: float


def solve(system):
    """Cholesky solve; energy a(u_N, u_N) = F.u, cross-checked against u.A.u."""
    t0 = time.perf_counter()
    A, F = system.matrix, system.load
    if A.shape[0] == 0:
        return Solution(FeFunction(system.space, np.zeros(0)), 0.0, 0.0, 0.0, 0.0)
    try:
        factor = scipy.linalg.cho_factor(A, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        w = np.linalg.eigvalsh(A)
        raise SolveError(f"stiffness matrix is not SPD (min eigenvalue {w[0]:.3e}, "
                         f"N={A.shape[0]})") from exc
    u = scipy.linalg.cho_solve(factor, F)
    energy = float(F @ u)
    quad = float(u @ A @ u)
    nf = np.linalg.norm(F)
    res = float(np.linalg.norm(A @ u - F) / nf) if nf > 0 else 0.0
    if abs(energy - quad) > 1e-10 * max(abs(energy), 1e-300):
        log.warning("Galerkin energy mismatch: F.u=%r u.A.u=%r", energy, quad)
    return Solution(FeFunction(system.space, u), energy, quad, res,
                    time.perf_counter() - t0)
