"""Distance functions, weighted norms, a Slobodeckij oracle and energy extrapolation."""

import bisect
from dataclasses import dataclass
import itertools
import math

import numpy as np
from scipy import integrate

from .quadrature import gauss_rule, gll_rule, jacobi_rule


# ---------------------------------------------------------------------------
# distances


@dataclass(frozen=True)
class DistanceField:
    """Distance to the boundary, or to the affine set {x_k = c_k for (k, c_k) in fixed}.

    A vertex fixes every coordinate, an edge all but one, a face one.
    """
    kind: str
    fixed: tuple = ()

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "boundary":
            return np.min(np.minimum(x, 1.0 - x), axis=-1)
        sq = sum((x[..., k] - c) ** 2 for k, c in self.fixed)
        return np.sqrt(sq)


BOUNDARY_DISTANCE = DistanceField("boundary")


def vertex(v):
    return DistanceField("vertex", tuple(enumerate(float(c) for c in v)))


def edge(axes, values):
    """Edge of the cube where coordinates ``axes`` take ``values`` (d - 1 of them)."""
    return DistanceField("edge", tuple(zip(axes, map(float, values))))


def face(axis, value):
    return DistanceField("face", ((int(axis), float(value)),))


def distance(selector, x):
    """Evaluate a DistanceField (or the string "boundary") at points x."""
    if selector == "boundary":
        selector = BOUNDARY_DISTANCE
    return selector(x)


# ---------------------------------------------------------------------------
# weighted H^1_mu norm


def _doubling_rule(a, b, n):
    """Composite Gauss on [a, b], a > 0, with cells [a, 2a], [2a, 4a], ..."""
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


def _orthant_pieces(lo, hi):
    """Split a box at 1/2 along every axis; yield (lo, hi, near) with near[k] in {0, 1}."""
    per_axis = []
    for a, b in zip(lo, hi):
        parts = []
        if a < 0.5:
            parts.append((a, min(b, 0.5), 0))
        if b > 0.5:
            parts.append((max(a, 0.5), b, 1))
        per_axis.append(parts)
    for combo in itertools.product(*per_axis):
        yield (np.array([c[0] for c in combo]), np.array([c[1] for c in combo]),
               [c[2] for c in combo])


def _to_dist(a, b, near):
    # l = x (near 0) or 1 - x (near 1); returns the l-range
    return (a, b) if near == 0 else (1.0 - b, 1.0 - a)


def _from_dist(l, near):
    return l if near == 0 else 1.0 - l


def h1_mu_norm_sq(v, mu):
    """||r^mu grad v||^2 + ||r^(mu-1) v||^2 with r the distance to the boundary."""
    mu = float(mu)
    if not 0.0 <= mu < 1.0:
        raise ValueError(f"mu must lie in [0, 1), got {mu}")
    space = v.space
    mesh, q, d = space.mesh, space.q, space.dim
    blocks = v.element_blocks()
    n_in = q + 2
    n_out = q * d + d + 2
    g_in = gauss_rule(n_in)
    total = 0.0
    for el in mesh:
        block = blocks[el.index]
        if not np.any(block):
            continue
        for plo, phi, near in _orthant_pieces(el.lower, el.lower + el.widths):
            lrange = [_to_dist(plo[k], phi[k], near[k]) for k in range(d)]
            for i in range(d):
                # region where axis i carries the minimal distance
                r_lo = lrange[i][0]
                r_hi = min(min(lr[1] for lr in lrange), lrange[i][1])
                if r_hi <= r_lo:
                    continue
                cuts = sorted({r_lo, r_hi} | {lrange[j][0] for j in range(d)
                                              if j != i and r_lo < lrange[j][0] < r_hi})
                for a, b in zip(cuts[:-1], cuts[1:]):
                    if a == 0.0:
                        jr = jacobi_rule(n_out, 2.0 * mu)
                        r = b * jr.points
                        wr = b ** (1.0 + 2.0 * mu) * jr.weights
                        singular = True
                    else:
                        r, wr = _doubling_rule(a, b, n_out + 6)
                        singular = False
                    total += _region_sum(space, el, block, i, near, lrange, r, wr,
                                         singular, mu, g_in)
    return total


def _region_sum(space, el, block, i, near, lrange, r, wr, singular, mu, g_in):
    d = space.dim
    rules = []
    for j in range(d):
        if j == i:
            rules.append((r, wr))
            continue
        # l_j in [max(a_j, r), b_j]; Gauss nodes per outer node
        a = np.maximum(lrange[j][0], r)
        b = lrange[j][1]
        length = b - a
        pts = a[:, None] + length[:, None] * g_in.points[None, :]
        wts = length[:, None] * g_in.weights[None, :]
        rules.append((pts, wts))
    n_r = len(r)
    # build all points: outer index m, inner tensor over j != i
    others = [j for j in range(d) if j != i]
    n_o = len(g_in.points)
    combos = list(itertools.product(range(n_o), repeat=len(others)))
    L = np.empty((n_r, len(combos), d))
    W = np.repeat(wr[:, None], len(combos), axis=1)
    L[:, :, i] = r[:, None]
    for c, idx in enumerate(combos):
        for j, t in zip(others, idx):
            L[:, c, j] = rules[j][0][:, t]
            W[:, c] *= rules[j][1][:, t]
    x = np.empty_like(L)
    for k in range(d):
        x[:, :, k] = _from_dist(L[:, :, k], near[k])
    x = x.reshape(-1, d)
    W = W.reshape(-1)
    t = (x - el.lower) / el.widths
    vals = space.shape_values(t) @ block
    grads = np.einsum("pak,a->pk", space.shape_grads(t), block) / el.widths
    rr = np.repeat(r, len(combos))
    g2 = np.sum(grads * grads, axis=1)
    if singular:
        # weight r^(2 mu) already in W; v vanishes on the face, so v / r is polynomial
        return float(np.sum(W * (g2 + (vals / rr) ** 2)))
    return float(np.sum(W * (rr ** (2 * mu) * g2 + rr ** (2 * mu - 2) * vals**2)))


def h1_mu_norm(v, mu):
    return math.sqrt(h1_mu_norm_sq(v, mu))


# ---------------------------------------------------------------------------
# Slobodeckij seminorm oracle (adaptive, 1D)

ORACLE_MAX_DOFS = 200


def _local_polynomials(v):
    """Per element: power-series coefficients (highest first) in the local coordinate."""
    q = v.space.q
    nodes = gll_rule(q).points
    V = np.vander(nodes, q + 1)
    return [np.linalg.solve(V, blk).tolist() for blk in v.element_blocks()]


def _scalar_evaluator(v):
    x = v.space.mesh.nodes.tolist()
    polys = _local_polynomials(v)
    n = len(x) - 1

    def f(t):
        k = min(max(bisect.bisect_right(x, t) - 1, 0), n - 1)
        u = (t - x[k]) / (x[k + 1] - x[k])
        acc = 0.0
        for c in polys[k]:
            acc = acc * u + c
        return acc

    def df(t):
        k = min(max(bisect.bisect_right(x, t) - 1, 0), n - 1)
        h = x[k + 1] - x[k]
        u = (t - x[k]) / h
        acc = 0.0
        m = len(polys[k]) - 1
        for j, c in enumerate(polys[k][:-1]):
            acc = acc * u + (m - j) * c
        return acc / h

    def quotient(k, t, z):
        # (v(t) - v(z)) / (t - z) on element k by synthetic division, no cancellation
        h = x[k + 1] - x[k]
        u, w = (t - x[k]) / h, (z - x[k]) / h
        b = 0.0
        acc = 0.0
        for c in polys[k][:-1]:
            b = b * u + c
            acc = acc * w + b
        return acc / h

    return f, df, quotient


def slobodeckij_sq(v, t, extended=False, epsrel=1e-10):
    """Double integral of (v(x) - v(z))^2 |x - z|^(-1-2t) over Omega x Omega (d = 1).

    Adaptive nested quadrature with the diagonal singularity taken by
    algebraic endpoint weights; independent of the assembly quadrature.
    With ``extended`` the exterior part of the whole-line integral is added
    (v is zero outside Omega), i.e. the integral over R x R.
    """
    space = v.space
    if space.dim != 1:
        raise ValueError("the Slobodeckij oracle supports d = 1 only")
    if space.N > ORACLE_MAX_DOFS:
        raise ValueError(f"oracle refuses N = {space.N} > {ORACLE_MAX_DOFS}")
    t = float(t)
    if not 0.0 < t < 1.0:
        raise ValueError(f"t must lie in (0, 1), got {t}")
    f, _, quotient = _scalar_evaluator(v)
    nodes = space.mesh.nodes.tolist()
    p = 1.0 + 2.0 * t
    opts = dict(epsabs=0.0, epsrel=epsrel, limit=200)

    def inner(x):
        fx = f(x)
        acc = 0.0
        for k, (a, b) in enumerate(zip(nodes[:-1], nodes[1:])):
            if a < x < b:
                def g(z, k=k):
                    return quotient(k, x, z) ** 2
                # |x - z|^(1 - 2t) as algebraic weight at the endpoint z = x
                acc += integrate.quad(g, a, x, weight="alg", wvar=(0.0, 1.0 - 2 * t), **opts)[0]
                acc += integrate.quad(g, x, b, weight="alg", wvar=(1.0 - 2 * t, 0.0), **opts)[0]
            else:
                acc += integrate.quad(lambda z: (fx - f(z)) ** 2 / abs(x - z) ** p,
                                      a, b, **opts)[0]
        if extended:
            acc += 2.0 * fx * fx * (x ** (-2 * t) + (1.0 - x) ** (-2 * t)) / (2 * t)
        return acc

    total = 0.0
    for a, b in zip(nodes[:-1], nodes[1:]):
        total += integrate.quad(inner, a, b, **opts)[0]
    return total


# ---------------------------------------------------------------------------
# energy extrapolation


@dataclass
class EnergySequence:
    dofs: list
    energies: list

    def __post_init__(self):
        if len(self.dofs) != len(self.energies):
            raise ValueError("dofs and energies differ in length")

    def __len__(self):
        return len(self.energies)

    def is_monotone(self, slack=0.0):
        e = self.energies
        return all(e[k + 1] >= e[k] - slack for k in range(len(e) - 1))


@dataclass
class Extrapolation:
    ok: bool
    a_inf: float
    rho: float
    errors: np.ndarray
    message: str = ""


def aitken(a0, a1, a2):
    """Limit and ratio of a geometric tail through three consecutive terms."""
    d1, d2 = a1 - a0, a2 - a1
    rho = d2 / d1
    return a2 + d2 * rho / (1.0 - rho), rho


def extrapolate_energy(seq, slack=1e-13):
    """Aitken extrapolation on the last three energies.

    Failure (non-monotone input, converged tail, ratio outside (0, 1)) is
    reported through ``ok`` and ``message``; no number is invented.
    """
    if not isinstance(seq, EnergySequence):
        seq = EnergySequence(list(range(len(seq))), list(seq))
    e = np.asarray(seq.energies, dtype=float)
    if len(e) < 3:
        raise ValueError("extrapolation needs at least 3 energies")
    nan = np.full(len(e), np.nan)
    scale = slack * max(1.0, float(np.max(np.abs(e))))
    if not seq.is_monotone(scale):
        return Extrapolation(False, math.nan, math.nan, nan, "energies are not nondecreasing")
    a0, a1, a2 = e[-3:]
    if a1 - a0 <= scale and a2 - a1 <= scale:
        errs = np.sqrt(np.maximum(a2 - e, 0.0))
        return Extrapolation(False, float(a2), math.nan, errs, "converged tail; ratio undefined")
    if a1 - a0 <= scale:
        return Extrapolation(False, math.nan, math.nan, nan, "ratio undefined")
    a_inf, rho = aitken(a0, a1, a2)
    if not 0.0 < rho < 1.0:
        return Extrapolation(False, math.nan, float(rho), nan,
                             f"ratio {rho:.6g} outside (0, 1)")
    errs = np.sqrt(np.maximum(a_inf - e, 0.0))
    return Extrapolation(True, float(a_inf), float(rho), errs)
