"""The singular kernel |x - z|^{-(d + 2s)}: constants, exterior weight, pair integrals.

Pair integrals over K x K' are written in relative coordinates y = z - x.
Per axis the (x_k, z_k) rectangle splits into pieces on which y_k has a
fixed sign and the admissible x_k range is affine in y_k; on every piece
the shape-function part is polynomial in the position (integrated exactly)
and the kernel depends on y only. The resulting y-boxes are subdivided
until they are either well separated from y = 0 (tensor Gauss) or a cube
with a corner at y = 0 (Duffy pyramids, Gauss-Jacobi in the radius).
"""

from dataclasses import dataclass
from enum import Enum
import math

import numpy as np
from scipy.special import betainc, beta as beta_fn

from .quadrature import gauss_rule, jacobi_rule
from .space import tensor_values

_S_EPS = 1e-12


class KernelError(ValueError):
    pass


def _check_s(s):
    if not (_S_EPS < s < 1.0 - _S_EPS):
        raise KernelError(f"s must lie in (0, 1) away from the endpoints, got {s}")


def kernel_constant(d, s):
    """C(d, s) = 4^s s Gamma(s + d/2) / (pi^(d/2) Gamma(1 - s))."""
    _check_s(s)
    if d not in (1, 2, 3):
        raise KernelError(f"dimension must be 1, 2 or 3, got {d}")
    logc = (2 * s * math.log(2.0) + math.log(s) + math.lgamma(s + d / 2)
            - (d / 2) * math.log(math.pi) - math.lgamma(1.0 - s))
    return math.exp(logc)


@dataclass(frozen=True)
class KernelParams:
    d: int
    s: float

    @property
    def C(self):
        return kernel_constant(self.d, self.s)

    @property
    def power(self):
        return self.d + 2 * self.s


# ---------------------------------------------------------------------------
# exterior weight kappa(x) = int_{R^d minus [0,1]^d} |x - z|^{-d-2s} dz
#
# div_z((z - x)|z - x|^{-d-2s}) = -2s |z - x|^{-d-2s} turns kappa into face
# integrals: kappa = 1/(2s) sum_faces dist(x, face) int_face |x - z|^{-d-2s}.


_XI_POINTS = 10


def _half_line_2d(delta, a, s):
    """int_0^a (delta^2 + u^2)^(-1-s) du, closed form via the incomplete beta."""
    c2 = delta**2 / (delta**2 + a**2)
    full = 0.5 * beta_fn(s + 0.5, 0.5)
    return delta ** (-1.0 - 2 * s) * full * (1.0 - betainc(s + 0.5, 0.5, c2))


def _triangle_3d(delta, a, b, s):
    """Integral of (delta^2 + r^2)^(-3/2-s) over the triangle (0,0),(a,0),(a,b).

    Polar coordinates about the origin give a closed radial integral; the
    angle is traded for xi = asinh(v / a) along the far edge, which keeps
    all complex singularities at Im(xi) = pi/2, so unit cells with a fixed
    Gauss order converge to round-off.
    """
    out = np.zeros_like(delta)
    live = np.flatnonzero((a > 0.0) & (b > 0.0))
    if live.size == 0:
        return out
    dl, al, bl = delta[live], a[live], b[live]
    p = 0.5 + s
    xmax = np.arcsinh(bl / al)
    first = dl ** (-1.0 - 2 * s) * np.arctan2(bl, al)
    rule = gauss_rule(_XI_POINTS)
    acc = np.zeros_like(dl)
    sub = np.arange(len(dl))
    c = 0
    while sub.size:
        lo = float(c)
        hi = np.minimum(lo + 1.0, xmax[sub])
        xi = lo + np.multiply.outer(hi - lo, rule.points)
        ch = np.cosh(xi)
        dd, aa = dl[sub, None], al[sub, None]
        f = (dd**2 + (aa * ch) ** 2) ** (-p) / ch
        acc[sub] += (hi - lo) * (f @ rule.weights)
        c += 1
        sub = sub[xmax[sub] > c]
    out[live] = (first - acc) / (1.0 + 2 * s)
    return out


def _face_sum_3d(delta, u, v, s):
    """int over [0,1]^2 of (delta^2 + |w - (u, v)|^2)^(-3/2-s) dw."""
    total = np.zeros_like(delta)
    for a in (u, 1.0 - u):
        for b in (v, 1.0 - v):
            total += _triangle_3d(delta, a, b, s)
            total += _triangle_3d(delta, b, a, s)
    return total


def _kappa_3d(x, s):
    total = np.zeros(len(x))
    for k in range(3):
        others = [j for j in range(3) if j != k]
        u, v = x[:, others[0]], x[:, others[1]]
        for delta in (x[:, k], 1.0 - x[:, k]):
            total += delta * _face_sum_3d(delta, u, v, s)
    return total / (2 * s)


def _kappa_2d(x, s):
    total = np.zeros(len(x))
    for k in range(2):
        u = x[:, 1 - k]
        for delta in (x[:, k], 1.0 - x[:, k]):
            line = _half_line_2d(delta, u, s) + _half_line_2d(delta, 1.0 - u, s)
            total += delta * line
    return total / (2 * s)


def exterior_weight(x, d, s):
    """kappa(x) for interior points x of shape (npts, d) (or a single point)."""
    _check_s(s)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1 and d > 1 or x.ndim == 0
    x = x.reshape(-1, d)
    if np.any(x <= 1e-14) or np.any(x >= 1.0 - 1e-14):
        raise KernelError("exterior weight diverges at the boundary; point rejected")
    if d == 1:
        t = x[:, 0]
        out = (t ** (-2 * s) + (1.0 - t) ** (-2 * s)) / (2 * s)
    else:
        # kappa is invariant under the symmetries of the cube: evaluate once per orbit
        canon = np.sort(np.minimum(x, 1.0 - x), axis=1)
        uniq, inverse = np.unique(canon, axis=0, return_inverse=True)
        kap = _kappa_2d(uniq, s) if d == 2 else _kappa_3d(uniq, s)
        out = kap[inverse.reshape(-1)]
    return out[0] if single else out


# ---------------------------------------------------------------------------
# element pairs


class PairClass(Enum):
    IDENTICAL = "identical"
    FACE = "face"
    EDGE = "edge"
    VERTEX = "vertex"
    DISJOINT = "disjoint"


def _axis_relation(a0, h0, a1, h1, tol):
    if abs(a0 - a1) <= tol and abs(h0 - h1) <= tol:
        return "same"
    if abs(a0 + h0 - a1) <= tol or abs(a1 + h1 - a0) <= tol:
        return "touch"
    if a0 + h0 < a1 or a1 + h1 < a0:
        return "apart"
    raise KernelError("elements overlap without coinciding; not from one tensor mesh")


def classify_boxes(lo0, h0, lo1, h1, tol=1e-13):
    rel = [_axis_relation(lo0[k], h0[k], lo1[k], h1[k], tol) for k in range(len(lo0))]
    if "apart" in rel:
        return PairClass.DISJOINT
    d, shared = len(rel), rel.count("same")
    if shared == d:
        return PairClass.IDENTICAL
    if shared == 0:  # also covers 1D neighbours sharing a node
        return PairClass.VERTEX
    if shared == d - 1:
        return PairClass.FACE
    return PairClass.EDGE


def classify_pair(K, Kp):
    return classify_boxes(K.lower, K.widths, Kp.lower, Kp.widths)


def box_distance(lo0, h0, lo1, h1):
    gap = np.maximum(0.0, np.maximum(lo1 - (lo0 + h0), lo0 - (lo1 + h1)))
    return float(np.sqrt(np.sum(gap**2)))


@dataclass(frozen=True)
class QuadOrders:
    """Gauss orders; None means the degree-dependent defaults."""
    near: int = None
    far: int = None
    mass: int = None
    eta_near: float = 1.5
    eta_far: float = 1.5
    mass_depth: int = 20
    use_symmetry: bool = True

    def resolve(self, q):
        return QuadOrders(self.near or q + 6, self.far or q + 3, self.mass or q + 6,
                          self.eta_near, self.eta_far, self.mass_depth, self.use_symmetry)


class _Piece:
    """One axis piece: y = c + sgn u, u in [u0, u1]; x in [lo(y), hi(y)] (affine)."""
    __slots__ = ("c", "sgn", "u0", "u1", "lo", "hi")

    def __init__(self, c, sgn, u0, u1, lo, hi):
        self.c, self.sgn, self.u0, self.u1, self.lo, self.hi = c, sgn, u0, u1, lo, hi

    @property
    def origin(self):
        return self.c == 0.0 and self.u0 == 0.0

    def min_abs_y(self):
        return min(abs(self.c + self.sgn * self.u0), abs(self.c + self.sgn * self.u1))

    def split(self, at):
        return (_Piece(self.c, self.sgn, self.u0, at, self.lo, self.hi),
                _Piece(self.c, self.sgn, at, self.u1, self.lo, self.hi))


def _affine_range(h, b, hp, y):
    """Branch coefficients of lo(y) = max(0, b - y), hi(y) = min(h, b + hp - y) near y."""
    lo = (0.0, 0.0) if 0.0 >= b - y else (b, -1.0)
    hi = (h, 0.0) if h <= b + hp - y else (b + hp, -1.0)
    return lo, hi


def axis_pieces(h, b, hp):
    """Split {(x, z): x in [0, h], z in [b, b + hp]} by y = z - x."""
    lo_y, hi_y = b - h, b + hp
    cuts = {lo_y, hi_y}
    for c in (b, b + hp - h):
        if lo_y < c < hi_y:
            cuts.add(c)
    if lo_y < 0.0 < hi_y:
        cuts.add(0.0)
    cuts = sorted(cuts)
    scale = max(h, hp)
    pieces = []
    for y0, y1 in zip(cuts[:-1], cuts[1:]):
        if y1 - y0 <= 1e-14 * scale:
            continue
        lo, hi = _affine_range(h, b, hp, 0.5 * (y0 + y1))
        if abs(y1) <= 1e-14 * scale:  # negative side, measured away from 0
            pieces.append(_Piece(0.0, -1.0, 0.0, -y0, lo, hi))
        elif abs(y0) <= 1e-14 * scale:
            pieces.append(_Piece(0.0, 1.0, 0.0, y1, lo, hi))
        else:
            pieces.append(_Piece(y0, 1.0, 0.0, y1 - y0, lo, hi))
    return pieces


def _tensor_grid(rules):
    """Tensor product of 1D (points, weights) lists -> (n, d) points, (n,) weights."""
    pts = np.array(np.meshgrid(*[r[0] for r in rules], indexing="ij")).reshape(len(rules), -1).T
    wts = np.ones(1)
    for r in rules:
        wts = np.multiply.outer(wts, r[1]).reshape(-1)
    return pts, wts


class _YBoxRule:
    """Accumulates quadrature in u-space for products of axis pieces."""

    def __init__(self, d, s, q, n_near, eta, max_depth=60):
        self.d, self.s, self.q = d, s, q
        self.n = n_near
        self.n_rho = max(n_near, q * d + d // 2)
        self.eta = eta
        self.max_depth = max_depth
        self.tensor = []  # (box pieces, per-axis 1D (u, w) rules)
        self.scattered = []  # (box pieces, u points (n, d), weights (n,))

    def add(self, box):
        stack = [(list(box), 0)]
        while stack:
            b, depth = stack.pop()
            if depth > self.max_depth:
                raise KernelError("y-box subdivision exceeded the depth limit")
            if all(p.origin for p in b):
                lens = [p.u1 for p in b]
                lmin = min(lens)
                if max(lens) <= lmin * (1.0 + 1e-12):
                    self._duffy(b, lmin)
                    continue
                choices = []
                for p in b:
                    choices.append([p] if p.u1 <= lmin * (1 + 1e-12) else list(p.split(lmin)))
                for sub in _product(choices):
                    stack.append((sub, depth + 1))
                continue
            dist = math.sqrt(sum(p.min_abs_y() ** 2 for p in b))
            lens = [p.u1 - p.u0 for p in b]
            diam = math.sqrt(sum(v * v for v in lens))
            if dist >= self.eta * diam:
                self._gauss(b)
                continue
            big = max(lens)
            choices = []
            for p, ln in zip(b, lens):
                choices.append(list(p.split(p.u0 + 0.5 * ln)) if ln >= 0.5 * big else [p])
            for sub in _product(choices):
                stack.append((sub, depth + 1))

    def _gauss(self, b):
        r = gauss_rule(self.n)
        self.tensor.append((b, [r.on(p.u0, p.u1) for p in b]))

    def _duffy(self, b, lc):
        d, s = self.d, self.s
        jr = jacobi_rule(self.n_rho, 1.0 - 2 * s)
        rho, wr = jr.points, jr.weights
        # weights carry rho^(1 - 2s); divide it out and apply the rho^(d-1) Jacobian
        wr = wr * rho ** (d - 2 + 2 * s) * lc**d
        if d == 1:
            self.scattered.append((b, (lc * rho)[:, None], wr))
            return
        g = gauss_rule(self.n)
        eta, we = _tensor_grid([(g.points, g.weights)] * (d - 1))
        for k in range(d):
            u = np.empty((len(rho), len(eta), d))
            others = [j for j in range(d) if j != k]
            u[:, :, k] = rho[:, None]
            for m, j in enumerate(others):
                u[:, :, j] = rho[:, None] * eta[None, :, m]
            w = wr[:, None] * we[None, :]
            self.scattered.append((b, lc * u.reshape(-1, d), w.reshape(-1)))


def _product(choices):
    out = [[]]
    for c in choices:
        out = [o + [p] for o in out for p in c]
    return out


def _merge_map(hK, hKp, off, q, d, tol=1e-10):
    """Merged column of every K' node: its K twin if the nodes coincide, else a new one."""
    from .quadrature import gll_rule
    from .space import local_multi_indices
    nodes = gll_rule(q).points
    mi = local_multi_indices(q, d)
    pK = hK[None, :] * nodes[mi]
    pKp = off[None, :] + hKp[None, :] * nodes[mi]
    scale = max(np.max(hK), np.max(hKp))
    dist = np.max(np.abs(pKp[:, None, :] - pK[None, :, :]), axis=2)
    n = len(pK)
    col = np.empty(n, dtype=int)
    nxt = n
    for b in range(n):
        a = int(np.argmin(dist[b]))
        if dist[b, a] <= tol * scale:
            col[b] = a
        else:
            col[b] = nxt
            nxt += 1
    return nxt, col


def _axis_products(piece, y, h, b, hp, basis, tau, wtau):
    """1D x-integrals of the K/K' shape function products along one axis at offsets y.

    Returns VV, VW, WW of shape (len(y), q+1, q+1), e.g. VW[m, a, c] is the
    integral over the x-range of l_a(x / h) l_c((x + y - b) / hp).
    """
    lo = piece.lo[0] + piece.lo[1] * y
    length = piece.hi[0] + piece.hi[1] * y - lo
    x = lo[:, None] + length[:, None] * tau[None, :]
    v = basis(x / h)
    w = basis((x + y[:, None] - b) / hp)
    wt = length[:, None] * wtau[None, :]
    vv = np.einsum("mt,mta,mtc->mac", wt, v, v)
    vw = np.einsum("mt,mta,mtc->mac", wt, v, w)
    ww = np.einsum("mt,mta,mtc->mac", wt, w, w)
    return vv, vw, ww


def _kron_order(T, d):
    """(a0, c0, a1, c1, ...) -> matrix over flat tensor indices (axis 0 fastest)."""
    n = int(round(T.size ** (1.0 / (2 * d))))
    axes = [2 * k for k in reversed(range(d))] + [2 * k + 1 for k in reversed(range(d))]
    return T.transpose(axes).reshape(n**d, n**d)


def near_pair_matrix(hK, hKp, off, q, s, n_near, eta=1.0):
    """Pair matrix for K = [0, hK] and K' = off + [0, hKp] in the merged basis.

    Entry (m, m') is the integral of (V_m(x) - W_m(z)) (V_m'(x) - W_m'(z))
    |x - z|^{-d-2s} over K x K', where V_m / W_m are the shape functions of
    merged node m on K / K' (zero if the node is absent there). Returns the
    matrix and the merge map of K' nodes.

    For fixed y = z - x the x-domain is a box, so the four products VV, VW,
    WV, WW factor over axes; on tensor y-rules the y-sum factors as well.
    """
    from .quadrature import lagrange_basis
    hK, hKp, off = (np.asarray(v, dtype=float) for v in (hK, hKp, off))
    d = len(hK)
    basis = lagrange_basis(q)
    n_loc = (q + 1) ** d
    n_m, col = _merge_map(hK, hKp, off, q, d)
    per_axis = [axis_pieces(hK[k], off[k], hKp[k]) for k in range(d)]
    rule = _YBoxRule(d, s, q, n_near, eta)
    for box in _product(per_axis):
        rule.add(box)
    tg = gauss_rule(q + 1)
    power = d + 2 * s
    blocks = [np.zeros([q + 1] * (2 * d)) for _ in range(3)]

    for b, rules in rule.tensor:
        ys, facs = [], []
        for k, (p, (u, wu)) in enumerate(zip(b, rules)):
            y = p.c + p.sgn * u
            ys.append(y)
            facs.append(_axis_products(p, y, hK[k], off[k], hKp[k], basis, tg.points, tg.weights))
        grid = np.meshgrid(*ys, indexing="ij")
        W = sum(g * g for g in grid) ** (-power / 2)
        W = W * _outer([r[1] for r in rules])
        for j in range(3):
            T = W
            for k in range(d):
                T = np.tensordot(T, facs[k][j], axes=([0], [0]))
            blocks[j] += T

    letters = "ABCDEFGHIJKL"
    spec = ",".join("y" + letters[2 * k:2 * k + 2] for k in range(d))
    spec = "y," + spec + "->" + "".join(letters[2 * k:2 * k + 2] for k in range(d))
    for b, u, wu in rule.scattered:
        c = np.array([p.c for p in b])
        sg = np.array([p.sgn for p in b])
        y = c[None, :] + sg[None, :] * u
        wy = wu * np.sum(y * y, axis=1) ** (-power / 2)
        facs = [_axis_products(p, y[:, k], hK[k], off[k], hKp[k], basis, tg.points, tg.weights)
                for k, p in enumerate(b)]
        for j in range(3):
            blocks[j] += np.einsum(spec, wy, *[f[j] for f in facs], optimize=True)

    VV, VW, WW = (_kron_order(T, d) for T in blocks)
    M = np.zeros((n_m, n_m))
    M[:n_loc, :n_loc] += VV
    M[np.ix_(np.arange(n_loc), col)] -= VW
    M[np.ix_(col, np.arange(n_loc))] -= VW.T
    M[np.ix_(col, col)] += WW
    return 0.5 * (M + M.T), col


def _outer(vectors):
    out = vectors[0]
    for v in vectors[1:]:
        out = np.multiply.outer(out, v)
    return out


def far_pair_matrix(hK, hKp, off, q, s, n):
    """Plain tensor Gauss for well separated boxes, stacked basis [K | K']."""
    from .quadrature import lagrange_basis
    hK, hKp, off = (np.asarray(v, dtype=float) for v in (hK, hKp, off))
    d = len(hK)
    basis = lagrange_basis(q)
    g = gauss_rule(n)
    t, w = _tensor_grid([(g.points, g.weights)] * d)
    phi = tensor_values([basis(t[:, k]) for k in range(d)])
    x = t * hK
    z = off + t * hKp
    wx, wz = w * np.prod(hK), w * np.prod(hKp)
    r2 = np.sum((x[:, None, :] - z[None, :, :]) ** 2, axis=2)
    k = r2 ** (-(d + 2 * s) / 2) * wx[:, None] * wz[None, :]
    n_loc = phi.shape[1]
    M = np.zeros((2 * n_loc, 2 * n_loc))
    M[:n_loc, :n_loc] = phi.T @ (k.sum(axis=1)[:, None] * phi)
    M[n_loc:, n_loc:] = phi.T @ (k.sum(axis=0)[:, None] * phi)
    cross = phi.T @ k @ phi
    M[:n_loc, n_loc:] = -cross
    M[n_loc:, :n_loc] = -cross.T
    return M
