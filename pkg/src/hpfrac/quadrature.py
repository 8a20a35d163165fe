"""1D rules and Lagrange bases on the unit interval [0, 1].

Every rule is stored on [0, 1]; callers push forward to their own intervals.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

MAX_DEGREE = 32
_NEWTON_MAXIT = 100
_NEWTON_TOL = 1e-14


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadRule1D:
    points: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return len(self.points)

    def on(self, a, b):
        """Points and weights pushed forward to [a, b]."""
        return a + (b - a) * self.points, (b - a) * self.weights


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)
    return arrays


def _legendre(n, x):
    """P_n(x) and P_{n-1}(x) by the three-term recurrence."""
    p0 = np.ones_like(x)
    if n == 0:
        return p0, np.zeros_like(x)
    p1 = x.copy()
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    return p1, p0


@lru_cache(maxsize=None)
def gll_rule(q):
    """Gauss-Lobatto-Legendre rule with q + 1 points (endpoints included)."""
    q = int(q)
    if q < 1:
        raise ValueError(f"GLL degree must be >= 1, got {q}")
    if q > MAX_DEGREE:
        raise ValueError(f"GLL degree capped at {MAX_DEGREE}, got {q}")
    # Chebyshev-Gauss-Lobatto start; Newton on (1 - x^2) P_q'(x) via
    # x P_q - P_{q-1} which shares its roots.
    x = -np.cos(np.pi * np.arange(q + 1) / q)
    for _ in range(_NEWTON_MAXIT):
        p, pm1 = _legendre(q, x)
        dx = (x * p - pm1) / ((q + 1) * p)
        x = x - dx
        if np.max(np.abs(dx)) < _NEWTON_TOL:
            break
    else:
        raise QuadratureError(f"GLL Newton iteration did not converge for q={q}")
    x[0], x[-1] = -1.0, 1.0
    p, _ = _legendre(q, x)
    w = 2.0 / (q * (q + 1) * p**2)
    # symmetrize against roundoff
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    pts, wts = (x + 1.0) / 2.0, w / 2.0
    return QuadRule1D(*_freeze(pts, wts))


@lru_cache(maxsize=None)
def gauss_rule(n):
    """Gauss-Legendre rule with n interior points on [0, 1]."""
    n = int(n)
    if n < 1:
        raise ValueError(f"Gauss rule needs n >= 1, got {n}")
    k = np.arange(1, n + 1)
    x = -np.cos(np.pi * (k - 0.25) / (n + 0.5))
    for _ in range(_NEWTON_MAXIT):
        p, pm1 = _legendre(n, x)
        dp = n * (x * p - pm1) / (x**2 - 1.0)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < _NEWTON_TOL:
            break
    else:
        raise QuadratureError(f"Gauss Newton iteration did not converge for n={n}")
    p, pm1 = _legendre(n, x)
    dp = n * (x * p - pm1) / (x**2 - 1.0)
    w = 2.0 / ((1.0 - x**2) * dp**2)
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    pts, wts = (x + 1.0) / 2.0, w / 2.0
    return QuadRule1D(*_freeze(pts, wts))


@lru_cache(maxsize=None)
def jacobi_rule(n, alpha):
    """Rule for integral_0^1 t**alpha g(t) dt; weights include t**alpha."""
    x, w = roots_jacobi(int(n), 0.0, float(alpha))
    pts = (x + 1.0) / 2.0
    wts = w / 2.0 ** (1.0 + alpha)
    return QuadRule1D(*_freeze(pts, wts))


def graded_rule(h, n, depth=20, ratio=0.5, min_points=2):
    """Composite Gauss rule on [0, h] refined geometrically toward 0.

    Cell j spans [h ratio^(j+1), h ratio^j] and uses max(min_points, n - j // 2)
    points; cells near the singular end carry less mass and need fewer.
    """
    pts, wts = [], []
    for j in range(depth):
        a, b = h * ratio ** (j + 1), h * ratio**j
        p, w = gauss_rule(max(min_points, n - j // 2)).on(a, b)
        pts.append(p)
        wts.append(w)
    p, w = gauss_rule(min_points).on(0.0, h * ratio**depth)
    pts.append(p)
    wts.append(w)
    return np.concatenate(pts[::-1]), np.concatenate(wts[::-1])


class LagrangeBasis1D:
    """Interpolatory basis on the GLL nodes of degree q, barycentric form."""

    def __init__(self, q):
        self.q = int(q)
        self.nodes = gll_rule(self.q).points
        x = self.nodes
        diff = x[:, None] - x[None, :]
        np.fill_diagonal(diff, 1.0)
        self.bary = 1.0 / np.prod(diff, axis=1)
        # D[k, j] = l_j'(x_k)
        D = (self.bary[None, :] / self.bary[:, None]) / diff
        np.fill_diagonal(D, 0.0)
        np.fill_diagonal(D, -D.sum(axis=1))
        self.diff_matrix = D

    def __call__(self, x):
        """Values l_j(x): array of shape x.shape + (q + 1,)."""
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1)
        d = flat[:, None] - self.nodes[None, :]
        hit = d == 0.0
        d[hit] = 1.0
        terms = self.bary[None, :] / d
        with np.errstate(divide="ignore", invalid="ignore"):  # hit rows are replaced below
            vals = terms / terms.sum(axis=1, keepdims=True)
        rows = hit.any(axis=1)
        if rows.any():
            vals[rows] = hit[rows].astype(float)
        return vals.reshape(x.shape + (self.q + 1,))

    def deriv(self, x):
        """Derivatives l_j'(x), same shape as __call__."""
        return self(x) @ self.diff_matrix

    def eval(self, j, x):
        return self(x)[..., j]

    def eval_deriv(self, j, x):
        return self.deriv(x)[..., j]


@lru_cache(maxsize=None)
def lagrange_basis(q):
    return LagrangeBasis1D(q)


def lagrange_eval(basis, j, x):
    return basis.eval(j, x)


def lagrange_deriv(basis, j, x):
    return basis.eval_deriv(j, x)
