"""Closed-form 1D solution for f = 1 on (0, 1) and its energy."""

import math

import numpy as np


def _check(s):
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0, 1), got {s}")


def solution_constant(s):
    """c_s = sqrt(pi) / (4^s Gamma(s + 1/2) Gamma(s + 1))."""
    _check(s)
    return math.exp(0.5 * math.log(math.pi) - 2 * s * math.log(2.0)
                    - math.lgamma(s + 0.5) - math.lgamma(s + 1.0))


def exact_solution_1d(s):
    """u(x) = c_s (x (1 - x))^s, vectorized; zero outside [0, 1]."""
    c = solution_constant(s)

    def u(x):
        x = np.asarray(x, dtype=float)
        inside = (x > 0.0) & (x < 1.0)
        xc = np.where(inside, x, 0.5)
        return np.where(inside, c * (xc * (1.0 - xc)) ** s, 0.0)

    return u


def exact_energy_1d(s):
    """a(u, u) = <1, u> = sqrt(pi) Gamma(s + 1) / (4^s Gamma(s + 1/2) Gamma(2s + 2))."""
    _check(s)
    return math.exp(0.5 * math.log(math.pi) + math.lgamma(s + 1.0) - 2 * s * math.log(2.0)
                    - math.lgamma(s + 0.5) - math.lgamma(2 * s + 2.0))
