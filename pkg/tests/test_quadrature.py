import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hpfrac.quadrature import (gauss_rule, gll_rule, graded_rule, jacobi_rule, lagrange_basis,
                               lagrange_deriv, lagrange_eval)


def test_gll_small_rules():
    r = gll_rule(1)
    np.testing.assert_allclose(r.points, [0, 1])
    np.testing.assert_allclose(r.weights, [0.5, 0.5])
    r = gll_rule(2)
    np.testing.assert_allclose(r.points, [0, 0.5, 1], atol=1e-15)
    np.testing.assert_allclose(r.weights, [1 / 6, 2 / 3, 1 / 6], rtol=1e-14)
    r = gll_rule(3)
    a = 1 / math.sqrt(5)
    np.testing.assert_allclose(r.points, [0, (1 - a) / 2, (1 + a) / 2, 1], atol=1e-15)
    np.testing.assert_allclose(r.weights, [1 / 12, 5 / 12, 5 / 12, 1 / 12], rtol=1e-14)


def test_gauss_small_rules():
    r = gauss_rule(1)
    np.testing.assert_allclose(r.points, [0.5])
    np.testing.assert_allclose(r.weights, [1.0])
    r = gauss_rule(2)
    c = 1 / (2 * math.sqrt(3))
    np.testing.assert_allclose(r.points, [0.5 - c, 0.5 + c], atol=1e-15)
    np.testing.assert_allclose(r.weights, [0.5, 0.5], rtol=1e-14)
    r = gauss_rule(3)
    assert abs(np.dot(r.weights, r.points**5) - 1 / 6) < 1e-14


@pytest.mark.parametrize("bad", [0, -1])
def test_rules_reject_bad_sizes(bad):
    with pytest.raises(ValueError):
        gll_rule(bad)
    with pytest.raises(ValueError):
        gauss_rule(bad)


def test_lagrange_examples():
    b1 = lagrange_basis(1)
    assert lagrange_eval(b1, 0, 0.3) == pytest.approx(0.7)
    assert lagrange_deriv(b1, 0, 0.3) == pytest.approx(-1.0)
    b2 = lagrange_basis(2)
    assert lagrange_eval(b2, 1, 0.25) == pytest.approx(0.75, abs=1e-15)
    x = np.linspace(0, 1, 13)
    np.testing.assert_allclose(lagrange_eval(b2, 1, x), 4 * x * (1 - x), atol=1e-14)


def test_jacobi_rule_weighted_moments():
    for alpha in (-0.5, 0.0, 0.5, 1.3):
        r = jacobi_rule(6, alpha)
        for k in range(12):
            assert np.dot(r.weights, r.points**k) == pytest.approx(1 / (k + alpha + 1), rel=1e-13)


def test_graded_rule_handles_endpoint_singularity():
    p, w = graded_rule(1.0, 12, depth=30)
    assert np.all(p > 0) and np.all(np.diff(p) > 0)
    # sqrt has an unbounded derivative at 0
    assert np.dot(w, np.sqrt(p)) == pytest.approx(2 / 3, rel=1e-13)
    assert np.dot(w, p ** -0.5) == pytest.approx(2.0, rel=1e-4)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 20))
def test_gauss_exactness(n):
    r = gauss_rule(n)
    assert abs(r.weights.sum() - 1) < 1e-13
    for k in range(2 * n):
        assert abs(np.dot(r.weights, r.points**k) - 1 / (k + 1)) < 1e-12 / (k + 1) + 1e-15


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 20))
def test_gll_exactness_and_symmetry(q):
    r = gll_rule(q)
    assert len(r) == q + 1 and r.points[0] == 0 and r.points[-1] == 1
    assert abs(r.weights.sum() - 1) < 1e-13
    assert np.all(r.weights > 0)
    np.testing.assert_allclose(r.points, 1 - r.points[::-1], atol=1e-15)
    np.testing.assert_allclose(r.weights, r.weights[::-1], rtol=1e-14)
    for k in range(2 * q):
        assert abs(np.dot(r.weights, r.points**k) - 1 / (k + 1)) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**31))
def test_lagrange_basis_properties(q, seed):
    b = lagrange_basis(q)
    x = np.random.default_rng(seed).random(50)
    np.testing.assert_allclose(b(b.nodes), np.eye(q + 1), atol=1e-12)
    vals = b(x)
    np.testing.assert_allclose(vals.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(b.deriv(x).sum(axis=1), 0.0, atol=1e-9)
    # product form
    nodes = b.nodes
    direct = np.ones((len(x), q + 1))
    for j in range(q + 1):
        for m in range(q + 1):
            if m != j:
                direct[:, j] *= (x - nodes[m]) / (nodes[j] - nodes[m])
    np.testing.assert_allclose(vals, direct, atol=1e-12)
