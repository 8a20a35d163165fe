import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

import oracles
from hpfrac.reference import exact_energy_1d, exact_solution_1d, solution_constant


def test_half_power_values():
    assert solution_constant(0.5) == pytest.approx(1.0, rel=1e-15)
    # c = 1, so u(1/2) = (1/4)^(1/2)
    assert exact_solution_1d(0.5)(0.5) == pytest.approx(0.5, rel=1e-15)
    assert exact_energy_1d(0.5) == pytest.approx(math.pi / 8, rel=1e-15)


def test_boundary_values_and_outside():
    u = exact_solution_1d(0.3)
    np.testing.assert_array_equal(u(np.array([-0.5, 0.0, 1.0, 1.5])), 0.0)


@pytest.mark.parametrize("s", [0.25, 0.75])
def test_energy_is_integral_of_solution(s):
    u = exact_solution_1d(s)
    # with the algebraic weight the remaining integrand is the constant c_s
    val = quad(lambda x: solution_constant(s), 0, 1, weight="alg", wvar=(s, s),
               epsabs=0, epsrel=1e-13)[0]
    assert exact_energy_1d(s) == pytest.approx(val, rel=1e-10)
    plain = quad(lambda x: float(u(x)), 0, 1, epsabs=0, epsrel=1e-12, limit=200)[0]
    assert exact_energy_1d(s) == pytest.approx(plain, rel=1e-10)


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75, 0.9])
def test_operator_applied_to_solution_is_one(s):
    xs = np.linspace(0.05, 0.95, 10)
    vals = [oracles.fractional_laplacian_1d(s, float(x)) for x in xs]
    np.testing.assert_allclose(vals, 1.0, atol=1e-5)


@pytest.mark.parametrize("s", [0.0, 1.0, -0.2])
def test_rejects_bad_order(s):
    with pytest.raises(ValueError):
        exact_energy_1d(s)
    with pytest.raises(ValueError):
        exact_solution_1d(s)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(1e-6, 1 - 1e-6))
def test_symmetric_and_positive(s, x):
    u = exact_solution_1d(s)
    assert u(x) == pytest.approx(float(u(1 - x)), rel=1e-12)
    assert exact_energy_1d(s) > 0 and u(x) > 0
