from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_expression
from jetmech import derivatives as dv
from jetmech.derivatives import Dual2, ScalarField, fd_jet2, jacobian, jet2
from jetmech.expressions import parse


def test_polynomial_jet():
    f = ScalarField(lambda x: x[1] * x[1] * x[2], 3)
    j = jet2(f, [0, 2, 3])
    assert j.value == 12
    assert j.gradient.tolist() == [0, 12, 4]
    expected = np.zeros((3, 3))
    expected[1, 1] = 6
    expected[1, 2] = expected[2, 1] = 4
    assert np.array_equal(j.hessian, expected)


def test_sin_at_zero():
    j = jet2(ScalarField(lambda x: dv.sin(x[0]), 1), [0.0])
    assert (j.value, j.gradient[0], j.hessian[0, 0]) == (0.0, 1.0, 0.0)


def test_constant_field():
    j = jet2(ScalarField(lambda x: 5.0, 3), [1, 2, 3])
    assert j.value == 5
    assert not j.gradient.any() and not j.hessian.any()


def test_fd_oracle_examples():
    assert abs(fd_jet2(lambda x: x[0] ** 2, [3.0]).gradient[0] - 6) <= 1e-8
    assert abs(fd_jet2(lambda x: math.sin(x[0]), [0.0]).gradient[0] - 1) <= 1e-8
    lin = fd_jet2(lambda x: 2 * x[0] - 3 * x[1] + 1, [0.3, -0.7])
    assert np.max(np.abs(lin.hessian)) <= 1e-6


def test_fd_rejects_bad_step():
    with pytest.raises(ValueError):
        fd_jet2(lambda x: x[0], [1.0], h=0.0)


@pytest.mark.parametrize(
    "fn, deriv",
    [
        (dv.exp, lambda a: (math.exp(a), math.exp(a))),
        (dv.log, lambda a: (1 / a, -1 / a**2)),
        (dv.sqrt, lambda a: (0.5 / math.sqrt(a), -0.25 * a**-1.5)),
        (dv.cos, lambda a: (-math.sin(a), -math.cos(a))),
        (lambda u: dv.pow(u, 3.5), lambda a: (3.5 * a**2.5, 3.5 * 2.5 * a**1.5)),
        (lambda u: dv.pow(2.0, u), lambda a: (math.log(2) * 2**a, math.log(2) ** 2 * 2**a)),
        (lambda u: 1 / u, lambda a: (-1 / a**2, 2 / a**3)),
    ],
)
def test_elementary_derivatives(fn, deriv):
    a = 1.3
    j = jet2(ScalarField(lambda x: fn(x[0]), 1), [a])
    d1, d2 = deriv(a)
    assert j.gradient[0] == pytest.approx(d1, rel=1e-14)
    assert j.hessian[0, 0] == pytest.approx(d2, rel=1e-14)


def test_dual_pow_dual():
    f = ScalarField(lambda x: dv.pow(x[0], x[1]), 2)
    fd = fd_jet2(f, [1.7, 0.8])
    j = jet2(f, [1.7, 0.8])
    assert np.allclose(j.gradient, fd.gradient, atol=1e-8)
    assert np.allclose(j.hessian, fd.hessian, atol=1e-5)


def test_first_order_only_matches_jet():
    f = parse("q1*exp(v1) - sin(t)*v1/(2 + q1*q1)", 1, "lagrangian")
    x = [0.4, -1.1, 0.3]
    val, g = f.grad(x)
    j = f.jet2(x)
    assert val == j.value
    assert np.array_equal(g, j.gradient)


def test_division_by_zero_dual():
    with pytest.raises(ZeroDivisionError):
        jet2(ScalarField(lambda x: 1 / x[0], 1), [0.0])


def test_arity_checked():
    with pytest.raises(ValueError):
        ScalarField(lambda x: x[0], 2).jet2([1.0])


def test_variables_seed_identity():
    xs = Dual2.variables([1.0, 2.0, 3.0])
    assert np.array_equal(np.array([x.gradient() for x in xs]), np.eye(3))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_jet_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    names = ["t", "q1", "v1", "q2", "v2"]
    f = parse(random_expression(rng, names), 2, "lagrangian")
    x = rng.uniform(-1.5, 1.5, size=5)
    j, fd = jet2(f, x), fd_jet2(f, x)
    scale_g = max(1.0, float(np.max(np.abs(j.gradient))))
    scale_h = max(1.0, float(np.max(np.abs(j.hessian))))
    assert np.max(np.abs(j.gradient - fd.gradient)) / scale_g <= 1e-6
    assert np.max(np.abs(j.hessian - fd.hessian)) / scale_h <= 1e-4
    assert np.array_equal(j.hessian, j.hessian.T)


def test_jacobian_of_plain_map():
    m = lambda x: np.array([x[0] * x[1], dv.sin(x[0])], dtype=object)  # noqa: E731
    J = jacobian(m, [0.5, 2.0])
    assert np.allclose(J, [[2.0, 0.5], [math.cos(0.5), 0.0]], atol=0, rtol=1e-15)


def test_jacobian_identity():
    assert np.array_equal(jacobian(lambda x: x, [1.0, -2.0, 3.0]), np.eye(3))


def test_jacobian_defers_to_object():
    class Fixed:
        def jacobian(self, x):
            return np.full((2, 2), 7.0)

    assert np.array_equal(jacobian(Fixed(), [0, 0]), np.full((2, 2), 7.0))
