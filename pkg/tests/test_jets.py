import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finsler_lab import jets
from finsler_lab.expressions import Expression, ExpressionError

coord = st.floats(-2.0, 2.0, allow_nan=False)


def _field(p):
    x1, x2, v1, v2 = p
    return jets.sin(x1) * jets.exp(x2) * v1 + jets.sqrt(v1 * v1 + v2 * v2) / (1.0 + x1 * x1)


def _analytic(p):
    """Hand-derived value, gradient and Hessian of ``_field``."""
    x1, x2, v1, v2 = p
    n = math.hypot(v1, v2)
    q = 1.0 + x1 * x1
    s, c, e = math.sin(x1), math.cos(x1), math.exp(x2)
    val = s * e * v1 + n / q
    dq = 2 * x1
    g = np.array([c * e * v1 - n * dq / q ** 2, s * e * v1, s * e + v1 / (n * q), v2 / (n * q)])
    H = np.zeros((4, 4))
    H[0, 0] = -s * e * v1 - n * (2 / q ** 2 - 2 * dq * dq / q ** 3)
    H[0, 1] = H[1, 0] = c * e * v1
    H[0, 2] = H[2, 0] = c * e - v1 / n * dq / q ** 2
    H[0, 3] = H[3, 0] = -v2 / n * dq / q ** 2
    H[1, 1] = s * e * v1
    H[1, 2] = H[2, 1] = s * e
    H[2, 2] = v2 * v2 / (n ** 3 * q)
    H[3, 3] = v1 * v1 / (n ** 3 * q)
    H[2, 3] = H[3, 2] = -v1 * v2 / (n ** 3 * q)
    return val, g, H


@settings(max_examples=60, deadline=None)
@given(coord, coord, coord, coord)
def test_jet_matches_hand_derivatives(x1, x2, v1, v2):
    if math.hypot(v1, v2) < 1e-2:
        return
    p = np.array([x1, x2, v1, v2])
    rec = jets.eval_jet2(_field, p)
    val, g, H = _analytic(p)
    scale = 1.0 + abs(val) + np.abs(H).max()
    assert abs(rec.value - val) <= 1e-12 * scale
    np.testing.assert_allclose(rec.gradient, g, atol=1e-11 * scale)
    np.testing.assert_allclose(rec.hessian, H, atol=1e-10 * scale)


def test_block_accessors():
    rec = jets.eval_jet2(_field, [0.3, -0.2, 0.7, 0.4])
    assert rec.hess_xix.shape == (2, 2)
    np.testing.assert_array_equal(rec.hess_xix, rec.hessian[2:, :2])
    np.testing.assert_array_equal(rec.grad_xi, rec.gradient[2:])


@pytest.mark.parametrize("h", [1e-4, 1e-5])
def test_finite_difference_crosscheck(h):
    assert jets.fd_crosscheck(_field, [0.3, -0.2, 0.7, 0.4], h) < 1e-5


def test_fd_crosscheck_rejects_bad_step():
    with pytest.raises(ValueError):
        jets.fd_crosscheck(_field, [0.3, -0.2, 0.7, 0.4], 0.0)


def test_zero_section_rejected():
    with pytest.raises(jets.JetEvaluationError):
        jets.eval_jet2(_field, [0.1, 0.2, 0.0, 0.0])


def test_nonfinite_derivative_names_the_pair():
    # sqrt of x1^2 has an infinite second derivative at x1 = 0
    with np.errstate(all="ignore"), pytest.raises(jets.JetEvaluationError, match="x1"):
        jets.eval_jet2(lambda p: jets.sqrt(p[0] * p[0] * p[0]) + p[2], [0.0, 0.0, 1.0, 0.0])


def test_complex_step_gives_third_derivative():
    # d/dx1 of the xi1-xi1 Hessian entry of x1^3 xi1^2 is 6 x1^2
    f = lambda p: p[0] ** 3 * p[2] * p[2]  # noqa: E731
    x1 = 0.7
    p = np.array([x1 + 1e-30j, 0.0, 1.0, 0.0])
    rec = jets.eval_jet2(f, p)
    assert math.isclose(np.imag(rec.hessian[2, 2]) / 1e-30, 6 * x1 ** 2, rel_tol=1e-13)


def test_batched_weighted_sum_is_quadrature():
    # integral over t in [0, 1] of x1 * t^2 -> x1 / 3, as a jet
    t, w = np.polynomial.legendre.leggauss(8)
    t, w = 0.5 * (t + 1), 0.5 * w
    X = jets.seed([2.0, 0.0, 1.0, 0.0])
    J = (X[0] * (t * t)).weighted_sum(w)
    assert math.isclose(J.v, 2.0 / 3.0, rel_tol=1e-14)
    assert math.isclose(J.g[0], 1.0 / 3.0, rel_tol=1e-14)


def test_compose_matches_direct_chain_rule():
    X = jets.seed([0.4, 1.1, 0.3, -0.2])
    a, b = X[0] * X[2], X[1] + X[3]
    direct = jets.sin(a) * b
    va, vb = a.v, b.v
    f0 = math.sin(va) * vb
    f1 = np.array([math.cos(va) * vb, math.sin(va)])
    f2 = np.array([[-math.sin(va) * vb, math.cos(va)], [math.cos(va), 0.0]])
    composed = jets.compose(f0, f1, f2, [a, b])
    np.testing.assert_allclose(composed.g, direct.g, atol=1e-15)
    np.testing.assert_allclose(composed.H, direct.H, atol=1e-15)


def test_expression_parser_and_rejection():
    e = Expression("sqrt(xi1^2 + xi2^2) * exp(x1)", ("x1", "x2", "xi1", "xi2"))
    rec = jets.eval_jet2(lambda p: e(*p), [0.5, 0.0, 3.0, 4.0])
    assert math.isclose(rec.value, 5 * math.exp(0.5), rel_tol=1e-14)
    with pytest.raises(ExpressionError):
        Expression("__import__('os')", ("x1",))
    with pytest.raises(ExpressionError):
        Expression("x1 + y", ("x1",))
