import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from corrrnn.numerics import (NumericError, ShapeError, elementwise, finite_diff_gradient,
                              make_rng, matmul, sigmoid)

from oracles import triple_loop_matmul


def test_matmul_identity():
    out = matmul(np.eye(2), np.array([[3.0, 4.0], [5.0, 6.0]]))
    assert np.array_equal(out, [[3, 4], [5, 6]])


def test_matmul_hand_case():
    assert matmul(np.array([[1.0, 2.0]]), np.array([[3.0], [4.0]]))[0, 0] == 11.0


def test_matmul_matches_triple_loop():
    rng = make_rng(3)
    A = rng.normal(size=(5, 4))
    B = rng.normal(size=(4, 3))
    ref = np.array(triple_loop_matmul(A.tolist(), B.tolist()))
    assert np.max(np.abs(matmul(A, B) - ref)) < 1e-12


def test_matmul_shape_error():
    with pytest.raises(ShapeError):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_elementwise_examples():
    assert elementwise("sigmoid", np.zeros((1, 1)))[0, 0] == 0.5
    assert elementwise("tanh", np.zeros((1, 1)))[0, 0] == 0.0
    assert abs(elementwise("sigmoid", np.array([[math.log(3)]]))[0, 0] - 0.75) < 1e-15
    assert np.array_equal(elementwise("scale", np.ones((2, 2)), factor=3.0), 3 * np.ones((2, 2)))


def test_elementwise_shape_error():
    with pytest.raises(ShapeError):
        elementwise("add", np.ones((2, 2)), np.ones((2, 3)))


def test_finite_diff_linear_and_quadratic():
    x = make_rng(0).normal(size=(3, 2))
    assert np.allclose(finite_diff_gradient(lambda v: v.sum(), x), 1.0, atol=1e-9)
    x = np.array([[1.0, 2.0]])
    g = finite_diff_gradient(lambda v: 0.5 * np.sum(v * v), x)
    assert np.allclose(g, [[1.0, 2.0]], atol=1e-9)
    assert np.array_equal(x, [[1.0, 2.0]])  # restored


def test_finite_diff_non_finite():
    with pytest.raises(NumericError), np.errstate(divide="ignore", invalid="ignore"):
        finite_diff_gradient(lambda v: np.log(v[0, 0]), np.array([[0.0]]))


# the open ranges hold wherever double precision can represent them:
# sigmoid rounds to 1.0 beyond v ~ 37, tanh to +-1.0 beyond |v| ~ 19
@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, (4,), elements=st.floats(-30, 30)))
def test_sigmoid_open_range(v):
    s = sigmoid(v)
    assert np.all((s > 0) & (s < 1))


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, (4,), elements=st.floats(-18, 18)))
def test_tanh_open_range(v):
    t = elementwise("tanh", v)
    assert np.all((t > -1) & (t < 1))


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, (4,), elements=st.floats(-1e300, 1e300)))
def test_sigmoid_stays_finite_and_closed(v):
    # in double precision the logistic saturates to exactly 0 or 1 past |v| ~ 37
    s = sigmoid(v)
    assert np.all(np.isfinite(s)) and np.all((s >= 0) & (s <= 1))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32))
def test_matmul_associative(seed):
    rng = make_rng(seed)
    A, B, C = rng.normal(size=(3, 4)), rng.normal(size=(4, 2)), rng.normal(size=(2, 5))
    assert np.max(np.abs(matmul(matmul(A, B), C) - matmul(A, matmul(B, C)))) < 1e-10


def test_rng_reproducible():
    a = make_rng(42).random(10_000)
    b = make_rng(42).random(10_000)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, make_rng(43).random(10_000))
