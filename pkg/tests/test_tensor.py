import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from thermovisco import tensor

finite = st.floats(-3.0, 3.0, allow_nan=False, allow_infinity=False)


@pytest.mark.parametrize("d", [2, 3])
def test_det_and_inverse_match_numpy(rng, d):
    M = rng.standard_normal((50, d, d)) + 2 * np.eye(d)
    np.testing.assert_allclose(tensor.det(M), np.linalg.det(M), rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(tensor.inverse(M), np.linalg.inv(M), rtol=1e-10, atol=1e-10)


@pytest.mark.parametrize("d", [2, 3])
@given(data=st.data())
@settings(max_examples=50, deadline=None)
def test_cofactor_identity(d, data):
    M = data.draw(arrays(float, (d, d), elements=finite))
    # M^T cof(M) = det(M) I holds for singular matrices too
    lhs = tensor.transpose(M) @ tensor.cofactor(M)
    np.testing.assert_allclose(lhs, tensor.det(M) * np.eye(d), atol=1e-9)


def test_cofactor_is_derivative_of_det(rng):
    M = rng.standard_normal((3, 3))
    h = 1e-6
    fd = np.zeros((3, 3))
    for i in range(3):
        for j in range(3):
            E = np.zeros((3, 3))
            E[i, j] = h
            fd[i, j] = (tensor.det(M + E) - tensor.det(M - E)) / (2 * h)
    np.testing.assert_allclose(tensor.cofactor(M), fd, atol=1e-8)


def test_singular_inverse_raises():
    with pytest.raises(tensor.SingularMatrixError):
        tensor.inverse(np.array([[1.0, 2.0], [2.0, 4.0]]))


def test_non_square_rejected():
    with pytest.raises(ValueError):
        tensor.det(np.zeros((2, 3)))


@pytest.mark.parametrize("d", [2, 3])
def test_random_rotations_are_proper(rng, d):
    Q = tensor.random_rotations(rng, 100, d)
    np.testing.assert_allclose(Q @ tensor.transpose(Q), np.broadcast_to(np.eye(d), Q.shape), atol=1e-13)
    np.testing.assert_allclose(tensor.det(Q), 1.0, atol=1e-13)


def test_rotation_2d_quarter_turn():
    np.testing.assert_allclose(tensor.rotation_2d(np.pi / 2) @ [1.0, 0.0], [0.0, 1.0], atol=1e-15)


def test_sym_trace_ddot_frobenius(rng):
    A = rng.standard_normal((4, 3, 3))
    S = tensor.sym(A)
    np.testing.assert_allclose(S, tensor.transpose(S))
    np.testing.assert_allclose(tensor.trace(A), np.trace(A, axis1=-2, axis2=-1))
    np.testing.assert_allclose(tensor.ddot(A, A), tensor.frobenius(A) ** 2)
    H = rng.standard_normal((4, 2, 2, 2))
    np.testing.assert_allclose(tensor.frobenius(H, rank=3), np.sqrt((H**2).sum(axis=(1, 2, 3))))
