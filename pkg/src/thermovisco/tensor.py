"""Small dense tensor algebra for d = 2, 3.

Every function accepts stacked arrays: a matrix argument has shape
``(..., d, d)`` and the leading axes are treated as a batch, so the same
routines serve single points and whole grids.
"""

from __future__ import annotations

import numpy as np


class SingularMatrixError(ValueError):
    """Raised when inverting a matrix whose determinant vanishes."""


def _check_square(M: np.ndarray) -> int:
    if M.ndim < 2 or M.shape[-1] != M.shape[-2] or M.shape[-1] not in (2, 3):
        raise ValueError(f"expected (..., d, d) with d in (2, 3), got shape {M.shape}")
    return M.shape[-1]


def identity(d: int, batch: tuple[int, ...] = ()) -> np.ndarray:
    return np.broadcast_to(np.eye(d), (*batch, d, d)).copy()


def det(M) -> np.ndarray:
    """Determinant by the closed 2x2 / 3x3 formula."""
    M = np.asarray(M, dtype=float)
    d = _check_square(M)
    if d == 2:
        return M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    return (
        M[..., 0, 0] * (M[..., 1, 1] * M[..., 2, 2] - M[..., 1, 2] * M[..., 2, 1])
        - M[..., 0, 1] * (M[..., 1, 0] * M[..., 2, 2] - M[..., 1, 2] * M[..., 2, 0])
        + M[..., 0, 2] * (M[..., 1, 0] * M[..., 2, 1] - M[..., 1, 1] * M[..., 2, 0])
    )


def cofactor(M) -> np.ndarray:
    """Cofactor matrix, so that ``M @ cofactor(M).T == det(M) * I``.

    This is also the derivative of ``det`` with respect to ``M``.
    """
    M = np.asarray(M, dtype=float)
    d = _check_square(M)
    C = np.empty_like(M)
    if d == 2:
        C[..., 0, 0] = M[..., 1, 1]
        C[..., 0, 1] = -M[..., 1, 0]
        C[..., 1, 0] = -M[..., 0, 1]
        C[..., 1, 1] = M[..., 0, 0]
        return C
    rows = [M[..., 0, :], M[..., 1, :], M[..., 2, :]]
    C[..., 0, :] = np.cross(rows[1], rows[2])
    C[..., 1, :] = np.cross(rows[2], rows[0])
    C[..., 2, :] = np.cross(rows[0], rows[1])
    return C


def transpose(M) -> np.ndarray:
    return np.swapaxes(np.asarray(M), -1, -2)


def sym(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    return 0.5 * (A + transpose(A))


def trace(M) -> np.ndarray:
    return np.trace(np.asarray(M), axis1=-2, axis2=-1)


def matmul(A, B) -> np.ndarray:
    return np.matmul(A, B)


def inverse(M) -> np.ndarray:
    """Inverse via Cramer's rule; raises :class:`SingularMatrixError`."""
    M = np.asarray(M, dtype=float)
    J = det(M)
    scale = np.max(np.abs(M), axis=(-2, -1)) ** M.shape[-1]
    bad = ~(np.abs(J) > 1e-300 + 1e-14 * scale)
    if np.any(bad):
        idx = np.argwhere(np.atleast_1d(bad))[0]
        raise SingularMatrixError(f"singular matrix at batch index {tuple(idx)}")
    return transpose(cofactor(M)) / J[..., None, None]


def frobenius(X, rank: int = 2) -> np.ndarray:
    """Frobenius norm over the trailing ``rank`` axes (2 for matrices, 3 for Tensor3)."""
    X = np.asarray(X, dtype=float)
    axes = tuple(range(-rank, 0))
    return np.sqrt(np.sum(X * X, axis=axes))


def ddot(A, B) -> np.ndarray:
    """Full contraction ``A : B`` over the two trailing axes."""
    return np.sum(np.asarray(A) * np.asarray(B), axis=(-2, -1))


def rotation_2d(angle) -> np.ndarray:
    angle = np.asarray(angle, dtype=float)
    c, s = np.cos(angle), np.sin(angle)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def rotation_from_quaternion(q) -> np.ndarray:
    """Rotation matrices from (not necessarily normalized) quaternions ``(..., 4)``."""
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return np.stack(
        [
            np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)], -1),
            np.stack([2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)], -1),
            np.stack([2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)], -1),
        ],
        -2,
    )


def random_rotations(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """Uniform samples on SO(d): uniform angle in 2-D, uniform quaternion in 3-D."""
    if d == 2:
        return rotation_2d(rng.uniform(0.0, 2.0 * np.pi, size=n))
    return rotation_from_quaternion(rng.standard_normal((n, 4)))
