"""Rotation-group primitives on SO(3).

All functions accept a single vector/matrix or a stack of them along the
leading axes, following numpy broadcasting conventions.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray

ANTISYMMETRY_TOL = 1e-9
ROTATION_TOL = 1e-9


class NotAntisymmetric(ValueError):
    pass


class DegenerateMatrix(ValueError):
    pass


def skew(v: ArrayLike) -> NDArray:
    """Cross-product matrix ``[v]x`` such that ``skew(v) @ w == cross(v, w)``."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def vex(M: ArrayLike, tol: float = ANTISYMMETRY_TOL) -> NDArray:
    """Inverse of :func:`skew`.

    Raises
    ------
    NotAntisymmetric
        If ``||M + M^T||_F`` exceeds `tol` for any matrix in the stack.
    """
    M = np.asarray(M, dtype=float)
    asym = np.linalg.norm(M + np.swapaxes(M, -1, -2), axis=(-2, -1))
    if np.any(asym > tol):
        raise NotAntisymmetric(f"matrix is not antisymmetric (||M + M^T|| = {np.max(asym):.3e})")
    return np.stack([M[..., 2, 1], M[..., 0, 2], M[..., 1, 0]], axis=-1)


def psi_a(A: ArrayLike) -> NDArray:
    """vex of the antisymmetric part, ``0.5 * [a32 - a23, a13 - a31, a21 - a12]``."""
    A = np.asarray(A, dtype=float)
    return 0.5 * np.stack(
        [A[..., 2, 1] - A[..., 1, 2], A[..., 0, 2] - A[..., 2, 0], A[..., 1, 0] - A[..., 0, 1]],
        axis=-1,
    )


def exp_so3(v: ArrayLike) -> NDArray:
    """Rodrigues formula for the matrix exponential of ``[v]x``."""
    v = np.asarray(v, dtype=float)
    theta = np.linalg.norm(v, axis=-1)
    K = skew(v)
    K2 = K @ K
    small = theta < 1e-8
    safe = np.where(small, 1.0, theta)
    # second-order Taylor for the small-angle coefficients
    c1 = np.where(small, 1.0 - theta**2 / 6.0, np.sin(safe) / safe)
    c2 = np.where(small, 0.5 - theta**2 / 24.0, (1.0 - np.cos(safe)) / safe**2)
    return np.eye(3) + c1[..., None, None] * K + c2[..., None, None] * K2


def project_to_so3(M: ArrayLike) -> NDArray:
    """Nearest rotation in Frobenius norm (orthogonal polar factor).

    Raises
    ------
    DegenerateMatrix
        If ``det(M) <= 0`` or `M` is numerically rank deficient.
    """
    M = np.asarray(M, dtype=float)
    U, s, Vt = np.linalg.svd(M)
    if np.any(np.linalg.det(M) <= 0.0) or np.any(s[..., -1] <= 1e-12 * s[..., 0]):
        raise DegenerateMatrix("cannot project a matrix with non-positive determinant onto SO(3)")
    return U @ Vt


def rotation_angle(R: ArrayLike) -> NDArray | float:
    """Angle in ``[0, pi]`` of the rotation `R`."""
    R = np.asarray(R, dtype=float)
    c = (np.trace(R, axis1=-2, axis2=-1) - 1.0) / 2.0
    angle = np.arccos(np.clip(c, -1.0, 1.0))
    return float(angle) if np.ndim(angle) == 0 else angle


def is_rotation(R: ArrayLike, tol: float = ROTATION_TOL) -> bool:
    R = np.asarray(R, dtype=float)
    ortho = np.linalg.norm(np.swapaxes(R, -1, -2) @ R - np.eye(3), axis=(-2, -1))
    det = np.linalg.det(R)
    return bool(np.all(ortho <= tol) and np.all(np.abs(det - 1.0) <= tol))


def rotation_defect(R: ArrayLike) -> float:
    """Largest of ``||R^T R - I||_F`` and ``|det R - 1|`` over a stack."""
    R = np.asarray(R, dtype=float)
    ortho = np.linalg.norm(np.swapaxes(R, -1, -2) @ R - np.eye(3), axis=(-2, -1))
    det = np.abs(np.linalg.det(R) - 1.0)
    return float(max(np.max(ortho), np.max(det)))
