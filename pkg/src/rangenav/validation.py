"""Input validation helpers shared by the estimators and the CLI."""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .so3 import rotation_defect

SENSOR_COLUMNS = ("omega_x", "omega_y", "omega_z", "acc_x", "acc_y", "acc_z", "mag_x", "mag_y", "mag_z", "range")


def check_sensor_array(X: ArrayLike) -> NDArray:
    """Validate a sensor table with columns ``omega(3), a(3), m(3), d`` and return it as float."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(SENSOR_COLUMNS):
        raise ValueError(f"expected a 2-D array with {len(SENSOR_COLUMNS)} columns, got shape {X.shape}")
    if len(X) < 2:
        raise ValueError("at least two samples are required")
    if not np.all(np.isfinite(X)):
        raise ValueError("sensor array contains non-finite values")
    if np.any(X[:, 9] < 0):
        raise ValueError("ranges must be non-negative")
    return X


def check_time_grid(t: ArrayLike | None, n: int, dt: float | None = None, rtol: float = 1e-9) -> NDArray:
    """Return a uniform, strictly increasing time grid of length `n`.

    When `t` is None the grid ``0, dt, ..., (n - 1) dt`` is built from `dt`.
    """
    if t is None:
        if dt is None or not dt > 0:
            raise ValueError("either t or a positive dt is required")
        return dt * np.arange(n)
    t = np.asarray(t, dtype=float).reshape(-1)
    if len(t) != n:
        raise ValueError(f"time grid has {len(t)} samples, expected {n}")
    steps = np.diff(t)
    if np.any(steps <= 0):
        raise ValueError("time grid must be strictly increasing")
    if np.max(np.abs(steps - steps[0])) > rtol * max(steps[0], 1.0) + 1e-12:
        raise ValueError("time grid must be uniform")
    return t


def check_vector3(v: ArrayLike, name: str) -> NDArray:
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be a finite 3-vector")
    return v


def check_rotation(R: ArrayLike, tol: float = 1e-9, name: str = "R") -> NDArray:
    R = np.asarray(R, dtype=float)
    if R.shape[-2:] != (3, 3):
        raise ValueError(f"{name} must have trailing shape (3, 3)")
    if rotation_defect(R) > tol:
        raise ValueError(f"{name} is not a rotation matrix within {tol}")
    return R


def check_spd(M: ArrayLike, name: str, semi: bool = False) -> NDArray:
    """Symmetric positive (semi-)definite check; returns the array."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square")
    if not np.allclose(M, M.T, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    low = np.linalg.eigvalsh(M)[0]
    if low < 0 or (not semi and low == 0):
        kind = "semi-definite" if semi else "definite"
        raise ValueError(f"{name} must be positive {kind}")
    return M
