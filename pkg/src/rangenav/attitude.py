"""Complementary filter on SO(3) fed by the magnetometer and estimated gravity.

Every function here works on a single rotation or a stack ``(..., 3, 3)``, so
many initial attitudes can be propagated in one pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ._kernels import attitude_run
from .riccati import NonFiniteInput
from .so3 import exp_so3, project_to_so3, rotation_angle


def _cross(a, b):
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    return np.stack([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0], axis=-1)


@dataclass(frozen=True)
class AttitudeConfig:
    """Filter gains and inertial reference vectors.

    When ``rho2`` is None it defaults to ``1 / |g_I|^2`` so that the gravity
    and magnetometer terms have comparable weight.
    """

    k1: float = 2.0
    rho1: float = 1.0
    rho2: float | None = None
    m_I: NDArray = field(default_factory=lambda: np.array([1.0, 0.0, 1.0]) / np.sqrt(2.0))
    g_I: NDArray = field(default_factory=lambda: np.array([0.0, 0.0, 9.81]))

    def __post_init__(self):
        m_I = np.asarray(self.m_I, dtype=float).reshape(3)
        g_I = np.asarray(self.g_I, dtype=float).reshape(3)
        object.__setattr__(self, "m_I", m_I)
        object.__setattr__(self, "g_I", g_I)
        if self.rho2 is None:
            object.__setattr__(self, "rho2", 1.0 / float(g_I @ g_I))
        if not (self.k1 > 0 and self.rho1 > 0 and self.rho2 > 0):
            raise ValueError("k1, rho1 and rho2 must be positive")
        if np.linalg.norm(np.cross(m_I, g_I)) <= 1e-6:
            raise ValueError("m_I and g_I must not be collinear")

    @property
    def M_pi(self) -> NDArray:
        """``rho1 m m^T + rho2 g g^T``; pi-rotations about its eigenvectors are the bad equilibria."""
        return self.rho1 * np.outer(self.m_I, self.m_I) + self.rho2 * np.outer(self.g_I, self.g_I)


@dataclass(frozen=True)
class AttitudeEstimate:
    R_hat: NDArray
    t: float = 0.0


def correction_term(R_hat: ArrayLike, m_y_B: ArrayLike, g_B_hat: ArrayLike, config: AttitudeConfig) -> NDArray:
    """``sigma = rho1 (m_y x R_hat^T m_I) + rho2 (g_hat x R_hat^T g_I)``."""
    R_hat = np.asarray(R_hat, dtype=float)
    Rt = np.swapaxes(R_hat, -1, -2)
    m_pred = Rt @ config.m_I
    g_pred = Rt @ config.g_I
    m_y_B = np.asarray(m_y_B, dtype=float)
    g_B_hat = np.asarray(g_B_hat, dtype=float)
    return config.rho1 * _cross(m_y_B, m_pred) + config.rho2 * _cross(g_B_hat, g_pred)


def attitude_step(
    est: AttitudeEstimate, omega_y, m_y_B, g_B_hat, dt: float, config: AttitudeConfig
) -> AttitudeEstimate:
    """One exponential-map step ``R_hat <- R_hat exp(dt [omega_y + k1 sigma]x)``."""
    for v in (omega_y, m_y_B, g_B_hat):
        if not np.all(np.isfinite(v)):
            raise NonFiniteInput("attitude input contains non-finite values")
    R_hat = np.asarray(est.R_hat, dtype=float)
    sigma = correction_term(R_hat, m_y_B, g_B_hat, config)
    rate = np.asarray(omega_y, dtype=float) + config.k1 * sigma
    return AttitudeEstimate(project_to_so3(R_hat @ exp_so3(dt * rate)), est.t + dt)


def attitude_error(R: ArrayLike, R_hat: ArrayLike):
    """Angle of the right-invariant error ``R R_hat^T``."""
    return rotation_angle(np.asarray(R) @ np.swapaxes(np.asarray(R_hat), -1, -2))


def run_attitude(
    t: NDArray, omega_y: NDArray, m_y_B: NDArray, g_B_hat: NDArray, config: AttitudeConfig, R_hat0: ArrayLike
) -> NDArray:
    """Attitude history for each sample; `R_hat0` may be a stack of initial estimates.

    Returns an array of shape ``(n,) + R_hat0.shape``. Sample k's measurements
    drive the step from ``t[k]`` to ``t[k + 1]``.
    """
    R_hat0 = np.asarray(R_hat0, dtype=float)
    batch = R_hat0.reshape(-1, 3, 3)
    dts = np.diff(np.asarray(t, dtype=float))
    dts = np.append(dts, dts[-1] if len(dts) else 0.0)
    out = attitude_run(
        batch,
        np.ascontiguousarray(omega_y, dtype=float),
        np.ascontiguousarray(m_y_B, dtype=float),
        np.ascontiguousarray(g_B_hat, dtype=float),
        dts,
        float(config.k1),
        float(config.rho1),
        float(config.rho2),
        config.m_I,
        config.g_I,
    )
    return out.reshape((len(t),) + R_hat0.shape)
