"""Compiled inner loops for the observers."""

import numpy as np
from numba import njit


@njit(cache=True)
def _fill_acal(A, w, a):
    A[:, :] = 0.0
    A[0, 1] = 1.0
    A[1, 2] = 1.0
    A[2, 3] = 1.0
    for j in range(3):
        A[1, 4 + j] = a[j]
        A[2, 7 + j] = 2.0 * a[j]
        A[3, 10 + j] = 3.0 * a[j]
        A[4 + j, 7 + j] = 1.0
        A[7 + j, 10 + j] = 1.0
    for b in range(3):
        o = 4 + 3 * b
        A[o, o + 1] = w[2]
        A[o, o + 2] = -w[1]
        A[o + 1, o] = -w[2]
        A[o + 1, o + 2] = w[0]
        A[o + 2, o] = w[1]
        A[o + 2, o + 1] = -w[0]


@njit(cache=True)
def _flow(x, P, A, a, gk, y, Q, V, dx, dP):
    n = x.shape[0]
    innov = y - x[0]
    AP = A @ P
    Ax = A @ x
    for i in range(n):
        dx[i] = Ax[i] + Q * P[i, 0] * innov
    dx[3] += gk
    for j in range(3):
        dx[7 + j] += a[j]
    for i in range(n):
        for j in range(n):
            dP[i, j] = AP[i, j] + AP[j, i] - Q * P[i, 0] * P[j, 0] + V[i, j]


@njit(cache=True)
def _lagrange3(fm, f0, f1, s):
    """Quadratic through nodes -1, 0, 1 evaluated at s."""
    return 0.5 * s * (s - 1.0) * fm + (1.0 - s * s) * f0 + 0.5 * s * (s + 1.0) * f1


@njit(cache=True)
def riccati_rk4(x, P, wm, am, ym, w0, a0, y0, w1, a1, y1, Q, V, dt, n_sub, gk):
    """Integrate the observer and Riccati flows over one sample interval.

    Inputs between samples 0 and 1 follow the quadratic through samples -1, 0
    and 1 (pass ``2 f0 - f1`` as sample -1 for a linear hold). `gk` is the
    constant ``kappa |g|^2`` input. P is symmetrised after each substep.
    """
    n = x.shape[0]
    h = dt / n_sub
    A = np.zeros((n, n))
    w = np.zeros(3)
    a = np.zeros(3)
    k1x = np.zeros(n)
    k2x = np.zeros(n)
    k3x = np.zeros(n)
    k4x = np.zeros(n)
    k1P = np.zeros((n, n))
    k2P = np.zeros((n, n))
    k3P = np.zeros((n, n))
    k4P = np.zeros((n, n))
    x = x.copy()
    P = P.copy()
    for j in range(n_sub):
        for stage in range(4):
            if stage == 0:
                s = j / n_sub
            elif stage == 3:
                s = (j + 1.0) / n_sub
            else:
                s = (j + 0.5) / n_sub
            for i in range(3):
                w[i] = _lagrange3(wm[i], w0[i], w1[i], s)
                a[i] = _lagrange3(am[i], a0[i], a1[i], s)
            y = _lagrange3(ym, y0, y1, s)
            _fill_acal(A, w, a)
            if stage == 0:
                _flow(x, P, A, a, gk, y, Q, V, k1x, k1P)
            elif stage == 1:
                _flow(x + 0.5 * h * k1x, P + 0.5 * h * k1P, A, a, gk, y, Q, V, k2x, k2P)
            elif stage == 2:
                _flow(x + 0.5 * h * k2x, P + 0.5 * h * k2P, A, a, gk, y, Q, V, k3x, k3P)
            else:
                _flow(x + h * k3x, P + h * k3P, A, a, gk, y, Q, V, k4x, k4P)
        x = x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        P = P + h / 6.0 * (k1P + 2.0 * k2P + 2.0 * k3P + k4P)
        P = 0.5 * (P + P.T)
    return x, P


@njit(cache=True)
def _exp_so3(v):
    th = np.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
    K = np.zeros((3, 3))
    K[0, 1] = -v[2]
    K[0, 2] = v[1]
    K[1, 0] = v[2]
    K[1, 2] = -v[0]
    K[2, 0] = -v[1]
    K[2, 1] = v[0]
    if th < 1e-8:
        c1 = 1.0 - th * th / 6.0
        c2 = 0.5 - th * th / 24.0
    else:
        c1 = np.sin(th) / th
        c2 = (1.0 - np.cos(th)) / (th * th)
    return np.eye(3) + c1 * K + c2 * (K @ K)


@njit(cache=True)
def _cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit(cache=True)
def attitude_run(R0, omega_y, m_y, g_hat, dts, k1, rho1, rho2, m_I, g_I):
    """Complementary-filter history for a batch of initial rotations ``R0`` (m, 3, 3).

    Returns an array (n, m, 3, 3); sample k drives the step of length ``dts[k]``.
    """
    n = omega_y.shape[0]
    m = R0.shape[0]
    out = np.empty((n, m, 3, 3))
    for b in range(m):
        R = R0[b].copy()
        out[0, b] = R
        for k in range(n - 1):
            Rt = R.T
            sigma = rho1 * _cross(m_y[k], Rt @ m_I) + rho2 * _cross(g_hat[k], Rt @ g_I)
            M = R @ _exp_so3(dts[k] * (omega_y[k] + k1 * sigma))
            U, _, Vt = np.linalg.svd(M)
            R = U @ Vt
            out[k + 1, b] = R
    return out
