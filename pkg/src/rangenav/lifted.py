"""Lifted 13-state LTV model for single-range aiding.

The body-frame state ``x = (p_B, v_B, g_B)`` obeys

    dx/dt = A(t) x + Bbar a_B,    A(t) = Abar - blkdiag([w]x, [w]x, [w]x)

with the quadratic output ``y = 0.5 |p_B|^2``. Appending the four quadratic
forms ``xi_i = 0.5 x^T C_i x`` turns the output into a linear one. Their
rates close on themselves except for a constant ``kappa |g|^2`` entering the
last one, which is carried as a known input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .scenario import TruthRun
from .so3 import skew

N_XI = 4
N_BODY = 9
N_STATE = N_XI + N_BODY

I3 = np.eye(3)
Z3 = np.zeros((3, 3))

ABAR = np.block([[Z3, I3, Z3], [Z3, Z3, I3], [Z3, Z3, Z3]])
BBAR = np.vstack([Z3, I3, Z3])
C_RANGE = np.block([[I3, Z3, Z3], [Z3, Z3, Z3], [Z3, Z3, Z3]])
SHIFT = np.diag(np.ones(N_XI - 1), 1)
B_M = np.array([0.0, 0.0, 0.0, 1.0])
C_M = np.array([1.0, 0.0, 0.0, 0.0])
C_OUT = np.concatenate([C_M, np.zeros(N_BODY)])

# d(xi_4)/dt = a^T Bbar^T C_4 x + KAPPA |g|^2; value confirmed by xi_rate_oracle
KAPPA = 3.0

class NonConstantResidual(ValueError):
    pass


@dataclass(frozen=True)
class CMatrixFamily:
    C1: NDArray
    C2: NDArray
    C3: NDArray
    C4: NDArray
    C5_sym: NDArray

    def __iter__(self):
        return iter((self.C1, self.C2, self.C3, self.C4))


@dataclass(frozen=True)
class LtvMatrices:
    A9: NDArray
    Acal: NDArray
    T: NDArray
    Bcal: NDArray
    Ccal: NDArray
    S: NDArray
    u: NDArray


def build_c_family() -> CMatrixFamily:
    """Run ``C_{i+1} = C_i Abar + Abar^T C_i`` from ``C_1 = blkdiag(I, 0, 0)``.

    The rotational part of A(t) contributes antisymmetric terms that vanish
    inside the quadratic forms, so the constant Abar is enough.
    """
    Cs = [C_RANGE.copy()]
    for _ in range(4):
        Cs.append(Cs[-1] @ ABAR + ABAR.T @ Cs[-1])
    C5 = Cs[4]
    return CMatrixFamily(*Cs[:4], C5_sym=0.5 * (C5 + C5.T))


_C_FAMILY = build_c_family()
# rows of Bbar^T C_i, i.e. the middle block-row of each C_i
_T_ROWS = np.stack([BBAR.T @ C for C in _C_FAMILY])


def build_T(a_B: ArrayLike) -> NDArray:
    """4x9 coupling ``[a^T Bbar^T C_1; ...; a^T Bbar^T C_4]``; stacks over leading axes."""
    a_B = np.asarray(a_B, dtype=float)
    return np.einsum("...j,ijk->...ik", a_B, _T_ROWS)


def build_A9(omega: ArrayLike) -> NDArray:
    W = skew(omega)
    A = np.broadcast_to(ABAR, W.shape[:-2] + (9, 9)).copy()
    for b in range(3):
        A[..., 3 * b : 3 * b + 3, 3 * b : 3 * b + 3] -= W
    return A


def _bcal() -> NDArray:
    B = np.zeros((N_STATE, 4))
    B[:N_XI, 3] = B_M
    B[N_XI:, :3] = BBAR
    return B


BCAL = _bcal()


def assemble_ltv(omega: ArrayLike, a_B: ArrayLike, g_norm_sq: float, kappa: float = KAPPA) -> LtvMatrices:
    a_B = np.asarray(a_B, dtype=float)
    A9 = build_A9(omega)
    T = build_T(a_B)
    Acal = np.zeros((N_STATE, N_STATE))
    Acal[:N_XI, :N_XI] = SHIFT
    Acal[:N_XI, N_XI:] = T
    Acal[N_XI:, N_XI:] = A9
    u = np.concatenate([a_B, [kappa * g_norm_sq]])
    return LtvMatrices(A9=A9, Acal=Acal, T=T, Bcal=BCAL, Ccal=C_OUT[None, :].copy(), S=SHIFT.copy(), u=u)


_ACAL_BASE = np.zeros((N_STATE, N_STATE))
_ACAL_BASE[:N_XI, :N_XI] = SHIFT
_ACAL_BASE[N_XI:, N_XI:] = ABAR
# (row, col) of the [w]x entries in the three diagonal body blocks
_SKEW_ROWS = np.array([N_XI + 3 * b + r for b in range(3) for r in (0, 0, 1, 1, 2, 2)])
_SKEW_COLS = np.array([N_XI + 3 * b + c for b in range(3) for c in (1, 2, 0, 2, 0, 1)])


def acal(omega: NDArray, a_B: NDArray) -> NDArray:
    """Fast dense assembly of the 13x13 system matrix for one sample."""
    A = _ACAL_BASE.copy()
    A[1, 4:7] = a_B
    A[2, 7:10] = 2.0 * a_B
    A[3, 10:13] = 3.0 * a_B
    w0, w1, w2 = omega
    # minus [w]x, entries (0,1) (0,2) (1,0) (1,2) (2,0) (2,1)
    A[_SKEW_ROWS, _SKEW_COLS] = (w2, -w1, -w2, w0, w1, -w0) * 3
    return A


def input_vector(a_B: NDArray, g_norm_sq: float, kappa: float = KAPPA) -> NDArray:
    """``Bcal @ u`` as a 13-vector."""
    b = np.zeros(N_STATE)
    b[3] = kappa * g_norm_sq
    b[7:10] = a_B
    return b


def lift_state(body: ArrayLike) -> NDArray:
    """Append ``xi_1..xi_4`` to a body state (or stack of them) of width 9."""
    body = np.asarray(body, dtype=float)
    p, v, g = body[..., 0:3], body[..., 3:6], body[..., 6:9]
    xi = np.stack(
        [
            0.5 * np.sum(p * p, axis=-1),
            np.sum(p * v, axis=-1),
            np.sum(v * v, axis=-1) + np.sum(p * g, axis=-1),
            3.0 * np.sum(v * g, axis=-1),
        ],
        axis=-1,
    )
    return np.concatenate([xi, body], axis=-1)


def lift_truth(truth: TruthRun) -> NDArray:
    """Lifted states along a truth run, shape ``(n, 13)``."""
    return lift_state(truth.body_state)


def _derivative_4th_order(y: NDArray, h: float) -> NDArray:
    d = np.gradient(y, h, axis=0, edge_order=2)
    d[2:-2] = (y[:-4] - 8 * y[1:-3] + 8 * y[3:-1] - y[4:]) / (12 * h)
    return d


def xi_rate_oracle(truth: TruthRun, rtol: float = 1e-3) -> tuple[float, float]:
    """Estimate the constant multiplying ``|g|^2`` in ``d(xi_4)/dt``.

    Differentiates ``xi_4`` along the noiseless truth, removes the
    accelerometer-driven part and normalises by ``|g|^2``.

    Returns
    -------
    kappa : float
        Mean normalised residual (NaN when ``g = 0``, where it is undefined).
    deviation : float
        Largest deviation of the residual from constancy, in units of ``|g|^2``
        (the raw residual when ``g = 0``).
    """
    g2 = truth.world.g_norm_sq
    xi4 = lift_truth(truth)[:, 3]
    rate = _derivative_4th_order(xi4, truth.dt)
    driven = 3.0 * np.sum(truth.a_B * truth.g_B, axis=1)
    residual = (rate - driven)[2:-2]
    if g2 == 0.0:
        dev = float(np.max(np.abs(residual)))
        if dev > rtol:
            raise NonConstantResidual(f"residual {dev:.3e} with zero gravity")
        return float("nan"), dev
    ratio = residual / g2
    kappa = float(np.mean(ratio))
    dev = float(np.max(np.abs(ratio - kappa)))
    if dev > rtol:
        raise NonConstantResidual(f"normalised residual varies by {dev:.3e}")
    return kappa, dev


def propagate_lifted(x0: ArrayLike, omega: NDArray, a_B: NDArray, dt: float, g_norm_sq: float) -> NDArray:
    """Open-loop RK4 integration of the lifted system.

    `omega` and `a_B` are sampled every ``dt / 2`` (length ``2 N + 1``), so each
    step has exact inputs at its start, midpoint and end. Returns the ``N + 1``
    states on the ``dt`` grid.
    """
    n = (len(a_B) - 1) // 2
    if len(a_B) != 2 * n + 1 or len(omega) != len(a_B):
        raise ValueError("inputs must be sampled at dt/2 with an odd number of samples")
    x = np.asarray(x0, dtype=float).copy()
    out = np.empty((n + 1, N_STATE))
    out[0] = x
    A_next = acal(omega[0], a_B[0])
    b_next = input_vector(a_B[0], g_norm_sq)
    for k in range(n):
        i = 2 * k
        A0, b0 = A_next, b_next
        Am, bm = acal(omega[i + 1], a_B[i + 1]), input_vector(a_B[i + 1], g_norm_sq)
        A_next, b_next = acal(omega[i + 2], a_B[i + 2]), input_vector(a_B[i + 2], g_norm_sq)
        k1 = A0 @ x + b0
        k2 = Am @ (x + 0.5 * dt * k1) + bm
        k3 = Am @ (x + 0.5 * dt * k2) + bm
        k4 = A_next @ (x + dt * k3) + b_next
        x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[k + 1] = x
    return out
