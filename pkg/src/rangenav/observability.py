"""Numerical observability certificates for the lifted range-aided model.

Three levels are evaluated on sliding windows of a noiseless truth run:

``full_augmented``
    Gramian of the 13-state pair ``(Acal(t), C)``.
``reduced_pair``
    Gramian of the 9-state pair ``(Abar, h(t)^T)`` with ``h = blkdiag(R, R, R) r_4^T``.
``pe_phi``
    Gram matrix of the excitation signal ``phi``, the first block of ``h``.

Every RK4 step of length ``dt`` consumes truth samples at its start, midpoint
and end, so the truth runs passed here must be sampled every ``dt / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import null_space, orth, subspace_angles

from .lifted import ABAR, C_OUT, acal
from .scenario import TrajectorySpec, TruthRun, WorldConstants, run_truth
from .so3 import skew

LEVELS = ("full_augmented", "reduced_pair", "pe_phi")


class NotNilpotent(ValueError):
    pass


class NotKalmanObservable(ValueError):
    pass


@dataclass
class GramianReport:
    t_start: float
    delta: float
    gramian: NDArray
    min_eig: float
    level: str


@dataclass
class ESetBasis:
    """Pieces ``(k, orthonormal basis of Im_{|L_k}(H A^k))`` of the excitation set."""

    pieces: list[tuple[int, NDArray]]
    q: int

    def span(self, tol: float = 1e-10) -> NDArray:
        """Orthonormal basis of the linear span of all pieces."""
        stacked = np.hstack([b for _, b in self.pieces]) if self.pieces else np.zeros((0, 0))
        if stacked.size == 0:
            return stacked
        return orth(stacked, rcond=tol)


def analysis_truth(spec: TrajectorySpec, world: WorldConstants, dt: float, T: float) -> TruthRun:
    """Truth sampled at ``dt / 2``, as required by the window integrators."""
    return run_truth(spec, world, dt / 2.0, T)


# ----------------------------------------------------------------------------
# transition matrices


def transition_matrix(A_of_t: Callable[[float], NDArray], t: float, s_end: float, dt: float) -> NDArray:
    """``Phi(s_end, t)`` by RK4 on ``dPhi/ds = A(s) Phi``; the last step is shortened to land on `s_end`."""
    if s_end < t:
        raise ValueError("s_end must not precede t")
    n = int(np.ceil((s_end - t) / dt - 1e-9))
    Phi = np.eye(np.asarray(A_of_t(t)).shape[0])
    s = t
    for _ in range(n):
        h = min(dt, s_end - s)
        A0, Am, A1 = A_of_t(s), A_of_t(s + h / 2), A_of_t(s + h)
        k1 = A0 @ Phi
        k2 = Am @ (Phi + 0.5 * h * k1)
        k3 = Am @ (Phi + 0.5 * h * k2)
        k4 = A1 @ (Phi + h * k3)
        Phi = Phi + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        s += h
    return Phi


def transition_path(A_half: NDArray, dt: float) -> NDArray:
    """``Phi(t_k, t_0)`` on the ``dt`` grid from system matrices sampled at ``dt / 2``."""
    n = (len(A_half) - 1) // 2
    dim = A_half.shape[-1]
    out = np.empty((n + 1, dim, dim))
    Phi = np.eye(dim)
    out[0] = Phi
    for k in range(n):
        A0, Am, A1 = A_half[2 * k], A_half[2 * k + 1], A_half[2 * k + 2]
        k1 = A0 @ Phi
        k2 = Am @ (Phi + 0.5 * dt * k1)
        k3 = Am @ (Phi + 0.5 * dt * k2)
        k4 = A1 @ (Phi + dt * k3)
        Phi = Phi + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[k + 1] = Phi
    return out


def nilpotent_exp(A: NDArray, tau: ArrayLike) -> NDArray:
    """``exp(A tau)`` for nilpotent `A` as a finite power series; `tau` may be an array."""
    tau = np.asarray(tau, dtype=float)
    n = A.shape[0]
    out = np.broadcast_to(np.eye(n), tau.shape + (n, n)).copy()
    term = np.eye(n)
    k = 1
    while True:
        term = term @ A / k
        if not np.any(term):
            break
        out = out + np.multiply.outer(tau**k, term)
        k += 1
        if k > n:
            break
    return out


def _window(truth: TruthRun, t: float, delta: float) -> tuple[slice, float]:
    """Half-step sample slice covering ``[t, t + delta]`` and the full RK4 step."""
    h = truth.dt
    i0 = int(round((t - truth.t[0]) / h))
    n_half = int(round(delta / h))
    if n_half % 2:
        raise ValueError("window length must be a whole number of RK4 steps")
    if i0 < 0 or i0 + n_half > len(truth) - 1:
        raise ValueError(f"window [{t}, {t + delta}] exceeds the truth horizon")
    return slice(i0, i0 + n_half + 1), 2.0 * h


def _trapezoid_gram(rows: NDArray, dt: float, delta: float) -> NDArray:
    """``(1/delta) int rows(s)^T rows(s) ds`` with trapezoidal weights; rows is (n, m) or (n, p, m)."""
    w = np.full(len(rows), dt)
    w[0] = w[-1] = dt / 2.0
    if rows.ndim == 2:
        G = np.einsum("n,ni,nj->ij", w, rows, rows)
    else:
        G = np.einsum("n,npi,npj->ij", w, rows, rows)
    G = 0.5 * (G + G.T)
    return G / delta


def _report(G: NDArray, t: float, delta: float, level: str) -> GramianReport:
    return GramianReport(t, delta, G, float(np.linalg.eigvalsh(G)[0]), level)


# ----------------------------------------------------------------------------
# excitation signals


def r4_closed_form(a: NDArray, a_dot: NDArray, a_ddot: NDArray, omega: NDArray, omega_dot: NDArray) -> NDArray:
    """Fourth row of the output recursion, as a ``(n, 9)`` array.

    Blocks are ``phi^T``, ``4 (a_dot + [w]x a)^T`` and ``6 a^T`` with
    ``phi = a_ddot + 2 [w]x a_dot + [w_dot]x a + [w]x^2 a``, i.e. the body-frame
    components of the second, first and zeroth derivative of ``R a``.
    """
    W = skew(omega)
    Wa = np.einsum("...ij,...j->...i", W, a)
    phi = (
        a_ddot
        + 2.0 * np.einsum("...ij,...j->...i", W, a_dot)
        + np.einsum("...ij,...j->...i", skew(omega_dot), a)
        + np.einsum("...ij,...j->...i", W, Wa)
    )
    return np.concatenate([phi, 4.0 * (a_dot + Wa), 6.0 * a], axis=-1)


def _time_derivative(y: NDArray, h: float) -> NDArray:
    """Fourth-order differences: five-point central inside, one-sided on the two end samples.

    The recursion differentiates three times in a row. Mixing stencil orders
    leaves an error jump at the boundary that the next differentiation
    amplifies by ``1/h``, so one order is used throughout.
    """
    d = np.gradient(y, h, axis=0, edge_order=2)
    if len(y) >= 5:
        d[2:-2] = (y[:-4] - 8 * y[1:-3] + 8 * y[3:-1] - y[4:]) / (12 * h)
        d[0] = (-25 * y[0] + 48 * y[1] - 36 * y[2] + 16 * y[3] - 3 * y[4]) / (12 * h)
        d[1] = (-3 * y[0] - 10 * y[1] + 18 * y[2] - 6 * y[3] + y[4]) / (12 * h)
        d[-1] = (25 * y[-1] - 48 * y[-2] + 36 * y[-3] - 16 * y[-4] + 3 * y[-5]) / (12 * h)
        d[-2] = (3 * y[-1] + 10 * y[-2] - 18 * y[-3] + 6 * y[-4] - y[-5]) / (12 * h)
    return d


@dataclass
class RRecursion:
    r: list[NDArray]
    r4_closed: NDArray

    @property
    def r4(self) -> NDArray:
        return self.r[3]


def r_recursion(truth: TruthRun) -> RRecursion:
    """Rows ``r_1..r_4`` of ``r_{i+1} = r_i A(t) + d(r_i)/dt + e_{i+1}^T T(t)`` along a truth run.

    Time derivatives are finite differences on the truth grid (see
    :func:`_time_derivative`), independent of the analytic derivatives used by
    :func:`r4_closed_form`.
    """
    a = truth.a_B
    n = len(truth)
    W = skew(truth.omega)
    # T rows 1..4 are 0, (a, 0, 0), (0, 2a, 0), (0, 0, 3a)
    T_rows = np.zeros((4, n, 9))
    T_rows[1, :, 0:3] = a
    T_rows[2, :, 3:6] = 2.0 * a
    T_rows[3, :, 6:9] = 3.0 * a
    r = np.zeros((n, 9))
    rows = []
    for i in range(4):
        rA = np.zeros_like(r)
        # r Abar shifts blocks right; r blkdiag(W) acts per block
        rA[:, 3:6] += r[:, 0:3]
        rA[:, 6:9] += r[:, 3:6]
        for b in range(3):
            rA[:, 3 * b : 3 * b + 3] -= np.einsum("ni,nij->nj", r[:, 3 * b : 3 * b + 3], W)
        r_dot = _time_derivative(r, truth.dt)
        r = rA + r_dot + T_rows[i]
        rows.append(r)
    closed = r4_closed_form(a, truth.a_B_dot, truth.a_B_ddot, truth.omega, truth.omega_dot)
    return RRecursion(rows, closed)


def reduced_output(truth: TruthRun) -> NDArray:
    """``h(t) = blkdiag(R, R, R) r_4(t)^T`` from the closed-form r_4, shape ``(n, 9)``."""
    r4 = r4_closed_form(truth.a_B, truth.a_B_dot, truth.a_B_ddot, truth.omega, truth.omega_dot)
    return np.concatenate([np.einsum("nij,nj->ni", truth.R, r4[:, 3 * b : 3 * b + 3]) for b in range(3)], axis=1)


def phi_signal(truth: TruthRun, frame: str = "inertial") -> NDArray:
    """Excitation signal ``phi`` per sample.

    ``frame="inertial"`` rotates it by R, which is the form that enters the
    reduced-pair Gramian; ``"body"`` returns the body-frame components.
    """
    r4 = r4_closed_form(truth.a_B, truth.a_B_dot, truth.a_B_ddot, truth.omega, truth.omega_dot)
    phi = r4[:, 0:3]
    if frame == "body":
        return phi
    if frame == "inertial":
        return np.einsum("nij,nj->ni", truth.R, phi)
    raise ValueError("frame must be 'inertial' or 'body'")


# ----------------------------------------------------------------------------
# Gramians


def ltv_gramian(A_half: NDArray, C: NDArray, dt: float) -> NDArray:
    """Normalised Gramian ``(1/delta) int Phi^T C^T C Phi`` of a sampled LTV pair.

    `A_half` holds A at every ``dt / 2``; `C` is constant ``(p, n)`` or one
    matrix per ``dt`` sample, ``(N + 1, p, n)``.
    """
    Phi = transition_path(A_half, dt)
    C = np.asarray(C, dtype=float)
    CPhi = np.einsum("pi,nij->npj", C, Phi) if C.ndim == 2 else np.einsum("npi,nij->npj", C, Phi)
    return _trapezoid_gram(CPhi, dt, dt * (len(Phi) - 1))


def full_gramian(truth: TruthRun, t: float, delta: float) -> GramianReport:
    sl, dt = _window(truth, t, delta)
    A_half = np.stack([acal(w, a) for w, a in zip(truth.omega[sl], truth.a_B[sl])])
    G = ltv_gramian(A_half, C_OUT[None, :], dt)
    return _report(G, t, delta, "full_augmented")


def reduced_gramian(truth: TruthRun, t: float, delta: float) -> GramianReport:
    sl, dt = _window(truth, t, delta)
    h = reduced_output(truth[sl])[::2]
    tau = dt * np.arange(len(h))
    Phi_bar = nilpotent_exp(ABAR, tau)
    rows = np.einsum("ni,nij->nj", h, Phi_bar)
    return _report(_trapezoid_gram(rows, dt, delta), t, delta, "reduced_pair")


def pe_gramian(truth: TruthRun, t: float, delta: float, frame: str = "inertial") -> GramianReport:
    sl, dt = _window(truth, t, delta)
    phi = phi_signal(truth[sl], frame)[::2]
    return _report(_trapezoid_gram(phi, dt, delta), t, delta, "pe_phi")


def gramian(level: str, truth: TruthRun, t: float, delta: float) -> GramianReport:
    """Normalised windowed Gramian ``W(t, t + delta)`` at one of :data:`LEVELS`."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    if level == "full_augmented":
        return full_gramian(truth, t, delta)
    if level == "reduced_pair":
        return reduced_gramian(truth, t, delta)
    if level == "pe_phi":
        return pe_gramian(truth, t, delta)
    raise ValueError(f"unknown level {level!r}; expected one of {LEVELS}")


def pe_margin(truth: TruthRun, t: float, delta5: float, frame: str = "inertial") -> tuple[float, GramianReport]:
    """Minimum eigenvalue of ``(1/delta5) int phi phi^T`` over ``[t, t + delta5]``."""
    rep = pe_gramian(truth, t, delta5, frame)
    return rep.min_eig, rep


def factorization_residual(truth: TruthRun, t: float, delta: float) -> float:
    """Largest ``||Phi_22(s, t) - Rbar(s)^T exp(Abar (s - t)) Rbar(t)||_F`` over the window.

    ``Phi_22`` is the body block of the RK4 transition matrix of the full model.
    """
    sl, dt = _window(truth, t, delta)
    A_half = np.stack([acal(w, a) for w, a in zip(truth.omega[sl], truth.a_B[sl])])
    Phi22 = transition_path(A_half, dt)[:, 4:, 4:]
    R = truth.R[sl][::2]
    Rbar = np.zeros((len(R), 9, 9))
    for b in range(3):
        Rbar[:, 3 * b : 3 * b + 3, 3 * b : 3 * b + 3] = R
    tau = dt * np.arange(len(R))
    predicted = np.swapaxes(Rbar, -1, -2) @ nilpotent_exp(ABAR, tau) @ Rbar[0]
    return float(np.max(np.linalg.norm(Phi22 - predicted, axis=(-2, -1))))


# ----------------------------------------------------------------------------
# excitation set


def _rank(M: NDArray, tol: float) -> int:
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > tol * s[0])) if s[0] > 0 else 0


def nilpotency_index(A: NDArray, tol: float = 1e-10) -> int:
    """Smallest q with ``A^q = 0``; raises :class:`NotNilpotent` if none up to n."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    scale = max(np.linalg.norm(A), 1.0)
    Ak = np.eye(n)
    for q in range(1, n + 1):
        Ak = Ak @ A
        if np.linalg.norm(Ak) <= tol * scale**q:
            return q
    raise NotNilpotent("matrix is not nilpotent")


def kalman_observable(A: NDArray, H: NDArray, tol: float = 1e-10) -> bool:
    A = np.asarray(A, dtype=float)
    H = np.atleast_2d(np.asarray(H, dtype=float))
    n = A.shape[0]
    blocks, HAk = [], H
    for _ in range(n):
        blocks.append(HAk)
        HAk = HAk @ A
    return _rank(np.vstack(blocks), tol) == n


def e_set(A: ArrayLike, H: ArrayLike, tol: float = 1e-10) -> ESetBasis:
    """Excitation set ``E = U_k Im_{|L_k}(H A^k)`` with ``L_k = cap_{i > k} Ker(H A^i)``."""
    A = np.asarray(A, dtype=float)
    H = np.atleast_2d(np.asarray(H, dtype=float))
    q = nilpotency_index(A, tol)
    if not kalman_observable(A, H, tol):
        raise NotKalmanObservable("(A, H) is not Kalman observable")
    n = A.shape[0]
    HA = [H @ np.linalg.matrix_power(A, k) for k in range(q)]
    pieces = []
    for k in range(q):
        later = HA[k + 1 :]
        L = np.eye(n) if not later else null_space(np.vstack(later), rcond=tol)
        if L.size == 0:
            continue
        image = HA[k] @ L
        if _rank(image, tol) == 0:
            continue
        pieces.append((k, orth(image, rcond=tol)))
    return ESetBasis(pieces, q)


def e_set_margin(theta: NDArray, basis: ESetBasis, dt: float) -> float:
    """``min over z in E, |z| = 1`` of ``(1/delta) int |Theta(s) z|^2 ds``.

    `theta` holds samples of ``Theta(s)`` on a uniform ``dt`` grid, shape
    ``(n, p, m)``. The minimum is taken per piece of E and then over pieces.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.ndim == 2:
        theta = theta[:, None, :]
    delta = dt * (len(theta) - 1)
    G = _trapezoid_gram(theta, dt, delta)
    margins = [np.linalg.eigvalsh(B.T @ G @ B)[0] for _, B in basis.pieces]
    return float(min(margins))


def principal_angles(U: NDArray, V: NDArray) -> NDArray:
    return subspace_angles(U, V)


# ----------------------------------------------------------------------------
# cross-check


@dataclass
class WindowCheck:
    t_start: float
    delta: float
    full: float
    reduced: float
    pe: float
    disagreement: bool
    implication_violated: bool


@dataclass
class CrossCheckReport:
    windows: list[WindowCheck] = field(default_factory=list)
    zero_tol: float = 1e-8

    def margins(self) -> dict[str, float]:
        return {
            "full_augmented": min(w.full for w in self.windows),
            "reduced_pair": min(w.reduced for w in self.windows),
            "pe_phi": min(w.pe for w in self.windows),
        }

    @property
    def all_positive(self) -> bool:
        return all(v > self.zero_tol for v in self.margins().values())

    def rows(self) -> Iterable[tuple[float, float, str, float]]:
        for w in self.windows:
            yield w.t_start, w.delta, "full_augmented", w.full
            yield w.t_start, w.delta, "reduced_pair", w.reduced
            yield w.t_start, w.delta, "pe_phi", w.pe


def sliding_windows(truth: TruthRun, delta: float, step: float) -> list[float]:
    """Window start times ``0, step, ...`` whose windows fit inside the run."""
    t_end = truth.t[-1]
    if delta > t_end - truth.t[0] + 1e-12:
        raise ValueError("window longer than the run")
    starts = []
    t = float(truth.t[0])
    while t + delta <= t_end + 1e-9:
        starts.append(round(t, 12))
        t += step
    return starts


def cross_check(truth: TruthRun, windows: Iterable[float], delta: float, zero_tol: float = 1e-8) -> CrossCheckReport:
    """Evaluate all three levels per window and flag inconsistent sign patterns.

    ``disagreement`` marks windows where one level is positive and another is
    not. ``implication_violated`` marks the stronger failure where a sufficient
    condition holds (pe > 0, or reduced > 0) but the level it implies is not
    positive.
    """
    report = CrossCheckReport(zero_tol=zero_tol)
    for t in windows:
        full = full_gramian(truth, t, delta).min_eig
        red = reduced_gramian(truth, t, delta).min_eig
        pe = pe_gramian(truth, t, delta).min_eig
        pos = [full > zero_tol, red > zero_tol, pe > zero_tol]
        violated = (pos[2] and not pos[1]) or (pos[1] and not pos[0])
        report.windows.append(WindowCheck(t, delta, full, red, pe, len(set(pos)) > 1, violated))
    return report

