"""Continuous-time Riccati observer for the lifted range-aided model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ._kernels import riccati_rk4
from .lifted import KAPPA, N_STATE
from .scenario import SensorLog


class BadConfig(ValueError):
    pass


class NonFiniteInput(ValueError):
    pass


class PNotPositiveDefinite(FloatingPointError):
    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


def _as_matrix(value, n: int = N_STATE) -> NDArray:
    value = np.asarray(value, dtype=float)
    if value.ndim == 0:
        return float(value) * np.eye(n)
    return value.reshape(n, n)


def default_P0() -> NDArray:
    """``blkdiag(100 I_4, 10 I_9)``: wider prior on the quadratic lift states."""
    return np.diag(np.r_[np.full(4, 100.0), np.full(9, 10.0)])


@dataclass(frozen=True)
class RiccatiConfig:
    """Observer tuning.

    ``P0`` and ``V`` may be given as scalars (multiples of the identity).
    ``Q`` weights the single squared-range output. ``Q = 0`` is accepted and
    gives the open-loop predictor.
    """

    P0: NDArray = field(default_factory=lambda: default_P0())
    Q: float = 10.0
    V: NDArray = 10.0
    dt: float = 1e-3
    g_norm_sq: float = 9.81**2
    kappa: float = KAPPA
    # RK4 substeps keep dt_sub * Q * P[0, 0] below this
    max_stiffness: float = 1.0

    def __post_init__(self):
        P0 = _as_matrix(self.P0)
        V = _as_matrix(self.V)
        object.__setattr__(self, "P0", P0)
        object.__setattr__(self, "V", V)
        if not np.allclose(P0, P0.T, atol=1e-12) or np.linalg.eigvalsh(P0)[0] <= 0:
            raise BadConfig("P0 must be symmetric positive definite")
        if not np.allclose(V, V.T, atol=1e-12) or np.linalg.eigvalsh(V)[0] < 0:
            raise BadConfig("V must be symmetric positive semi-definite")
        if not (self.Q >= 0 and np.isfinite(self.Q)):
            raise BadConfig("Q must be a finite non-negative scalar")
        if not self.dt > 0:
            raise BadConfig("dt must be positive")


@dataclass(frozen=True)
class RiccatiObserverState:
    x_hat: NDArray
    P: NDArray
    t: float = 0.0
    step: int = 0
    # (omega_y, a_y, y) of the last two consumed samples, newest last
    last_input: tuple | None = field(default=None, repr=False)
    prev_input: tuple | None = field(default=None, repr=False)
    innovation: float = 0.0


def observer_init(config: RiccatiConfig, x_hat0: ArrayLike | None = None, first_sample=None) -> RiccatiObserverState:
    """Initial observer state at ``t = 0``.

    `first_sample` is an optional ``(omega_y, a_y_B, d_y)`` triple measured at
    ``t = 0``; it becomes the left end of the first interpolation interval.
    """
    if not isinstance(config, RiccatiConfig):
        raise BadConfig("config must be a RiccatiConfig")
    x0 = np.zeros(N_STATE) if x_hat0 is None else np.asarray(x_hat0, dtype=float).reshape(N_STATE)
    last = None
    if first_sample is not None:
        omega_y, a_y, d_y = first_sample
        last = (np.asarray(omega_y, dtype=float), np.asarray(a_y, dtype=float), 0.5 * float(d_y) ** 2)
    return RiccatiObserverState(x_hat=x0.copy(), P=config.P0.copy(), last_input=last)


def gain(P: NDArray, Q: float) -> NDArray:
    """``K = P C^T Q`` for the scalar output ``C = e_1^T``."""
    return P[:, 0] * Q


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteInput("measurement contains non-finite values")


def observer_step(state: RiccatiObserverState, omega_y, a_y_B, d_y, config: RiccatiConfig) -> RiccatiObserverState:
    """Advance the coupled ``(x_hat, P)`` flow by one sample period with RK4.

    Inputs between the previous sample and this one follow the quadratic
    through the last three samples, which keeps the input hold error at
    third order for fast trajectories. With fewer samples the hold is linear
    (constant on the very first step). The squared-range output is
    ``y = d_y^2 / 2``; no debiasing of range noise is applied.
    """
    omega_y = np.asarray(omega_y, dtype=float)
    a_y_B = np.asarray(a_y_B, dtype=float)
    _check_finite(omega_y, a_y_B, np.asarray(d_y, dtype=float))
    y1 = 0.5 * float(d_y) ** 2
    if state.last_input is None:
        w0, a0, y0 = omega_y, a_y_B, y1
    else:
        w0, a0, y0 = state.last_input
    if state.prev_input is None:
        wm, am, ym = 2.0 * w0 - omega_y, 2.0 * a0 - a_y_B, 2.0 * y0 - y1
    else:
        wm, am, ym = state.prev_input

    Q, V, dt = config.Q, config.V, config.dt
    n_sub = 1
    # the -P C^T Q C P term has rate ~ Q P[0, 0]
    stiffness = dt * Q * max(state.P[0, 0], 0.0)
    if stiffness > config.max_stiffness:
        n_sub = min(int(math.ceil(stiffness / config.max_stiffness)), 10_000)

    x, P = riccati_rk4(
        state.x_hat,
        state.P,
        np.asarray(wm, dtype=float),
        np.asarray(am, dtype=float),
        float(ym),
        np.asarray(w0, dtype=float),
        np.asarray(a0, dtype=float),
        float(y0),
        omega_y,
        a_y_B,
        y1,
        float(Q),
        V,
        float(dt),
        n_sub,
        config.kappa * config.g_norm_sq,
    )

    step = state.step + 1
    if not (np.all(np.isfinite(P)) and np.all(np.isfinite(x))):
        raise PNotPositiveDefinite(f"Riccati propagation diverged at step {step}", step)
    try:
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        raise PNotPositiveDefinite(f"P lost positive definiteness at step {step}", step) from None

    return RiccatiObserverState(
        x_hat=x,
        P=P,
        t=state.t + dt,
        step=step,
        last_input=(omega_y, a_y_B, y1),
        prev_input=None if state.last_input is None else (np.asarray(w0), np.asarray(a0), float(y0)),
        innovation=y1 - x[0],
    )


def extract_estimates(state: RiccatiObserverState | NDArray) -> tuple[NDArray, NDArray, NDArray]:
    """Body-frame position, velocity and gravity estimates."""
    x = state.x_hat if isinstance(state, RiccatiObserverState) else np.asarray(state)
    return x[..., 4:7].copy(), x[..., 7:10].copy(), x[..., 10:13].copy()


@dataclass
class RiccatiRun:
    """Per-sample history of a Riccati observer run (row k is time ``t[k]``)."""

    t: NDArray
    x_hat: NDArray
    P_trace: NDArray
    P_min_eig: NDArray
    P_max_eig: NDArray
    P_asym: NDArray
    innovation: NDArray
    P_final: NDArray

    @property
    def g_B_hat(self) -> NDArray:
        return self.x_hat[:, 10:13]


def run_riccati(log: SensorLog, config: RiccatiConfig, x_hat0: ArrayLike | None = None) -> RiccatiRun:
    """Run the observer over a sensor log; the first sample sets time zero."""
    n = len(log)
    if n >= 2 and abs((log.t[1] - log.t[0]) - config.dt) > 1e-9 * config.dt:
        config = replace(config, dt=float(log.t[1] - log.t[0]))
    state = observer_init(config, x_hat0, (log.omega_y[0], log.a_y_B[0], log.d_y[0]))
    x_hat = np.empty((n, N_STATE))
    P_trace, P_min, P_max, P_asym, innov = (np.empty(n) for _ in range(5))

    def record(k, s):
        x_hat[k] = s.x_hat
        eig = np.linalg.eigvalsh(s.P)
        P_trace[k] = np.trace(s.P)
        P_min[k], P_max[k] = eig[0], eig[-1]
        P_asym[k] = np.linalg.norm(s.P - s.P.T)
        innov[k] = 0.5 * log.d_y[k] ** 2 - s.x_hat[0]

    record(0, state)
    for k in range(1, n):
        try:
            state = observer_step(state, log.omega_y[k], log.a_y_B[k], log.d_y[k], config)
        except PNotPositiveDefinite as exc:
            raise PNotPositiveDefinite(str(exc), k) from exc
        record(k, state)
    return RiccatiRun(log.t.copy(), x_hat, P_trace, P_min, P_max, P_asym, innov, state.P)
