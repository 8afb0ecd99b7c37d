"""Ground-truth rigid-body motion and sensor simulation.

Trajectories are analytic: inertial position and body angular velocity are
sums of a polynomial and sinusoids, so every derivative needed downstream is
available in closed form. Attitude is the only integrated quantity
(``dR/dt = R [omega]x``, RK4 with re-projection onto SO(3)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .so3 import exp_so3, project_to_so3, skew

SENSOR_IDS = {"gyro": 0, "accel": 1, "mag": 2, "uwb": 3}


class HorizonExceeded(ValueError):
    pass


class InvalidGrid(ValueError):
    pass


# ----------------------------------------------------------------------------
# signals


@dataclass(frozen=True)
class SinusoidSignal:
    """Vector signal ``sum_k poly[k] t^k + sum_j amps[j] sin(freqs[j] t + phases[j])``.

    Parameters
    ----------
    poly : array of shape (K, 3)
        Polynomial coefficients, lowest order first.
    amps : array of shape (J, 3)
        Vector amplitude of each sinusoid.
    freqs, phases : arrays of shape (J,)
        Angular frequency (rad/s) and phase (rad) of each sinusoid.
    """

    poly: NDArray = field(default_factory=lambda: np.zeros((1, 3)))
    amps: NDArray = field(default_factory=lambda: np.zeros((0, 3)))
    freqs: NDArray = field(default_factory=lambda: np.zeros(0))
    phases: NDArray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        object.__setattr__(self, "poly", np.atleast_2d(np.asarray(self.poly, dtype=float)).reshape(-1, 3))
        object.__setattr__(self, "amps", np.asarray(self.amps, dtype=float).reshape(-1, 3))
        object.__setattr__(self, "freqs", np.asarray(self.freqs, dtype=float).reshape(-1))
        object.__setattr__(self, "phases", np.asarray(self.phases, dtype=float).reshape(-1))
        if not (len(self.amps) == len(self.freqs) == len(self.phases)):
            raise ValueError("amps, freqs and phases must have the same length")

    @classmethod
    def from_terms(cls, terms, poly=None) -> "SinusoidSignal":
        """Build from ``(axis, amplitude, freq, phase)`` tuples, one per scalar term."""
        amps = np.zeros((len(terms), 3))
        freqs = np.zeros(len(terms))
        phases = np.zeros(len(terms))
        for j, (axis, amp, freq, phase) in enumerate(terms):
            amps[j, int(axis)] = amp
            freqs[j] = freq
            phases[j] = phase
        return cls(poly=np.zeros((1, 3)) if poly is None else poly, amps=amps, freqs=freqs, phases=phases)

    def __call__(self, t: ArrayLike, order: int = 0) -> NDArray:
        """Evaluate the `order`-th time derivative at `t` (scalar or 1-D array)."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape + (3,))
        for k in range(order, len(self.poly)):
            coef = math.factorial(k) / math.factorial(k - order)
            out = out + coef * np.multiply.outer(t ** (k - order), self.poly[k])
        if len(self.freqs):
            arg = np.multiply.outer(t, self.freqs) + self.phases + order * np.pi / 2
            out = out + (np.sin(arg) * self.freqs**order) @ self.amps
        return out

    def rotated(self, Q: ArrayLike) -> "SinusoidSignal":
        Q = np.asarray(Q, dtype=float)
        return replace(self, poly=self.poly @ Q.T, amps=self.amps @ Q.T)


@dataclass(frozen=True)
class TrajectorySpec:
    """Analytic rigid-body motion.

    ``position`` is the inertial position, ``omega`` the body-frame angular
    velocity and ``R0`` the attitude at ``t = 0``. ``horizon`` bounds the
    times at which truth may be requested (None means unbounded).
    """

    position: Callable
    omega: Callable
    R0: NDArray = field(default_factory=lambda: np.eye(3))
    horizon: float | None = None
    name: str = "custom"

    def rotated(self, Q: ArrayLike) -> "TrajectorySpec":
        """Same motion seen from an inertial frame rotated by the constant `Q`."""
        Q = np.asarray(Q, dtype=float)
        return replace(self, position=self.position.rotated(Q), R0=Q @ self.R0)


class FiniteDifferenceSignal:
    """Wrap a plain callable ``t -> R^3``; derivatives by central differences of step `h`."""

    _STENCILS = {
        0: [1.0],
        1: [-0.5, 0.0, 0.5],
        2: [1.0, -2.0, 1.0],
        3: [-0.5, 1.0, 0.0, -1.0, 0.5],
        4: [1.0, -4.0, 6.0, -4.0, 1.0],
    }

    def __init__(self, fn: Callable, h: float = 1e-3):
        self.fn = fn
        self.h = h

    def __call__(self, t, order: int = 0):
        if order not in self._STENCILS:
            raise ValueError(f"derivative order {order} not supported")
        weights = self._STENCILS[order]
        half = (len(weights) - 1) // 2
        t = np.asarray(t, dtype=float)
        acc = 0.0
        for i, w in enumerate(weights):
            if w:
                acc = acc + w * np.asarray(
                    np.vectorize(self.fn, signature="()->(n)")(t + (i - half) * self.h), dtype=float
                )
        return acc / self.h**order


@dataclass(frozen=True)
class WorldConstants:
    g_I: NDArray = field(default_factory=lambda: np.array([0.0, 0.0, 9.81]))
    m_I: NDArray = field(default_factory=lambda: np.array([1.0, 0.0, 1.0]) / np.sqrt(2.0))
    anchor_I: NDArray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("g_I", "m_I", "anchor_I"):
            value = np.asarray(getattr(self, name), dtype=float).reshape(3)
            if not np.all(np.isfinite(value)):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        if abs(np.linalg.norm(self.m_I) - 1.0) > 1e-12:
            raise ValueError("m_I must be a unit vector")
        if np.linalg.norm(self.g_I) > 0 and np.linalg.norm(np.cross(self.m_I, self.g_I)) <= 1e-6:
            raise ValueError("m_I and g_I must not be collinear")

    @property
    def g_norm_sq(self) -> float:
        return float(self.g_I @ self.g_I)


@dataclass(frozen=True)
class NoiseConfig:
    """Standard deviations of the white sensor noises and the RNG seed."""

    sigma_omega: float = 1e-2
    sigma_acc: float = 3e-2
    sigma_mag: float = 0.1
    sigma_uwb: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name in ("sigma_omega", "sigma_acc", "sigma_mag", "sigma_uwb"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative")

    @classmethod
    def noiseless(cls, seed: int = 0) -> "NoiseConfig":
        return cls(0.0, 0.0, 0.0, 0.0, seed)


# ----------------------------------------------------------------------------
# presets


def eight_trajectory() -> TrajectorySpec:
    """Figure-eight flight with slowly varying body rates.

    A constant offset places the start at ``p(0) = [1, 0, 0]``. The initial
    inertial velocity follows from differentiating the position
    (``[0, 4.636, -6.511]`` m/s).
    """
    c = np.sqrt(3.0) / 4.0
    offset = np.array([0.0, -0.3 * np.sin(np.pi / 12), -c * np.sin(np.pi / 9)])
    position = SinusoidSignal.from_terms(
        [
            (0, 1.0, 8.0, np.pi / 2),
            (1, 0.3, 16.0, np.pi / 12),
            (2, -c, 16.0, -np.pi / 9),
        ],
        poly=offset[None, :],
    )
    omega = SinusoidSignal.from_terms(
        [
            (0, 1.0, 0.1, np.pi),
            (1, 0.5, 0.2, 0.0),
            (2, 0.1, 0.3, np.pi / 3),
        ]
    )
    return TrajectorySpec(position, omega, R0=exp_so3(np.pi / 2 * np.array([0.0, 1.0, 0.0])), name="eight")


def free_fall_trajectory(g_I=(0.0, 0.0, 9.81), omega=(0.1, -0.2, 0.3), v0=(1.0, 0.5, 0.0)) -> TrajectorySpec:
    """Ballistic motion, so the apparent acceleration is identically zero."""
    poly = np.array([[1.0, 0.0, 0.0], v0, 0.5 * np.asarray(g_I, dtype=float)])
    return TrajectorySpec(
        SinusoidSignal(poly=poly),
        SinusoidSignal(poly=np.atleast_2d(omega)),
        R0=np.eye(3),
        name="free_fall",
    )


def static_trajectory(p0=(1.0, 0.0, 0.0), R0=None) -> TrajectorySpec:
    return TrajectorySpec(
        SinusoidSignal(poly=np.atleast_2d(p0)),
        SinusoidSignal(),
        R0=np.eye(3) if R0 is None else np.asarray(R0, dtype=float),
        name="static",
    )


def rank_one_trajectory(g_I=(0.0, 0.0, 9.81)) -> TrajectorySpec:
    """Non-rotating body whose apparent acceleration is ``[sin t, 0, 0]``."""
    poly = np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], 0.5 * np.asarray(g_I, dtype=float)])
    position = SinusoidSignal(poly=poly, amps=[[-1.0, 0.0, 0.0]], freqs=[1.0], phases=[0.0])
    return TrajectorySpec(position, SinusoidSignal(), R0=np.eye(3), name="rank_one")


def three_tone_trajectory(g_I=(0.0, 0.0, 9.81)) -> TrajectorySpec:
    """Non-rotating body with apparent acceleration ``[sin t, sin 2t, sin 3t]``."""
    poly = np.array([[0.0, 0.0, 0.0], [1.0, 0.5, 1.0 / 3.0], 0.5 * np.asarray(g_I, dtype=float)])
    amps = -np.diag([1.0, 1.0 / 4.0, 1.0 / 9.0])
    position = SinusoidSignal(poly=poly, amps=amps, freqs=[1.0, 2.0, 3.0], phases=[0.0, 0.0, 0.0])
    return TrajectorySpec(position, SinusoidSignal(), R0=np.eye(3), name="three_tone")


PRESETS: dict[str, Callable[..., TrajectorySpec]] = {
    "eight": eight_trajectory,
    "free_fall": free_fall_trajectory,
    "static": static_trajectory,
    "rank_one": rank_one_trajectory,
    "three_tone": three_tone_trajectory,
}


def preset(name: str, world: WorldConstants | None = None) -> TrajectorySpec:
    if name not in PRESETS:
        raise KeyError(f"unknown trajectory preset {name!r}; choose from {sorted(PRESETS)}")
    if name in ("free_fall", "rank_one", "three_tone") and world is not None:
        return PRESETS[name](g_I=world.g_I)
    return PRESETS[name]()


# ----------------------------------------------------------------------------
# truth


@dataclass
class RigidBodyTruth:
    t: float
    R: NDArray
    p_I: NDArray
    v_I: NDArray
    a_B: NDArray
    omega: NDArray
    a_B_dot: NDArray
    a_B_ddot: NDArray
    omega_dot: NDArray


@dataclass
class TruthRun:
    """Uniformly sampled ground truth; every field is stacked along axis 0."""

    t: NDArray
    R: NDArray
    p_I: NDArray
    v_I: NDArray
    a_B: NDArray
    omega: NDArray
    a_B_dot: NDArray
    a_B_ddot: NDArray
    omega_dot: NDArray
    world: WorldConstants

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, k) -> RigidBodyTruth | "TruthRun":
        names = ("t", "R", "p_I", "v_I", "a_B", "omega", "a_B_dot", "a_B_ddot", "omega_dot")
        if isinstance(k, (int, np.integer)):
            values = {n: getattr(self, n)[k] for n in names}
            values["t"] = float(values["t"])
            return RigidBodyTruth(**values)
        return TruthRun(**{n: getattr(self, n)[k] for n in names}, world=self.world)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    # body-frame states, with the anchor moved to the origin
    @property
    def p_B(self) -> NDArray:
        return np.einsum("nji,nj->ni", self.R, self.p_I - self.world.anchor_I)

    @property
    def v_B(self) -> NDArray:
        return np.einsum("nji,nj->ni", self.R, self.v_I)

    @property
    def g_B(self) -> NDArray:
        return np.einsum("nji,j->ni", self.R, self.world.g_I)

    @property
    def body_state(self) -> NDArray:
        """Stacked ``(p_B, v_B, g_B)``, shape ``(n, 9)``."""
        return np.hstack([self.p_B, self.v_B, self.g_B])


def _rk4_attitude(omega_fn: Callable, R0: NDArray, t0: float, h: float, n: int) -> NDArray:
    R = np.empty((n + 1, 3, 3))
    R[0] = R0
    t_grid = t0 + h * np.arange(n + 1)
    W0 = skew(omega_fn(t_grid))
    Wm = skew(omega_fn(t_grid[:-1] + h / 2))
    for k in range(n):
        Rk = R[k]
        k1 = Rk @ W0[k]
        k2 = (Rk + 0.5 * h * k1) @ Wm[k]
        k3 = (Rk + 0.5 * h * k2) @ Wm[k]
        k4 = (Rk + h * k3) @ W0[k + 1]
        R[k + 1] = project_to_so3(Rk + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))
    return R


def _kinematics(spec: TrajectorySpec, world: WorldConstants, t: NDArray, R: NDArray) -> dict:
    """Body-frame signals from the analytic trajectory and integrated attitude."""
    p = spec.position(t, 0)
    v = spec.position(t, 1)
    acc_I = spec.position(t, 2) - world.g_I
    jerk_I = spec.position(t, 3)
    snap_I = spec.position(t, 4)
    w = spec.omega(t, 0)
    w_dot = spec.omega(t, 1)
    Rt = np.swapaxes(R, -1, -2)
    W = skew(w)
    a_B = np.einsum("nij,nj->ni", Rt, acc_I)
    jerk_B = np.einsum("nij,nj->ni", Rt, jerk_I)
    a_B_dot = -np.einsum("nij,nj->ni", W, a_B) + jerk_B
    a_B_ddot = (
        -np.einsum("nij,nj->ni", skew(w_dot), a_B)
        - np.einsum("nij,nj->ni", W, a_B_dot)
        - np.einsum("nij,nj->ni", W, jerk_B)
        + np.einsum("nij,nj->ni", Rt, snap_I)
    )
    return dict(p_I=p, v_I=v, a_B=a_B, omega=w, a_B_dot=a_B_dot, a_B_ddot=a_B_ddot, omega_dot=w_dot)


def run_truth(spec: TrajectorySpec, world: WorldConstants, dt: float, T: float) -> TruthRun:
    """Sample the ground truth on ``t = 0, dt, ..., T`` from one attitude integration."""
    if not (0 < dt < T):
        raise InvalidGrid(f"need 0 < dt < T, got dt={dt}, T={T}")
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-9 * T:
        raise InvalidGrid(f"T={T} is not a multiple of dt={dt}")
    if spec.horizon is not None and T > spec.horizon:
        raise HorizonExceeded(f"T={T} exceeds the trajectory horizon {spec.horizon}")
    t = dt * np.arange(n + 1)
    R = _rk4_attitude(spec.omega, np.asarray(spec.R0, dtype=float), 0.0, dt, n)
    return TruthRun(t=t, R=R, world=world, **_kinematics(spec, world, t, R))


def truth_at(spec: TrajectorySpec, world: WorldConstants, t: float, h: float = 1e-3) -> RigidBodyTruth:
    """Ground truth at a single time; attitude integrated from 0 with steps of at most `h`."""
    if h <= 0:
        raise InvalidGrid("step h must be positive")
    if t < 0 or (spec.horizon is not None and t > spec.horizon):
        raise HorizonExceeded(f"t={t} outside the trajectory horizon")
    n = max(1, int(math.ceil(t / h))) if t > 0 else 0
    if n:
        R = _rk4_attitude(spec.omega, np.asarray(spec.R0, dtype=float), 0.0, t / n, n)[-1]
    else:
        R = np.asarray(spec.R0, dtype=float)
    values = _kinematics(spec, world, np.array([t]), R[None])
    return RigidBodyTruth(t=float(t), R=R, **{k: v[0] for k, v in values.items()})


# ----------------------------------------------------------------------------
# sensors


@dataclass
class SensorSample:
    t: float
    omega_y: NDArray
    a_y_B: NDArray
    m_y_B: NDArray
    d_y: float


@dataclass
class SensorLog:
    t: NDArray
    omega_y: NDArray
    a_y_B: NDArray
    m_y_B: NDArray
    d_y: NDArray

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, k: int) -> SensorSample:
        return SensorSample(float(self.t[k]), self.omega_y[k], self.a_y_B[k], self.m_y_B[k], float(self.d_y[k]))

    def as_array(self) -> NDArray:
        """Columns ``omega_y(3), a_y(3), m_y(3), d_y``."""
        return np.hstack([self.omega_y, self.a_y_B, self.m_y_B, self.d_y[:, None]])


class NoiseStreams:
    """Independent Gaussian substreams per sensor, keyed by ``(seed, sensor id)``.

    Draws are consumed strictly in sample order, so the noise of sample k
    depends only on the seed, the sensor and k.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._rngs = {name: np.random.default_rng([self.seed, sid]) for name, sid in SENSOR_IDS.items()}

    def draw(self, sensor: str, n: int | None = None) -> NDArray:
        width = 1 if sensor == "uwb" else 3
        size = (width,) if n is None else (n, width)
        return self._rngs[sensor].standard_normal(size)


def _range(p_I: NDArray, world: WorldConstants) -> NDArray:
    return np.linalg.norm(p_I - world.anchor_I, axis=-1)


def sense(truth: RigidBodyTruth, world: WorldConstants, noise: NoiseConfig, streams: NoiseStreams) -> SensorSample:
    """Corrupt one truth sample; advances each sensor stream by one sample."""
    omega_y = truth.omega + noise.sigma_omega * streams.draw("gyro")
    a_y = truth.a_B + noise.sigma_acc * streams.draw("accel")
    m_y = truth.R.T @ world.m_I + noise.sigma_mag * streams.draw("mag")
    d_y = _range(truth.p_I, world) + noise.sigma_uwb * streams.draw("uwb")[0]
    return SensorSample(truth.t, omega_y, a_y, m_y, float(max(d_y, 0.0)))


def sense_run(truth: TruthRun, noise: NoiseConfig) -> SensorLog:
    """Vectorised :func:`sense` over a whole run; identical draws to the sequential form."""
    world = truth.world
    n = len(truth)
    streams = NoiseStreams(noise.seed)
    omega_y = truth.omega + noise.sigma_omega * streams.draw("gyro", n)
    a_y = truth.a_B + noise.sigma_acc * streams.draw("accel", n)
    m_y = np.einsum("nji,j->ni", truth.R, world.m_I) + noise.sigma_mag * streams.draw("mag", n)
    d_y = _range(truth.p_I, world) + noise.sigma_uwb * streams.draw("uwb", n)[:, 0]
    # a negative range is not physical
    return SensorLog(truth.t.copy(), omega_y, a_y, m_y, np.maximum(d_y, 0.0))
