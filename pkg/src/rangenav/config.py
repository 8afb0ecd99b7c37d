"""Flat ``key = value`` run configuration.

Blank lines and text after ``#`` are ignored. Vectors are comma separated.
Keys of the form ``grid.<key> = v1, v2, ...`` declare sweep axes; every
other key must appear in :data:`KEYS`. Unknown keys are errors.

Custom trajectories use ``scenario = custom`` together with
``position_poly`` (rows of constant, linear, quadratic coefficients,
flattened), ``position_terms`` and ``omega_terms`` (``axis amp freq phase``
quadruples separated by ``;``), ``omega_poly`` and ``R0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .attitude import AttitudeConfig
from .riccati import BadConfig, RiccatiConfig, default_P0
from .scenario import PRESETS, NoiseConfig, SinusoidSignal, TrajectorySpec, WorldConstants, preset


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def _terms(text: str) -> tuple[tuple[float, ...], ...]:
    out = []
    for chunk in text.split(";"):
        if chunk.strip():
            vals = tuple(float(v) for v in chunk.replace(",", " ").split())
            if len(vals) != 4:
                raise ConfigError(f"sinusoid term {chunk.strip()!r} needs axis amp freq phase")
            out.append(vals)
    return tuple(out)


@dataclass(frozen=True)
class RunConfig:
    scenario: str = "eight"
    dt: float = 1e-3
    T: float = 20.0
    seed: int = 0
    sigma_omega: float = 1e-2
    sigma_acc: float = 3e-2
    sigma_mag: float = 0.1
    sigma_uwb: float = 0.1
    g_I: tuple = (0.0, 0.0, 9.81)
    m_I: tuple = (float(1 / np.sqrt(2.0)), 0.0, float(1 / np.sqrt(2.0)))
    anchor_I: tuple = (0.0, 0.0, 0.0)
    P0: tuple | None = None
    Q: float = 10.0
    V: tuple = (10.0,)
    k1: float = 2.0
    rho1: float = 1.0
    rho2: float | None = None
    x_hat0: tuple | None = None
    R_hat0: tuple | None = None
    audit_delta: float = 2.0
    audit_step: float = 1.0
    audit_threshold: float = 1e-8
    jobs: int = 1
    position_poly: tuple | None = None
    position_terms: tuple | None = None
    omega_poly: tuple | None = None
    omega_terms: tuple | None = None
    R0: tuple | None = None
    grid: dict = field(default_factory=dict)

    # --- parsing -------------------------------------------------------------

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        values: dict[str, str] = {}
        grid: dict[str, str] = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            target = grid if key.startswith("grid.") else values
            name = key[5:] if key.startswith("grid.") else key
            if name in target:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            target[name] = value
        cfg = cls().with_overrides(values)
        return replace(cfg, grid=parse_grid(grid, cfg))

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_text(text)

    def with_overrides(self, values: dict[str, str | object]) -> "RunConfig":
        """Copy with string (or already typed) values applied and validated."""
        updates = {k: _coerce(k, v) for k, v in values.items()}
        cfg = replace(self, **updates)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.scenario != "custom" and self.scenario not in PRESETS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {sorted(PRESETS)} or custom")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not self.T > self.dt:
            raise ConfigError("T must exceed dt")
        if abs(self.T / self.dt - round(self.T / self.dt)) > 1e-6:
            raise ConfigError("T must be a whole number of steps")
        if not (self.audit_delta > 0 and self.audit_step > 0):
            raise ConfigError("audit_delta and audit_step must be positive")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        for name in ("g_I", "m_I", "anchor_I"):
            if len(getattr(self, name)) != 3:
                raise ConfigError(f"{name} needs 3 values")
        try:
            self.world()
            self.noise()
            self.riccati()
            self.attitude()
            self.trajectory()
        except ConfigError:
            raise
        except (ValueError, BadConfig, KeyError) as exc:
            raise ConfigError(str(exc)) from exc

    # --- builders --------------------------------------------------------------

    def world(self) -> WorldConstants:
        return WorldConstants(np.array(self.g_I), np.array(self.m_I), np.array(self.anchor_I))

    def noise(self) -> NoiseConfig:
        return NoiseConfig(self.sigma_omega, self.sigma_acc, self.sigma_mag, self.sigma_uwb, self.seed)

    def riccati(self) -> RiccatiConfig:
        P0 = default_P0() if self.P0 is None else _matrix(self.P0, "P0")
        g = np.asarray(self.g_I, dtype=float)
        return RiccatiConfig(P0=P0, Q=self.Q, V=_matrix(self.V, "V"), dt=self.dt, g_norm_sq=float(g @ g))

    def attitude(self) -> AttitudeConfig:
        return AttitudeConfig(self.k1, self.rho1, self.rho2, np.array(self.m_I), np.array(self.g_I))

    def trajectory(self) -> TrajectorySpec:
        if self.scenario != "custom":
            return preset(self.scenario, self.world())
        pos = _signal(self.position_poly, self.position_terms)
        omega = _signal(self.omega_poly, self.omega_terms)
        R0 = np.eye(3) if self.R0 is None else np.asarray(self.R0, dtype=float).reshape(3, 3)
        return TrajectorySpec(pos, omega, R0=R0, name="custom")

    def initial_estimates(self) -> tuple[np.ndarray | None, np.ndarray | None]:
        x0 = None if self.x_hat0 is None else np.asarray(self.x_hat0, dtype=float)
        R0 = None if self.R_hat0 is None else np.asarray(self.R_hat0, dtype=float).reshape(3, 3)
        if x0 is not None and x0.shape != (13,):
            raise ConfigError("x_hat0 needs 13 values")
        return x0, R0

    def as_dict(self) -> dict[str, object]:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "grid"}


_TYPES = {f.name: f.type for f in fields(RunConfig)}
KEYS = tuple(k for k in _TYPES if k != "grid")
_VECTOR_KEYS = {"g_I", "m_I", "anchor_I", "P0", "V", "x_hat0", "R_hat0", "position_poly", "omega_poly", "R0"}
_TERM_KEYS = {"position_terms", "omega_terms"}
_INT_KEYS = {"seed", "jobs"}
_STR_KEYS = {"scenario"}
_OPTIONAL_FLOAT = {"rho2"}


def _coerce(key: str, value):
    if key not in _TYPES or key == "grid":
        raise ConfigError(f"unknown config key {key!r}")
    if not isinstance(value, str):
        return value
    try:
        if key in _STR_KEYS:
            return value
        if key in _INT_KEYS:
            return int(value)
        if key in _TERM_KEYS:
            return _terms(value)
        if key in _VECTOR_KEYS:
            return None if value.lower() in ("none", "default") else _floats(value)
        if key in _OPTIONAL_FLOAT and value.lower() in ("none", "default"):
            return None
        return float(value)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {value!r}") from exc


def _matrix(values: tuple, name: str) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.size == 1:
        return float(v[0]) * np.eye(13)
    if v.size == 13:
        return np.diag(v)
    if v.size == 169:
        return v.reshape(13, 13)
    raise ConfigError(f"{name} needs 1, 13 (diagonal) or 169 values")


def _signal(poly, terms) -> SinusoidSignal:
    p = np.zeros((1, 3)) if poly is None else np.asarray(poly, dtype=float).reshape(-1, 3)
    return SinusoidSignal.from_terms([] if terms is None else list(terms), poly=p)


def parse_grid(grid: dict[str, str], base: RunConfig) -> dict[str, list]:
    """Typed sweep axes; every value is validated against `base`."""
    out = {}
    for key, text in grid.items():
        if key in _VECTOR_KEYS or key in _TERM_KEYS:
            raise ConfigError(f"grid over vector key {key!r} is not supported")
        items = [v.strip() for v in text.split(",") if v.strip()]
        if not items:
            raise ConfigError(f"grid axis {key!r} is empty")
        out[key] = [_coerce(key, v) for v in items]
        for v in out[key]:
            base.with_overrides({key: v})
    return out


def grid_points(cfg: RunConfig) -> list[dict]:
    """Cartesian product of the grid axes in declaration order (last axis fastest)."""
    if not cfg.grid:
        raise ConfigError("sweep needs a nonempty grid")
    points = [{}]
    for key, values in cfg.grid.items():
        points = [dict(p, **{key: v}) for p in points for v in values]
    return points
