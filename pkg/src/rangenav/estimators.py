"""scikit-learn style front ends for the cascade observer and the observability audit."""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .attitude import AttitudeConfig, run_attitude
from .observability import cross_check, sliding_windows
from .riccati import RiccatiConfig, default_P0, run_riccati
from .scenario import SensorLog, TruthRun
from .validation import check_rotation, check_sensor_array, check_time_grid, check_vector3


class RangeAidedNavigator(BaseEstimator, TransformerMixin):
    """Riccati observer on the lifted model cascaded with an SO(3) complementary filter.

    Parameters
    ----------
    P0, V : float or ndarray, optional
        Initial and process weights of the Riccati equation; scalars mean
        multiples of the identity. ``P0=None`` selects ``blkdiag(100 I_4, 10 I_9)``.
    Q : float
        Weight of the squared-range output.
    k1, rho1, rho2 : float
        Attitude gains; ``rho2=None`` means ``1 / |g_I|^2``.
    g_I, m_I : array_like
        Inertial gravity and unit magnetic field.
    dt : float
        Sample period used when ``fit`` is called without times.
    x_hat0 : array_like, optional
        Initial lifted estimate (13,), zero by default.
    R_hat0 : array_like, optional
        Initial attitude estimate, identity by default.

    Notes
    -----
    ``transform`` returns one row per sample with columns ``p_B(3), v_B(3),
    g_B(3)`` followed by the row-major attitude estimate (9).
    """

    def __init__(
        self,
        P0=None,
        Q=10.0,
        V=10.0,
        k1=2.0,
        rho1=1.0,
        rho2=None,
        g_I=(0.0, 0.0, 9.81),
        m_I=(1.0 / np.sqrt(2.0), 0.0, 1.0 / np.sqrt(2.0)),
        dt=1e-3,
        x_hat0=None,
        R_hat0=None,
    ):
        self.P0 = P0
        self.Q = Q
        self.V = V
        self.k1 = k1
        self.rho1 = rho1
        self.rho2 = rho2
        self.g_I = g_I
        self.m_I = m_I
        self.dt = dt
        self.x_hat0 = x_hat0
        self.R_hat0 = R_hat0

    def _configs(self, dt: float) -> tuple[RiccatiConfig, AttitudeConfig]:
        g_I = check_vector3(self.g_I, "g_I")
        m_I = check_vector3(self.m_I, "m_I")
        P0 = default_P0() if self.P0 is None else self.P0
        ric = RiccatiConfig(P0=P0, Q=float(self.Q), V=self.V, dt=dt, g_norm_sq=float(g_I @ g_I))
        att = AttitudeConfig(k1=self.k1, rho1=self.rho1, rho2=self.rho2, m_I=m_I, g_I=g_I)
        return ric, att

    def _run(self, X: ArrayLike, t: ArrayLike | None):
        X = check_sensor_array(X)
        t = check_time_grid(t, len(X), self.dt)
        ric_cfg, att_cfg = self._configs(float(t[1] - t[0]))
        log = SensorLog(t, X[:, 0:3], X[:, 3:6], X[:, 6:9], X[:, 9])
        ric = run_riccati(log, ric_cfg, self.x_hat0)
        R0 = np.eye(3) if self.R_hat0 is None else check_rotation(self.R_hat0, 1e-6, "R_hat0")
        R_hat = run_attitude(t, log.omega_y, log.m_y_B, ric.g_B_hat, att_cfg, R0)
        return t, ric, R_hat

    def fit(self, X: ArrayLike, y=None, t: ArrayLike | None = None):
        """Run both observers over the sensor table `X`; `y` is ignored."""
        t, ric, R_hat = self._run(X, t)
        self.n_features_in_ = np.asarray(X).shape[1]
        self.t_ = t
        self.riccati_ = ric
        self.x_hat_ = ric.x_hat
        self.P_ = ric.P_final
        self.R_hat_ = R_hat
        return self

    @staticmethod
    def _stack(x_hat: NDArray, R_hat: NDArray) -> NDArray:
        return np.hstack([x_hat[:, 4:13], R_hat.reshape(len(R_hat), 9)])

    def transform(self, X: ArrayLike, t: ArrayLike | None = None) -> NDArray:
        """Estimates for a new sensor table, starting from the configured initial state."""
        check_is_fitted(self, "x_hat_")
        _, ric, R_hat = self._run(X, t)
        return self._stack(ric.x_hat, R_hat)

    def fit_transform(self, X: ArrayLike, y=None, t: ArrayLike | None = None) -> NDArray:
        self.fit(X, y, t=t)
        return self._stack(self.x_hat_, self.R_hat_)


class ObservabilityAuditor(BaseEstimator):
    """Sliding-window observability margins of a noiseless truth run.

    ``fit`` expects a truth run sampled at half the integration step (see
    :func:`rangenav.observability.analysis_truth`). After fitting,
    ``margins_`` maps each level to its smallest window eigenvalue and
    ``passed_`` tells whether every level clears `threshold`.
    """

    def __init__(self, delta=2.0, step=1.0, threshold=1e-8):
        self.delta = delta
        self.step = step
        self.threshold = threshold

    def fit(self, truth: TruthRun, y=None):
        if not isinstance(truth, TruthRun):
            raise TypeError("ObservabilityAuditor.fit expects a TruthRun")
        if not (self.delta > 0 and self.step > 0):
            raise ValueError("delta and step must be positive")
        starts = sliding_windows(truth, self.delta, self.step)
        self.report_ = cross_check(truth, starts, self.delta, zero_tol=self.threshold)
        self.margins_ = self.report_.margins()
        self.passed_ = all(v > self.threshold for v in self.margins_.values())
        return self

    def score(self, truth: TruthRun | None = None, y=None) -> float:
        """Smallest margin across levels; refits when a new run is given."""
        if truth is not None:
            self.fit(truth)
        check_is_fitted(self, "margins_")
        return float(min(self.margins_.values()))
