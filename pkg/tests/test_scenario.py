import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rangenav.scenario import (
    HorizonExceeded,
    InvalidGrid,
    NoiseConfig,
    NoiseStreams,
    SinusoidSignal,
    TrajectorySpec,
    WorldConstants,
    preset,
    rank_one_trajectory,
    run_truth,
    sense,
    sense_run,
    static_trajectory,
    truth_at,
)
from rangenav.so3 import exp_so3, rotation_defect

E = np.eye(3)


def _central5(y, h):
    """Fourth-order central difference on the interior samples."""
    return (y[:-4] - 8 * y[1:-3] + 8 * y[3:-1] - y[4:]) / (12 * h)


class Test_SinusoidSignal:
    def test_derivatives_match_finite_differences(self):
        sig = SinusoidSignal(poly=[[1, 2, 3], [0.5, 0, -1], [0, 0.2, 0]], amps=[[1, -2, 0.5]], freqs=[3.0], phases=[0.4])
        t = np.linspace(0.1, 2.0, 7)
        h = 1e-4
        for order in range(4):
            fd = (sig(t + h, order) - sig(t - h, order)) / (2 * h)
            np.testing.assert_allclose(sig(t, order + 1), fd, rtol=1e-6, atol=1e-6)

    def test_from_terms(self):
        sig = SinusoidSignal.from_terms([(1, 2.0, 1.0, 0.0)])
        np.testing.assert_allclose(sig(np.pi / 2), [0.0, 2.0, 0.0])

    def test_mismatched_lengths(self):
        with pytest.raises(ValueError):
            SinusoidSignal(amps=[[1, 0, 0]], freqs=[1.0, 2.0], phases=[0.0])


class Test_WorldConstants:
    def test_defaults(self):
        w = WorldConstants()
        np.testing.assert_array_equal(w.g_I, [0, 0, 9.81])
        np.testing.assert_allclose(w.m_I, np.array([1, 0, 1]) / np.sqrt(2))
        assert w.g_norm_sq == pytest.approx(9.81**2)

    @pytest.mark.parametrize(
        "kwargs",
        [dict(m_I=[2.0, 0.0, 0.0]), dict(m_I=[0.0, 0.0, 1.0]), dict(g_I=[np.nan, 0.0, 9.81])],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            WorldConstants(**kwargs)


class Test_truth_at:
    def test_initial_position(self, eight_spec, world):
        np.testing.assert_allclose(truth_at(eight_spec, world, 0.0).p_I, [1.0, 0.0, 0.0], atol=1e-15)

    def test_initial_attitude(self, eight_spec, world):
        R0 = truth_at(eight_spec, world, 0.0).R
        np.testing.assert_allclose(R0 @ E[0], -E[2], atol=1e-15)

    def test_initial_velocity_is_the_trajectory_derivative(self, eight_spec, world):
        v0 = truth_at(eight_spec, world, 0.0).v_I
        np.testing.assert_allclose(v0, [0.0, 4.8 * np.cos(np.pi / 12), -4 * np.sqrt(3) * np.cos(np.pi / 9)], atol=1e-12)
        np.testing.assert_allclose(v0, [0.0, 4.636, -6.511], atol=1e-3)

    @pytest.mark.parametrize("t", [0.0, 0.37, 2.5])
    def test_constant_position(self, world, t):
        R0 = exp_so3([0.2, -0.4, 0.1])
        truth = truth_at(static_trajectory(R0=R0), world, t)
        np.testing.assert_allclose(truth.a_B, -R0.T @ world.g_I, atol=1e-12)

    def test_matches_run_truth(self, eight_spec, world, eight_truth):
        single = truth_at(eight_spec, world, 1.0, h=1e-3)
        np.testing.assert_allclose(single.R, eight_truth.R[1000], atol=1e-12)
        np.testing.assert_allclose(single.a_B, eight_truth.a_B[1000], atol=1e-10)

    def test_horizon(self, world):
        spec = TrajectorySpec(SinusoidSignal(), SinusoidSignal(), horizon=1.0)
        with pytest.raises(HorizonExceeded):
            truth_at(spec, world, 1.5)
        with pytest.raises(HorizonExceeded):
            truth_at(spec, world, -0.1)


class Test_run_truth:
    def test_rotation_invariants(self, eight_truth):
        assert rotation_defect(eight_truth.R) <= 1e-9

    def test_grid(self, eight_truth):
        assert len(eight_truth) == 20001
        assert eight_truth.dt == pytest.approx(1e-3)

    def test_frozen_attitude(self, world):
        R0 = exp_so3([0.3, 0.1, -0.2])
        truth = run_truth(rank_one_trajectory(), world, 1e-2, 2.0)
        np.testing.assert_array_equal(truth.R, np.broadcast_to(np.eye(3), truth.R.shape))
        truth = run_truth(static_trajectory(R0=R0), world, 1e-2, 1.0)
        np.testing.assert_allclose(truth.R, np.broadcast_to(R0, truth.R.shape), atol=1e-15)

    def test_velocity_self_consistency(self, eight_truth):
        p, dt = eight_truth.p_I, eight_truth.dt
        assert np.max(np.linalg.norm(eight_truth.v_I[2:-2] - _central5(p, dt), axis=1)) < 1e-4

    def test_body_derivatives_match_finite_differences(self, eight_truth):
        dt = eight_truth.dt
        fd = (eight_truth.a_B[2:] - eight_truth.a_B[:-2]) / (2 * dt)
        scale = np.max(np.abs(eight_truth.a_B_dot))
        assert np.max(np.abs(fd - eight_truth.a_B_dot[1:-1])) < 1e-3 * scale
        fd2 = (eight_truth.a_B_dot[2:] - eight_truth.a_B_dot[:-2]) / (2 * dt)
        scale2 = np.max(np.abs(eight_truth.a_B_ddot))
        assert np.max(np.abs(fd2 - eight_truth.a_B_ddot[1:-1])) < 1e-3 * scale2

    def test_apparent_acceleration(self, eight_truth, world):
        dt = eight_truth.dt
        acc = _central5(eight_truth.v_I, dt)
        a_B = np.einsum("nji,nj->ni", eight_truth.R[2:-2], acc - world.g_I)
        np.testing.assert_allclose(a_B, eight_truth.a_B[2:-2], atol=1e-4)

    def test_signals_bounded(self, eight_truth):
        for name in ("a_B", "a_B_dot", "a_B_ddot", "omega", "omega_dot"):
            values = getattr(eight_truth, name)
            assert np.all(np.isfinite(values))
            assert np.max(np.abs(values)) < 1e5

    def test_deterministic(self, eight_spec, world):
        a = run_truth(eight_spec, world, 1e-2, 2.0)
        b = run_truth(eight_spec, world, 1e-2, 2.0)
        np.testing.assert_array_equal(a.R, b.R)
        np.testing.assert_array_equal(a.a_B, b.a_B)

    @pytest.mark.parametrize("dt, T", [(0.0, 1.0), (-1e-3, 1.0), (1.0, 0.5), (0.3, 1.0)])
    def test_invalid_grid(self, eight_spec, world, dt, T):
        with pytest.raises(InvalidGrid):
            run_truth(eight_spec, world, dt, T)

    def test_gravity_norm_preserved(self, eight_truth):
        g = np.linalg.norm(eight_truth.g_B, axis=1)
        assert np.ptp(g) <= 1e-9

    def test_anchor_shift(self, eight_spec):
        world = WorldConstants(anchor_I=np.array([0.5, -1.0, 2.0]))
        truth = run_truth(eight_spec, world, 1e-2, 1.0)
        d = np.linalg.norm(truth.p_I - world.anchor_I, axis=1)
        np.testing.assert_allclose(np.linalg.norm(truth.p_B, axis=1), d, rtol=1e-12)

    def test_rotated_frame(self, eight_spec, world):
        Q = exp_so3([0.4, -0.2, 1.1])
        w2 = WorldConstants(Q @ world.g_I, Q @ world.m_I, Q @ world.anchor_I)
        a = run_truth(eight_spec, world, 1e-2, 2.0)
        b = run_truth(eight_spec.rotated(Q), w2, 1e-2, 2.0)
        np.testing.assert_allclose(b.a_B, a.a_B, atol=1e-9)
        np.testing.assert_allclose(b.p_B, a.p_B, atol=1e-9)


class Test_sense:
    def test_noiseless_range(self, world):
        truth = truth_at(static_trajectory(p0=(1.0, 0.0, 0.0)), world, 0.0)
        sample = sense(truth, world, NoiseConfig.noiseless(), NoiseStreams(0))
        assert sample.d_y == 1.0

    def test_noiseless_magnetometer(self, world):
        truth = truth_at(static_trajectory(), world, 0.0)
        sample = sense(truth, world, NoiseConfig.noiseless(), NoiseStreams(0))
        np.testing.assert_allclose(sample.m_y_B, np.array([1.0, 0.0, 1.0]) / np.sqrt(2))

    def test_noiseless_run(self, eight_truth, world):
        log = sense_run(eight_truth, NoiseConfig.noiseless())
        np.testing.assert_array_equal(log.d_y**2, np.linalg.norm(eight_truth.p_I - world.anchor_I, axis=1) ** 2)
        np.testing.assert_array_equal(log.omega_y, eight_truth.omega)
        np.testing.assert_array_equal(log.a_y_B, eight_truth.a_B)

    def test_magnetometer_variance(self, world):
        truth = run_truth(static_trajectory(R0=exp_so3([0.1, 0.2, 0.3])), world, 1e-3, 100.0)
        noise = NoiseConfig(sigma_omega=0.0, sigma_acc=0.0, sigma_mag=0.1, sigma_uwb=0.0, seed=3)
        log = sense_run(truth, noise)
        resid = log.m_y_B - np.einsum("nji,j->ni", truth.R, world.m_I)
        var = resid.var(axis=0)
        assert len(resid) >= 100_000
        assert np.all((var >= 0.0095) & (var <= 0.0105))

    def test_sequential_draws_equal_batch_draws(self):
        batch = NoiseStreams(11)
        seq = NoiseStreams(11)
        for sensor in ("gyro", "accel", "mag", "uwb"):
            block = batch.draw(sensor, 50)
            rows = np.stack([seq.draw(sensor) for _ in range(50)])
            np.testing.assert_array_equal(rows, block)

    def test_sequential_equals_batch(self, eight_truth, world):
        noise = NoiseConfig(seed=11)
        log = sense_run(eight_truth, noise)
        streams = NoiseStreams(noise.seed)
        for k in range(5):
            s = sense(eight_truth[k], world, noise, streams)
            np.testing.assert_array_equal(s.omega_y, log.omega_y[k])
            np.testing.assert_array_equal(s.a_y_B, log.a_y_B[k])
            np.testing.assert_allclose(s.m_y_B, log.m_y_B[k], rtol=0, atol=1e-15)
            assert s.d_y == pytest.approx(log.d_y[k], rel=1e-15)

    def test_seeds_differ(self, eight_truth):
        a = sense_run(eight_truth, NoiseConfig(seed=1))
        b = sense_run(eight_truth, NoiseConfig(seed=2))
        assert not np.array_equal(a.a_y_B, b.a_y_B)

    def test_streams_independent_of_other_sensors(self, eight_truth):
        # switching the gyro noise off must not change the accelerometer draws
        a = sense_run(eight_truth, NoiseConfig(seed=5))
        b = sense_run(eight_truth, NoiseConfig(sigma_omega=0.0, seed=5))
        np.testing.assert_array_equal(a.a_y_B, b.a_y_B)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_ranges_non_negative(self, seed):
        world = WorldConstants()
        truth = run_truth(static_trajectory(p0=(0.01, 0.0, 0.0)), world, 0.1, 5.0)
        log = sense_run(truth, NoiseConfig(sigma_uwb=1.0, seed=seed))
        assert np.all(log.d_y >= 0.0)


def test_presets(world):
    for name in ("eight", "free_fall", "static", "rank_one", "three_tone"):
        assert preset(name, world).name == name
    with pytest.raises(KeyError):
        preset("loop", world)


def test_free_fall_has_zero_apparent_acceleration(world):
    truth = run_truth(preset("free_fall", world), world, 1e-2, 3.0)
    assert np.max(np.abs(truth.a_B)) < 1e-12


def test_three_tone_acceleration(world):
    truth = run_truth(preset("three_tone", world), world, 1e-2, 3.0)
    t = truth.t
    np.testing.assert_allclose(truth.a_B, np.c_[np.sin(t), np.sin(2 * t), np.sin(3 * t)], atol=1e-12)
