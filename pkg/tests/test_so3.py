import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rangenav.so3 import (
    DegenerateMatrix,
    NotAntisymmetric,
    exp_so3,
    is_rotation,
    project_to_so3,
    psi_a,
    rotation_angle,
    skew,
    vex,
)

E = np.eye(3)
finite = st.floats(-10.0, 10.0, allow_nan=False, allow_infinity=False)
vec3 = arrays(np.float64, 3, elements=finite)
mat3 = arrays(np.float64, (3, 3), elements=finite)


class Test_skew:
    def test_basis(self):
        np.testing.assert_array_equal(skew(E[0]) @ E[1], E[2])

    def test_zero(self):
        np.testing.assert_array_equal(skew(np.zeros(3)), np.zeros((3, 3)))

    def test_self_cross(self):
        v = np.array([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(skew(v) @ v, np.zeros(3))

    def test_stack(self):
        v = np.arange(12.0).reshape(4, 3)
        S = skew(v)
        assert S.shape == (4, 3, 3)
        np.testing.assert_array_equal(S[2], skew(v[2]))

    @given(vec3)
    def test_antisymmetric(self, v):
        S = skew(v)
        assert np.max(np.abs(S + S.T)) <= 1e-15

    @given(vec3, vec3)
    def test_anticommutes(self, v, w):
        np.testing.assert_allclose(skew(v) @ w, -skew(w) @ v, atol=1e-12)
        np.testing.assert_allclose(skew(v) @ w, np.cross(v, w), atol=1e-12)


class Test_vex:
    @pytest.mark.parametrize("v", [[1.0, 2.0, 3.0], [0.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    def test_round_trip_examples(self, v):
        np.testing.assert_array_equal(vex(skew(v)), v)

    @given(vec3)
    def test_round_trip(self, v):
        np.testing.assert_array_equal(vex(skew(v)), v)

    def test_rejects_symmetric(self):
        with pytest.raises(NotAntisymmetric):
            vex(np.eye(3))

    def test_tolerance(self):
        M = skew([1.0, 2.0, 3.0])
        M[0, 1] += 5e-10
        vex(M)
        M[0, 1] += 1e-9
        with pytest.raises(NotAntisymmetric):
            vex(M)


class Test_psi_a:
    def test_antisymmetric_input(self):
        v = np.array([0.3, -1.2, 2.0])
        np.testing.assert_allclose(psi_a(skew(v)), v)

    def test_symmetric_input(self):
        np.testing.assert_array_equal(psi_a(np.eye(3)), np.zeros(3))

    def test_single_entry(self):
        np.testing.assert_array_equal(psi_a(np.outer(E[0], E[1])), [0.0, 0.0, -0.5])

    @given(mat3)
    def test_only_antisymmetric_part_matters(self, A):
        np.testing.assert_allclose(psi_a(A), psi_a(0.5 * (A - A.T)), atol=1e-12)


class Test_exp_so3:
    def test_zero(self):
        np.testing.assert_array_equal(exp_so3(np.zeros(3)), np.eye(3))

    def test_quarter_turn(self):
        np.testing.assert_allclose(exp_so3(np.pi / 2 * E[1]) @ E[0], -E[2], atol=1e-15)

    def test_full_turn(self):
        np.testing.assert_allclose(exp_so3(2 * np.pi * E[0]), np.eye(3), atol=1e-9)

    @pytest.mark.parametrize("scale", [1e-12, 1e-9, 5e-9, 2e-8, 1e-6])
    def test_small_angle_branch_is_continuous(self, scale):
        v = scale * np.array([0.6, -0.8, 0.0])
        expected = np.eye(3) + skew(v) + 0.5 * skew(v) @ skew(v)
        np.testing.assert_allclose(exp_so3(v), expected, atol=1e-15)

    @given(vec3)
    def test_inverse(self, v):
        np.testing.assert_allclose(exp_so3(v) @ exp_so3(-v), np.eye(3), atol=1e-12)

    @given(vec3)
    def test_is_rotation(self, v):
        assert is_rotation(exp_so3(v))

    def test_matches_scipy(self, rng):
        from scipy.spatial.transform import Rotation

        v = rng.normal(size=(20, 3))
        np.testing.assert_allclose(exp_so3(v), Rotation.from_rotvec(v).as_matrix(), atol=1e-13)


class Test_project_to_so3:
    @given(vec3)
    def test_idempotent(self, v):
        R = exp_so3(v)
        np.testing.assert_allclose(project_to_so3(R), R, atol=1e-13)

    def test_removes_scaling(self):
        np.testing.assert_allclose(project_to_so3(1.01 * np.eye(3)), np.eye(3), atol=1e-15)

    def test_perturbation(self):
        E_pert = np.arange(1.0, 10.0).reshape(3, 3)
        E_pert /= np.linalg.norm(E_pert)
        R = project_to_so3(exp_so3(0.3 * E[0]) + 1e-6 * E_pert)
        assert np.linalg.norm(R.T @ R - np.eye(3)) < 1e-12

    @pytest.mark.parametrize("M", [-np.eye(3), np.diag([1.0, 1.0, 0.0]), np.zeros((3, 3))])
    def test_degenerate(self, M):
        with pytest.raises(DegenerateMatrix):
            project_to_so3(M)

    @given(mat3)
    def test_output_is_rotation(self, M):
        M = 0.5 * M + 20.0 * np.eye(3)  # diagonally dominant, so det > 0
        assert is_rotation(project_to_so3(M))


class Test_rotation_angle:
    @pytest.mark.parametrize(
        "v, angle",
        [(np.zeros(3), 0.0), (0.7 * E[2], 0.7), (np.pi * E[0], np.pi)],
    )
    def test_examples(self, v, angle):
        assert rotation_angle(exp_so3(v)) == pytest.approx(angle, abs=1e-12)

    @given(st.floats(0.0, 3.1), vec3)
    def test_axis_angle_round_trip(self, angle, axis):
        n = np.linalg.norm(axis)
        if n < 1e-3:
            return
        assert rotation_angle(exp_so3(angle * axis / n)) == pytest.approx(angle, abs=1e-7)

    def test_stack(self):
        R = exp_so3(np.array([[0.1, 0, 0], [0, 0.2, 0]]))
        np.testing.assert_allclose(rotation_angle(R), [0.1, 0.2])
