import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from slmosaic.errors import DegenerateHomography, DegenerateProjection, InvalidParams, NonPositiveDepth
from slmosaic.geometry import (
    CameraIntrinsics,
    Homography2D,
    RigidTransform3D,
    apply_homography,
    apply_rigid,
    compose_rigid,
    euler_from_rotation,
    project,
    rotation_from_euler,
)

angle = st.floats(-math.pi, math.pi, allow_nan=False)
small = st.floats(-50, 50, allow_nan=False)


def rigid():
    return st.builds(
        lambda a, b, c, x, y, z: RigidTransform3D(a, b, c, (x, y, z)), angle, angle, angle, small, small, small
    )


K = CameraIntrinsics(f=2.0, lx=0.0025, ly=0.0025, u=383.5, v=287.5, width=768, height=576)


@given(angle, angle, angle)
def test_rotation_is_orthonormal(a, b, c):
    R = rotation_from_euler(a, b, c)
    assert np.allclose(R.T @ R, np.eye(3), atol=1e-9)
    assert abs(np.linalg.det(R) - 1.0) < 1e-9


@given(angle, angle, angle)
def test_euler_matches_independent_zxz(a, b, c):
    # oracle: scipy intrinsic z-x'-z''
    R_ref = Rotation.from_euler("ZXZ", [a, b, c]).as_matrix()
    assert np.allclose(rotation_from_euler(a, b, c), R_ref, atol=1e-12)


@given(angle, angle, angle)
def test_euler_round_trip_reproduces_matrix(a, b, c):
    R = rotation_from_euler(a, b, c)
    assert np.allclose(rotation_from_euler(*euler_from_rotation(R)), R, atol=1e-9)


@pytest.mark.parametrize("b", [0.0, 1e-10, -1e-10, math.pi, math.pi - 1e-10])
def test_euler_round_trip_at_gimbal_lock(b):
    R = rotation_from_euler(0.3, b, -1.1)
    assert np.allclose(rotation_from_euler(*euler_from_rotation(R)), R, atol=1e-9)


def test_rotation_examples():
    assert np.allclose(rotation_from_euler(0, 0, 0), np.eye(3))
    Rz = rotation_from_euler(math.pi / 2, 0, 0)
    assert np.allclose(Rz @ [1, 0, 0], [0, 1, 0])
    Rx = rotation_from_euler(0, math.pi / 2, 0)
    assert np.allclose(Rx @ [0, 1, 0], [0, 0, 1])


@settings(max_examples=50)
@given(rigid(), rigid(), rigid())
def test_composition_is_associative(a, b, c):
    left = a.compose(b).compose(c)
    right = a.compose(b.compose(c))
    assert np.allclose(left.matrix4(), right.matrix4(), atol=1e-9)


@settings(max_examples=50)
@given(rigid(), st.lists(st.tuples(small, small, small), min_size=1, max_size=5))
def test_compose_and_inverse_act_on_points(T, pts):
    p = np.array(pts)
    assert np.allclose(T.inverse().apply(T.apply(p)), p, atol=1e-9)
    S = RigidTransform3D(0.1, 0.2, 0.3, (1, 2, 3))
    assert np.allclose(compose_rigid(T, S).apply(p), T.apply(S.apply(p)), atol=1e-9)
    R_ref = Rotation.from_euler("ZXZ", [T.theta1, T.theta2, T.theta3]).as_matrix()
    assert np.allclose(apply_rigid(T, p), p @ R_ref.T + T.D, atol=1e-9)


def test_translation_only_and_identity():
    T = RigidTransform3D(0, 0, 0, (1, 2, 3))
    assert np.allclose(T.apply([1, 1, 1]), [2, 3, 4])
    assert np.allclose(RigidTransform3D.identity().apply([4, 5, 6]), [4, 5, 6])


def test_vertex_and_record_round_trip():
    T = RigidTransform3D.from_vertex([0.1, -0.2, 0.3, 10, 20, -30])
    assert np.allclose(T.as_vertex(), [0.1, -0.2, 0.3, 10, 20, -30])
    assert np.allclose(RigidTransform3D.from_record(T.to_record()).matrix4(), T.matrix4())


def test_project_examples():
    x = project(K, [0.0, 0.0, 30.0])
    assert np.allclose(x, [K.u, K.v])
    x = project(K, [3.0, -1.5, 30.0])
    assert np.allclose(x, [K.u + 800 * 0.1, K.v - 800 * 0.05])
    with pytest.raises(NonPositiveDepth):
        project(K, [0, 0, 0])
    with pytest.raises(NonPositiveDepth):
        project(K, [[0, 0, 5], [1, 1, -1]])


def test_camera_validation_and_scaling():
    with pytest.raises(InvalidParams):
        CameraIntrinsics(0, 1, 1, 1, 1, 10, 10)
    with pytest.raises(InvalidParams):
        CameraIntrinsics(1, 1, 1, 10, 1, 10, 10)
    half = K.scaled(0.5)
    assert (half.width, half.height) == (384, 288)
    assert half.fx == pytest.approx(400)
    # the same ray lands on corresponding pixel centres
    p = np.array([1.0, 2.0, 30.0])
    full, hx = project(K, p), project(half, p)
    assert np.allclose((full + 0.5) * 0.5 - 0.5, hx)
    assert CameraIntrinsics.from_dict(K.to_dict()) == K


def test_homography_examples():
    assert np.allclose(Homography2D.identity().apply([3.0, 4.0]), [3, 4])
    assert np.allclose(Homography2D.translation(10, 5).apply([0.0, 0.0]), [10, 5])
    H = Homography2D((1, 0, 0, 0, 1, 0, 1.0, 0))
    with pytest.raises(DegenerateProjection):
        H.apply([-1.0, 0.0])
    with pytest.raises(DegenerateHomography):
        Homography2D.from_matrix(np.zeros((3, 3)))
    with pytest.raises(DegenerateHomography):
        Homography2D((1, 1, 0, 1, 1, 0, 0, 0)).inverse()


coef = st.floats(-0.2, 0.2, allow_nan=False)


@given(
    st.tuples(coef, coef, st.floats(-50, 50), coef, coef, st.floats(-50, 50), st.floats(-1e-4, 1e-4), st.floats(-1e-4, 1e-4)),
    st.tuples(st.floats(0, 767), st.floats(0, 575)),
)
def test_homography_round_trip(c, p):
    a11, a12, a13, a21, a22, a23, a31, a32 = c
    H = Homography2D((1 + a11, a12, a13, a21, 1 + a22, a23, a31, a32))
    q = apply_homography(H, p)
    assert np.allclose(H.inverse().apply(q), p, atol=1e-6)


def test_homography_compose_matches_sequential_application():
    A = Homography2D((1.01, 0.02, 3, -0.01, 0.99, -2, 1e-5, -2e-5))
    B = Homography2D.translation(4, -1)
    p = np.array([[10.0, 20.0], [300.0, 100.0]])
    assert np.allclose(A.compose(B).apply(p), A.apply(B.apply(p)))
    assert A.compose(B).matrix[2, 2] == 1.0
