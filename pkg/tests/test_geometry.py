import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bevdebias.geometry import (
    CameraModel,
    DegenerateProjectionError,
    EgoPoint,
    Extrinsics,
    Intrinsics,
    InvalidDepthError,
    PixelPoint,
    euler_pose,
    project,
    rig_from_dict,
    rig_to_dict,
    unproject,
    yaw_only_extrinsics,
)
from conftest import random_camera

angles = st.floats(-math.pi, math.pi, allow_nan=False)
coords = st.floats(-20.0, 20.0, allow_nan=False)


def test_project_optical_axis_point(identity_camera):
    pix = project(EgoPoint(0.0, 0.0, 10.0), identity_camera)
    assert (pix.u, pix.v, pix.d) == (352.0, 192.0, 10.0)


def test_project_lateral_offset_at_nuscenes_focal():
    cam = CameraModel(Intrinsics(1260.0, 1260.0, 800.0, 450.0, 1600, 900),
                      Extrinsics.identity())
    on_axis = project(EgoPoint(0.0, 0.0, 20.0), cam)
    offset = project(EgoPoint(1.0, 0.0, 20.0), cam)
    assert offset.u - on_axis.u == pytest.approx(1260.0 / 20.0, abs=1e-12)


def test_unproject_inverts_trivial_example(identity_camera):
    p = unproject(PixelPoint(352.0, 192.0, 10.0), identity_camera)
    assert (p.x, p.y, p.z) == pytest.approx((0.0, 0.0, 10.0), abs=1e-12)


def test_unproject_huge_depth_stays_finite(identity_camera):
    p = unproject(PixelPoint(700.0, 380.0, 1e6), identity_camera)
    assert all(math.isfinite(c) for c in (p.x, p.y, p.z))


def test_unproject_rejects_nonpositive_depth(identity_camera):
    with pytest.raises(InvalidDepthError):
        unproject(PixelPoint(10.0, 10.0, 0.0), identity_camera)
    with pytest.raises(InvalidDepthError):
        unproject(PixelPoint(10.0, 10.0, -2.0), identity_camera)


def test_project_degenerate_depth_raises(identity_camera):
    with pytest.raises(DegenerateProjectionError):
        project(EgoPoint(1.0, 1.0, 1e-10), identity_camera)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1),
       st.floats(10.0, 690.0), st.floats(10.0, 370.0), st.floats(0.1, 80.0))
def test_project_unproject_round_trip(seed, u, v, d):
    cam = random_camera(np.random.default_rng(seed))
    p = unproject(PixelPoint(u, v, d), cam)
    pix = project(p, cam)
    assert pix.u == pytest.approx(u, rel=1e-9, abs=1e-9)
    assert pix.v == pytest.approx(v, rel=1e-9, abs=1e-9)
    assert pix.d == pytest.approx(d, rel=1e-9, abs=1e-12)
    p2 = unproject(pix, cam)
    for a, b in ((p.x, p2.x), (p.y, p2.y), (p.z, p2.z)):
        assert a == pytest.approx(b, rel=1e-9, abs=1e-9)


def test_projection_homogeneous_in_depth(identity_camera):
    cam = random_camera(np.random.default_rng(3))
    p = unproject(PixelPoint(200.0, 150.0, 12.0), cam)
    center = cam.extrinsics.camera_center()
    scaled = center + 3.5 * (p.as_array() - center)
    pix_a = project(p, cam)
    pix_b = project(EgoPoint(*scaled), cam)
    assert pix_b.u == pytest.approx(pix_a.u, abs=1e-9)
    assert pix_b.v == pytest.approx(pix_a.v, abs=1e-9)
    assert pix_b.d == pytest.approx(3.5 * pix_a.d, rel=1e-12)


def test_yaw_only_zero_is_identity():
    e = yaw_only_extrinsics(0.0, np.zeros(3))
    assert np.array_equal(e.rotation, np.eye(3))
    assert np.array_equal(e.translation, np.zeros(3))


def test_yaw_only_quarter_turn_matches_matrix_product():
    theta = math.pi / 2
    e = yaw_only_extrinsics(theta, np.zeros(3))
    c, s = math.cos(theta), math.sin(theta)
    expected = np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]]) @ np.array([1.0, 0.0, 0.0])
    assert e.apply(np.array([1.0, 0.0, 0.0])) == pytest.approx(expected, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(angles, st.tuples(coords, coords, coords))
def test_yaw_only_composes_with_inverse_to_identity(theta, t):
    e = yaw_only_extrinsics(theta, np.array(t))
    round_trip = e.inverse().compose(e)
    assert np.allclose(round_trip.rotation, np.eye(3), atol=1e-9)
    assert np.allclose(round_trip.translation, 0.0, atol=1e-9)


def test_euler_pose_all_zeros_is_identity():
    e = euler_pose(0.0, 0.0, 0.0, np.zeros(3))
    assert np.array_equal(e.rotation, np.eye(3))
    assert np.array_equal(e.translation, np.zeros(3))


@settings(max_examples=100, deadline=None)
@given(angles, st.tuples(coords, coords, coords))
def test_euler_pose_yaw_only_consistency(yaw, position):
    pos = np.array(position)
    e = euler_pose(yaw, 0.0, 0.0, pos)
    y = yaw_only_extrinsics(yaw, -e.rotation @ pos)
    assert np.allclose(e.rotation, y.rotation, atol=1e-15)
    assert np.allclose(e.translation, y.translation, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(angles, angles, angles)
def test_euler_pose_rotation_orthonormal(yaw, pitch, roll):
    r = euler_pose(yaw, pitch, roll, np.zeros(3)).rotation
    assert np.max(np.abs(r @ r.T - np.eye(3))) < 1e-12
    assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_extrinsic_composition_associative_and_inverse_exact(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_camera(rng).extrinsics for _ in range(3))
    left = a.compose(b).compose(c)
    right = a.compose(b.compose(c))
    assert np.allclose(left.rotation, right.rotation, atol=1e-9)
    assert np.allclose(left.translation, right.translation, atol=1e-9)
    ident = a.compose(a.inverse())
    assert np.allclose(ident.rotation, np.eye(3), atol=1e-9)
    assert np.allclose(ident.translation, 0.0, atol=1e-9)


def test_intrinsics_invariants_enforced():
    with pytest.raises(ValueError):
        Intrinsics(-1.0, 100.0, 50.0, 50.0, 100, 100)
    with pytest.raises(ValueError):
        Intrinsics(100.0, 100.0, 150.0, 50.0, 100, 100)


def test_extrinsics_rejects_non_orthonormal():
    with pytest.raises(ValueError):
        Extrinsics(np.eye(3) * 2.0, np.zeros(3))
    with pytest.raises(ValueError):
        # orthonormal but determinant -1 (a reflection)
        Extrinsics(np.diag([1.0, 1.0, -1.0]), np.zeros(3))


def test_rig_json_round_trip_and_field_names():
    rng = np.random.default_rng(11)
    cams = [random_camera(rng), random_camera(rng)]
    data = rig_to_dict(cams)
    assert set(data) == {"format_version", "cameras"}
    entry = data["cameras"][0]
    assert set(entry) == {"name", "intrinsics", "extrinsics"}
    assert set(entry["intrinsics"]) == {"fu", "fv", "cu", "cv", "width", "height"}
    assert set(entry["extrinsics"]) == {"rotation", "translation"}
    assert len(entry["extrinsics"]["rotation"]) == 9
    back = rig_from_dict(data)
    for orig, loaded in zip(cams, back):
        assert loaded.intrinsics == orig.intrinsics
        assert np.array_equal(loaded.extrinsics.rotation, orig.extrinsics.rotation)
        assert np.array_equal(loaded.extrinsics.translation,
                              orig.extrinsics.translation)
