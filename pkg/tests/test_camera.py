import json

import numpy as np
import pytest

from gslosh.camera import (
    CameraExtrinsics,
    CameraIntrinsics,
    RigidPose,
    backproject,
    from_cup_frame,
    load_camera_json,
    project,
    to_cup_frame,
)
from gslosh.exceptions import ConfigurationError, ProjectionError


def unit_camera():
    return CameraIntrinsics(1.0, 1.0, 0.0, 0.0), CameraExtrinsics.identity()


def random_camera(rng):
    intr = CameraIntrinsics(
        f_x=rng.uniform(200, 800),
        f_y=rng.uniform(200, 800),
        c_x=rng.uniform(-50, 50),
        c_y=rng.uniform(-50, 50),
        skew=rng.uniform(-2, 2),
    )
    # random proper rotation via QR
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    extr = CameraExtrinsics(q, rng.normal(scale=0.2, size=3))
    return intr, extr


def test_project_unit_camera_origin_ray():
    intr, extr = unit_camera()
    u, v, depth = project([0.0, 0.0, 1.0], intr, extr)
    assert (u, v, depth) == (0.0, 0.0, 1.0)


def test_project_divides_by_depth():
    intr, extr = unit_camera()
    u, v, depth = project([1.0, 2.0, 2.0], intr, extr)
    assert (u, v) == (0.5, 1.0)
    assert depth == 2.0


def test_project_rejects_point_behind_camera():
    intr, extr = unit_camera()
    with pytest.raises(ProjectionError):
        project([0.0, 0.0, -1.0], intr, extr)


def test_backproject_inverts_examples():
    intr, extr = unit_camera()
    np.testing.assert_allclose(backproject(0.0, 0.0, 1.0, intr, extr), [0, 0, 1])
    np.testing.assert_allclose(backproject(0.5, 1.0, 2.0, intr, extr), [1, 2, 2])


def test_backproject_ray_linearity():
    intr, extr = unit_camera()
    p1 = backproject(0.3, -0.2, 1.0, intr, extr)
    p2 = backproject(0.3, -0.2, 2.0, intr, extr)
    np.testing.assert_allclose(p2, 2.0 * p1, atol=1e-12)


def test_round_trip_fuzz():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(1000):
        intr, extr = random_camera(rng)
        # point guaranteed in front of the camera
        cam = np.array([rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.5, 5)])
        p = extr.rotation.T @ (cam - extr.translation)
        u, v, depth = project(p, intr, extr)
        back = backproject(u, v, depth, intr, extr)
        worst = max(worst, float(np.max(np.abs(back - p))))
    assert worst < 1e-9


def test_singular_intrinsics_rejected():
    with pytest.raises(ConfigurationError):
        CameraIntrinsics(0.0, 1.0, 0.0, 0.0)


def test_extrinsics_must_be_rotation():
    with pytest.raises(ConfigurationError):
        CameraExtrinsics(np.eye(3) * 2.0, np.zeros(3))
    with pytest.raises(ConfigurationError):
        CameraExtrinsics(np.diag([1.0, 1.0, -1.0]), np.zeros(3))


def test_cup_frame_identity_and_translation():
    pts = np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]])
    np.testing.assert_array_equal(to_cup_frame(pts, RigidPose.identity()), pts)
    pose = RigidPose(np.eye(3), np.array([1.0, -1.0, 0.5]))
    np.testing.assert_allclose(
        to_cup_frame(pts, pose), pts - np.array([1.0, -1.0, 0.5])
    )


def test_cup_frame_round_trip_and_distances():
    rng = np.random.default_rng(1)
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    pose = RigidPose(q, rng.normal(size=3))
    pts = rng.normal(size=(10, 3))
    local = to_cup_frame(pts, pose)
    np.testing.assert_allclose(from_cup_frame(local, pose), pts, atol=1e-12)
    d_world = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
    d_local = np.linalg.norm(local[:, None] - local[None, :], axis=2)
    np.testing.assert_allclose(d_local, d_world, atol=1e-12)


def test_load_camera_json(tmp_path):
    doc = {
        "f_x": 600.0,
        "f_y": 601.5,
        "c_x": 320.0,
        "c_y": 240.0,
        "skew": 0.1,
        "R": [1, 0, 0, 0, 1, 0, 0, 0, 1],
        "t": [0.1, 0.2, 0.3],
    }
    path = tmp_path / "camera.json"
    path.write_text(json.dumps(doc))
    intr, extr = load_camera_json(path)
    assert intr.f_x == 600.0 and intr.skew == 0.1
    np.testing.assert_array_equal(extr.translation, [0.1, 0.2, 0.3])
