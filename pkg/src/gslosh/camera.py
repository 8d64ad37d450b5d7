"""Pinhole projection between world points and pixel coordinates.

The intrinsic matrix carries focal lengths, optical center, and skew;
rigid extrinsics map world points into the camera frame. A separate
homogeneous scale (the camera-frame depth) performs the perspective
divide, so projection with known depth is exactly invertible.
"""

import json
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, ProjectionError
from .validation import as_vector


@dataclass
class CameraIntrinsics:
    f_x: float
    f_y: float
    c_x: float
    c_y: float
    skew: float = 0.0

    def __post_init__(self):
        if self.f_x <= 0 or self.f_y <= 0:
            raise ConfigurationError("focal lengths must be positive")

    @property
    def matrix(self):
        return np.array(
            [
                [self.f_x, self.skew, self.c_x],
                [0.0, self.f_y, self.c_y],
                [0.0, 0.0, 1.0],
            ]
        )


@dataclass
class CameraExtrinsics:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.translation = as_vector(self.translation, size=3, name="translation")
        if self.rotation.shape != (3, 3):
            raise ConfigurationError("rotation must be 3x3")
        if np.max(np.abs(self.rotation.T @ self.rotation - np.eye(3))) > 1e-9:
            raise ConfigurationError("rotation is not orthonormal")
        if abs(np.linalg.det(self.rotation) - 1.0) > 1e-9:
            raise ConfigurationError("rotation must be proper (det = +1)")

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))


def project(p_world, intrinsics, extrinsics):
    """World point -> (u, v, depth). Depth is the camera-frame z coordinate."""
    p = as_vector(p_world, size=3, name="point")
    cam = extrinsics.rotation @ p + extrinsics.translation
    depth = cam[2]
    if depth <= 0:
        raise ProjectionError(f"point has non-positive depth {depth}")
    homogeneous = intrinsics.matrix @ cam
    return homogeneous[0] / depth, homogeneous[1] / depth, depth


def backproject(u, v, depth, intrinsics, extrinsics):
    """Invert projection given pixel coordinates and the camera-frame depth."""
    if depth <= 0:
        raise ProjectionError(f"depth must be positive, got {depth}")
    k = intrinsics.matrix
    if abs(np.linalg.det(k)) < 1e-12:
        raise ConfigurationError("intrinsic matrix is singular")
    pixel = np.array([u, v, 1.0]) * depth
    cam = np.linalg.solve(k, pixel)
    return extrinsics.rotation.T @ (cam - extrinsics.translation)


@dataclass
class RigidPose:
    """Pose of the cup-bottom frame expressed in world coordinates."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        ext = CameraExtrinsics(self.rotation, self.translation)  # reuse checks
        self.rotation = ext.rotation
        self.translation = ext.translation

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))


def to_cup_frame(points, pose):
    """Express world points in the cup-local frame (origin at cup bottom)."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    local = (pts - pose.translation) @ pose.rotation
    return local[0] if np.asarray(points).ndim == 1 else local


def from_cup_frame(points, pose):
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    world = pts @ pose.rotation.T + pose.translation
    return world[0] if np.asarray(points).ndim == 1 else world


def load_camera_json(path):
    """Read intrinsics and extrinsics from a JSON file.

    Expected fields: f_x, f_y, c_x, c_y, skew, R (nine values, row-major),
    t (three values).
    """
    with open(path) as fh:
        doc = json.load(fh)
    intr = CameraIntrinsics(
        f_x=float(doc["f_x"]),
        f_y=float(doc["f_y"]),
        c_x=float(doc["c_x"]),
        c_y=float(doc["c_y"]),
        skew=float(doc.get("skew", 0.0)),
    )
    extr = CameraExtrinsics(
        rotation=np.asarray(doc["R"], dtype=np.float64).reshape(3, 3),
        translation=np.asarray(doc["t"], dtype=np.float64),
    )
    return intr, extr
