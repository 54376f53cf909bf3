from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from app.errors import ValidationError

# Positions, translations and directions are float64 arrays of shape (3,)
Vec3 = np.ndarray


def vec3(x, y=None, z=None) -> Vec3:
    """Builds a read-only Vec3 from three reals or any length-3 sequence."""
    values = (x, y, z) if y is not None else x
    arr = np.array(values, dtype=np.float64).reshape(3)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"non-finite vector {arr.tolist()}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class UnitQuaternion:
    """Hamilton quaternion (w, x, y, z). Renormalized on construction."""

    w: float = 1.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    def __post_init__(self):
        norm = math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)
        if not math.isfinite(norm) or norm == 0.0:
            raise ValidationError(
                f"cannot normalize quaternion {(self.w, self.x, self.y, self.z)}"
            )
        for name in ("w", "x", "y", "z"):
            object.__setattr__(self, name, float(getattr(self, name)) / norm)

    @classmethod
    def identity(cls):
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_wxyz(cls, values):
        w, x, y, z = (float(v) for v in values)
        return cls(w, x, y, z)

    @classmethod
    def from_rotation(cls, rotation: Rotation):
        x, y, z, w = rotation.as_quat()
        return cls(w, x, y, z)

    @classmethod
    def from_matrix(cls, matrix):
        return cls.from_rotation(Rotation.from_matrix(np.asarray(matrix, dtype=float)))

    @classmethod
    def from_rotvec(cls, rotvec):
        return cls.from_rotation(Rotation.from_rotvec(np.asarray(rotvec, dtype=float)))

    @classmethod
    def from_axis_angle(cls, axis, angle):
        axis = np.asarray(axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        half = 0.5 * angle
        s = math.sin(half)
        return cls(math.cos(half), axis[0] * s, axis[1] * s, axis[2] * s)

    @classmethod
    def from_yaw(cls, yaw):
        return cls(math.cos(0.5 * yaw), 0.0, 0.0, math.sin(0.5 * yaw))

    def as_wxyz(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def as_rotation(self) -> Rotation:
        return Rotation.from_quat([self.x, self.y, self.z, self.w])

    def as_matrix(self) -> np.ndarray:
        return self.as_rotation().as_matrix()

    def conjugate(self) -> UnitQuaternion:
        return UnitQuaternion(self.w, -self.x, -self.y, -self.z)

    def rotate(self, v) -> np.ndarray:
        return self.as_matrix() @ np.asarray(v, dtype=float)

    def __mul__(self, other: UnitQuaternion) -> UnitQuaternion:
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = other.w, other.x, other.y, other.z
        return UnitQuaternion(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    def __neg__(self) -> UnitQuaternion:
        return UnitQuaternion(-self.w, -self.x, -self.y, -self.z)


@dataclass(frozen=True, eq=False)
class Pose:
    position: Vec3
    orientation: UnitQuaternion = UnitQuaternion()

    def __post_init__(self):
        object.__setattr__(self, "position", vec3(self.position))

    @classmethod
    def from_array(cls, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (7,):
            raise ValidationError(f"pose needs 7 values, got {values.size}")
        return cls(values[:3], UnitQuaternion.from_wxyz(values[3:]))

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.position, self.orientation.as_wxyz()])

    def as_transform(self) -> RigidTransform:
        return RigidTransform(self.orientation, self.position)

    def __repr__(self):
        return f"<Pose {np.round(self.as_array(), 6).tolist()}>"


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Maps a point p to rotation * p + translation."""

    rotation: UnitQuaternion = UnitQuaternion()
    translation: Vec3 = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "translation", vec3(self.translation))

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def from_matrix(cls, matrix):
        matrix = np.asarray(matrix, dtype=float)
        return cls(UnitQuaternion.from_matrix(matrix[:3, :3]), matrix[:3, 3])

    @classmethod
    def from_rt(cls, rotation_matrix, translation):
        return cls(UnitQuaternion.from_matrix(rotation_matrix), translation)

    @classmethod
    def from_array(cls, values):
        pose = Pose.from_array(values)
        return cls(pose.orientation, pose.position)

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.translation, self.rotation.as_wxyz()])

    def as_matrix(self) -> np.ndarray:
        matrix = np.eye(4)
        matrix[:3, :3] = self.rotation.as_matrix()
        matrix[:3, 3] = self.translation
        return matrix

    def inverse(self) -> RigidTransform:
        inv_rotation = self.rotation.conjugate()
        return RigidTransform(inv_rotation, -inv_rotation.rotate(self.translation))

    def apply_point(self, point) -> np.ndarray:
        return self.rotation.rotate(point) + self.translation

    def apply_points(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        return points @ self.rotation.as_matrix().T + self.translation

    def __repr__(self):
        return f"<RigidTransform {np.round(self.as_array(), 6).tolist()}>"


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValidationError(
                f"focal lengths must be positive, got fx={self.fx} fy={self.fy}"
            )

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True)
class PixelPoint:
    u: float
    v: float

    def __post_init__(self):
        if not (math.isfinite(self.u) and math.isfinite(self.v)):
            raise ValidationError(f"non-finite pixel ({self.u}, {self.v})")

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v])
