import math

import numpy as np

from app.errors import NonPositiveDepth
from app.geometry.models import (
    CameraIntrinsics,
    PixelPoint,
    Pose,
    RigidTransform,
    UnitQuaternion,
    vec3,
)


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Returns the transform that applies b first, then a."""
    return RigidTransform(a.rotation * b.rotation, a.apply_point(b.translation))


def apply_transform(t: RigidTransform, p: Pose) -> Pose:
    return Pose(t.apply_point(p.position), t.rotation * p.orientation)


def quat_distance(a: UnitQuaternion, b: UnitQuaternion) -> float:
    """Geodesic angle between two rotations, in [0, pi]."""
    delta = a.conjugate() * b
    vector_norm = math.sqrt(delta.x**2 + delta.y**2 + delta.z**2)
    return 2.0 * math.atan2(vector_norm, abs(delta.w))


def wrap_angle(angle: float) -> float:
    """Wraps an angle into (-pi, pi]."""
    return math.pi - (math.pi - angle) % (2.0 * math.pi)


def yaw_of(r: UnitQuaternion) -> float:
    matrix = r.as_matrix()
    return wrap_angle(math.atan2(matrix[1, 0], matrix[0, 0]))


def project(k: CameraIntrinsics, point) -> PixelPoint:
    x, y, z = vec3(point)
    if z <= 0:
        raise NonPositiveDepth(f"cannot project point with z={z}")
    return PixelPoint(k.fx * x / z + k.cx, k.fy * y / z + k.cy)


def lift(k: CameraIntrinsics, px: PixelPoint, depth: float):
    if depth <= 0:
        raise NonPositiveDepth(f"cannot lift pixel with depth={depth}")
    return vec3(
        (px.u - k.cx) * depth / k.fx,
        (px.v - k.cy) * depth / k.fy,
        depth,
    )


def project_points(k: CameraIntrinsics, points) -> np.ndarray:
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    z = points[:, 2]
    if np.any(z <= 0):
        raise NonPositiveDepth(f"{int(np.sum(z <= 0))} points at or behind z=0")
    return np.column_stack(
        [k.fx * points[:, 0] / z + k.cx, k.fy * points[:, 1] / z + k.cy]
    )


def lift_points(k: CameraIntrinsics, pixels, depths) -> np.ndarray:
    pixels = np.asarray(pixels, dtype=float).reshape(-1, 2)
    depths = np.asarray(depths, dtype=float).reshape(-1)
    if np.any(depths <= 0):
        raise NonPositiveDepth(f"{int(np.sum(depths <= 0))} non-positive depths")
    return np.column_stack(
        [
            (pixels[:, 0] - k.cx) * depths / k.fx,
            (pixels[:, 1] - k.cy) * depths / k.fy,
            depths,
        ]
    )
