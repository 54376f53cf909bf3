from app.geometry.models import (
    CameraIntrinsics,
    PixelPoint,
    Pose,
    RigidTransform,
    UnitQuaternion,
    Vec3,
    vec3,
)
from app.geometry.services import (
    apply_transform,
    compose,
    lift,
    lift_points,
    project,
    project_points,
    quat_distance,
    wrap_angle,
    yaw_of,
)
