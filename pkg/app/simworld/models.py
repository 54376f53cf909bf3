from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from app.errors import DegenerateField, ValidationError
from app.geometry import (
    CameraIntrinsics,
    RigidTransform,
    UnitQuaternion,
    wrap_angle,
)

MIN_LANDMARKS = 12


@dataclass(frozen=True, eq=False)
class LandmarkField:
    points: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        if points.ndim != 2 or points.shape[1] != 3:
            raise ValidationError(f"landmarks must be (n, 3), got {points.shape}")
        if len(points) < MIN_LANDMARKS:
            raise DegenerateField(
                f"field needs at least {MIN_LANDMARKS} landmarks, got {len(points)}"
            )
        singular = np.linalg.svd(points - points.mean(axis=0), compute_uv=False)
        if singular[-1] <= 1e-3 * singular[0]:
            raise DegenerateField("landmarks are coplanar")
        points.flags.writeable = False
        object.__setattr__(self, "points", points)

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class BaseState:
    x: float = 0.0
    y: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))

    def as_transform(self) -> RigidTransform:
        """World-from-base transform of the planar pose."""
        return RigidTransform(UnitQuaternion.from_yaw(self.yaw), [self.x, self.y, 0.0])

    def offset(self, dx, dy, dyaw) -> BaseState:
        return BaseState(self.x + dx, self.y + dy, self.yaw + dyaw)


@dataclass(frozen=True)
class WorldConfig:
    n_landmarks: int = 200
    landmark_x: tuple[float, float] = (1.5, 3.0)
    landmark_y: tuple[float, float] = (-1.2, 1.2)
    landmark_z: tuple[float, float] = (0.0, 1.4)
    near: float = 0.1
    far: float = 6.0
    max_depth: float = 6.0
    splat_radius: int = 1
    pixel_noise_sigma: float = 1.0
    outlier_fraction: float = 0.1
    depth_noise_sigma: float = 0.005
    actuation_noise_sigma: float = 0.02
    coupling_gain: float = 0.0
    fx: float = 300.0
    fy: float = 300.0
    cx: float = 160.0
    cy: float = 160.0
    width: int = 320
    height: int = 320
    seed: int = 0

    def __post_init__(self):
        noise = (
            self.pixel_noise_sigma,
            self.depth_noise_sigma,
            self.actuation_noise_sigma,
            self.coupling_gain,
        )
        if min(noise) < 0:
            raise ValidationError("noise magnitudes must be >= 0")
        if not 0.0 <= self.outlier_fraction < 1.0:
            raise ValidationError("outlier_fraction must be in [0, 1)")
        if not 0 < self.near < self.far:
            raise ValidationError("visibility limits need 0 < near < far")
        if self.n_landmarks < 1 or self.width < 1 or self.height < 1:
            raise ValidationError("landmark count and image size must be positive")

    @property
    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(self.fx, self.fy, self.cx, self.cy)

    def noise_free(self) -> WorldConfig:
        return replace(
            self,
            pixel_noise_sigma=0.0,
            outlier_fraction=0.0,
            depth_noise_sigma=0.0,
            actuation_noise_sigma=0.0,
            coupling_gain=0.0,
        )


@dataclass(frozen=True)
class ScenarioConfig:
    """Goal pose plus either a fixed start offset or ranges to sample one from."""

    goal: tuple[float, float, float] = (0.0, 0.0, 0.0)
    start_offset: tuple[float, float, float] | None = None
    start_dx: tuple[float, float] = (-0.35, 0.35)
    start_dy: tuple[float, float] = (-0.35, 0.35)
    start_dyaw: tuple[float, float] = (-math.radians(20.0), math.radians(20.0))
    field_seed: int | None = None

    @property
    def goal_state(self) -> BaseState:
        return BaseState(*self.goal)


@dataclass(frozen=True, eq=False)
class KinematicChain:
    """Joint positions tracking their targets with a first-order lag tau per joint."""

    q: np.ndarray
    tau: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    saturated: bool = False

    def __post_init__(self):
        q = np.array(self.q, dtype=float).ravel()
        n = q.size
        tau = np.broadcast_to(np.asarray(self.tau, dtype=float), (n,)).copy()
        lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (n,)).copy()
        upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (n,)).copy()
        if not np.all(tau > 0):
            raise ValidationError("actuator lag constants must be positive")
        if np.any(lower > upper):
            raise ValidationError("joint lower limits exceed upper limits")
        if np.any(q < lower) or np.any(q > upper):
            raise ValidationError(f"joint positions {q} outside limits")
        for arr in (q, tau, lower, upper):
            arr.flags.writeable = False
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def at_rest(cls, n_joints, tau, limit=math.pi):
        return cls(np.zeros(n_joints), tau, -limit, limit)

    def __len__(self):
        return self.q.size
