from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from app.errors import StepBudgetExhausted, ValidationError
from app.geometry import PixelPoint, RigidTransform, UnitQuaternion

AXES = ("x", "y", "yaw")
DONE = "done"


@dataclass(frozen=True, eq=False)
class Correspondence:
    goal_pixel: PixelPoint
    current_point: np.ndarray

    def __post_init__(self):
        point = np.array(self.current_point, dtype=float)
        if point.shape != (3,) or not point[2] > 0:
            raise ValidationError(f"current point must be in front of the camera: {point}")
        object.__setattr__(self, "current_point", point)


@dataclass(frozen=True, eq=False)
class CorrespondenceSet:
    """Goal-image pixels (n, 2) matched to current-camera points (n, 3).

    outliers labels the matches the oracle corrupted; it is for tests only.
    """

    pixels: np.ndarray
    points: np.ndarray
    outliers: np.ndarray | None = None

    def __post_init__(self):
        pixels = np.array(self.pixels, dtype=float).reshape(-1, 2)
        points = np.array(self.points, dtype=float).reshape(-1, 3)
        if len(pixels) != len(points):
            raise ValidationError(f"{len(pixels)} pixels but {len(points)} points")
        if len(points) and not np.all(points[:, 2] > 0):
            raise ValidationError("every current point must have positive depth")
        object.__setattr__(self, "pixels", pixels)
        object.__setattr__(self, "points", points)
        if self.outliers is not None:
            object.__setattr__(self, "outliers", np.asarray(self.outliers, dtype=bool))

    @classmethod
    def from_correspondences(cls, corrs):
        corrs = list(corrs)
        return cls(
            [c.goal_pixel.as_array() for c in corrs],
            [c.current_point for c in corrs],
        )

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        for pixel, point in zip(self.pixels, self.points):
            yield Correspondence(PixelPoint(*pixel), point)

    def subset(self, mask) -> CorrespondenceSet:
        outliers = None if self.outliers is None else self.outliers[mask]
        return CorrespondenceSet(self.pixels[mask], self.points[mask], outliers)


@dataclass(frozen=True, eq=False)
class PnPEstimate:
    """Goal-camera pose of the current camera: X_goal = R X_current + t."""

    rotation: UnitQuaternion
    translation: np.ndarray
    inlier_mask: np.ndarray
    mean_reprojection_error: float

    @property
    def transform(self) -> RigidTransform:
        return RigidTransform(self.rotation, self.translation)

    @property
    def n_inliers(self) -> int:
        return int(np.count_nonzero(self.inlier_mask))

    @classmethod
    def from_transform(cls, t: RigidTransform, inlier_mask, error=0.0):
        return cls(t.rotation, t.translation, np.asarray(inlier_mask, dtype=bool), error)


@dataclass(frozen=True)
class PoseError:
    e_x: float
    e_y: float
    e_yaw: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.e_x, self.e_y, self.e_yaw)):
            raise ValidationError(f"non-finite pose error {self}")
        if not -math.pi < self.e_yaw <= math.pi:
            raise ValidationError(f"e_yaw {self.e_yaw} not wrapped to (-pi, pi]")

    def axis(self, name) -> float:
        return getattr(self, f"e_{name}")

    def as_array(self) -> np.ndarray:
        return np.array([self.e_x, self.e_y, self.e_yaw])


@dataclass(frozen=True)
class PidGains:
    kp: float = 0.8
    ki: float = 0.0
    kd: float = 0.1
    integral_clamp: float = 1.0
    output_clamp: float = 0.3

    def __post_init__(self):
        if min(self.kp, self.ki, self.kd) < 0:
            raise ValidationError(f"PID gains must be >= 0, got {self}")
        if not (self.integral_clamp > 0 and self.output_clamp > 0):
            raise ValidationError("PID clamps must be positive")


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0
    previous_error: float = 0.0
    initialized: bool = False


def default_gains():
    return {
        "x": PidGains(output_clamp=0.3),
        "y": PidGains(output_clamp=0.3),
        "yaw": PidGains(output_clamp=0.5),
    }


def default_extrinsic() -> RigidTransform:
    """Camera-to-base mount: optical axis forward, image x left-to-right, image y down."""
    # Columns are the camera x, y, z axes in base coordinates
    rotation = np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])
    return RigidTransform.from_rt(rotation, [0.1, 0.0, 0.6])


@dataclass(frozen=True)
class ServoConfig:
    eps_x: float = 0.01
    eps_y: float = 0.01
    eps_yaw: float = math.radians(1.0)
    ransac_iterations: int = 200
    ransac_confidence: float = 0.999
    inlier_threshold_px: float = 4.0
    refine_max_iterations: int = 20
    tolerance: float = 1e-10
    dt: float = 0.2
    max_steps: int = 200
    min_matches: int = 6
    max_matcher_failures: int = 5
    sequential: bool = True
    open_loop_duration: float = 2.0
    gains: dict = field(default_factory=default_gains)
    extrinsic: RigidTransform = field(default_factory=default_extrinsic)

    def __post_init__(self):
        if min(self.eps_x, self.eps_y, self.eps_yaw) <= 0:
            raise ValidationError("servo thresholds must be positive")
        if not self.dt > 0:
            raise ValidationError(f"control period must be positive, got {self.dt}")
        if self.ransac_iterations < 1 or self.max_steps < 1:
            raise ValidationError("iteration caps must be >= 1")
        if not 0 < self.ransac_confidence < 1:
            raise ValidationError("ransac_confidence must be in (0, 1)")
        if self.min_matches < 4:
            raise ValidationError("min_matches must be >= 4")
        missing = set(AXES) - set(self.gains)
        if missing:
            raise ValidationError(f"missing PID gains for {sorted(missing)}")

    def threshold(self, axis) -> float:
        return getattr(self, f"eps_{axis}")


@dataclass(frozen=True)
class CycleRecord:
    cycle: int
    n_matches: int
    n_inliers: int
    reproj_error_px: float
    error: PoseError
    active_axis: str
    command: tuple[float, float, float]
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ServoOutcome:
    status: str
    steps: int
    history: tuple[CycleRecord, ...]

    CONVERGED = "converged"
    BUDGET_EXHAUSTED = "step_budget_exhausted"

    @property
    def converged(self) -> bool:
        return self.status == self.CONVERGED

    @property
    def final_error(self) -> PoseError | None:
        return self.history[-1].error if self.history else None

    def raise_for_status(self):
        if not self.converged:
            raise StepBudgetExhausted(self)
        return self
