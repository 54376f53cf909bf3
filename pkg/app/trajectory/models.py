from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from app.errors import ValidationError
from app.geometry import Pose

FINGERS = ("thumb", "index", "middle", "ring", "little")
SIDES = ("left", "right")

# Guidance-action bounds per motion source: (translation m, orientation rad)
ACTION_SOURCE_RANGES = {
    "teleop": (0.2, 0.4),
    "video": (1.0, 1.0),
    "mocap": (1.0, 1.0),
}


def _frozen(values, shape, name):
    arr = np.array(values, dtype=np.float64)
    if arr.shape != shape:
        raise ValidationError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class HandKeypoints:
    """Five fingertips (thumb to little) and the palm center, in meters."""

    fingertips: np.ndarray
    palm: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "fingertips", _frozen(self.fingertips, (5, 3), "fingertips")
        )
        object.__setattr__(self, "palm", _frozen(self.palm, (3,), "palm"))

    @classmethod
    def from_array(cls, values):
        values = np.asarray(values, dtype=float).reshape(6, 3)
        return cls(values[:5], values[5])

    def as_array(self) -> np.ndarray:
        """The six keypoints stacked as a (6, 3) array, palm last."""
        return np.vstack([self.fingertips, self.palm])


@dataclass(frozen=True, eq=False)
class HandState:
    keypoints: HandKeypoints
    wrist: Pose


@dataclass(frozen=True, eq=False)
class TrajectoryFrame:
    object_poses: tuple[tuple[str, Pose], ...]
    left_hand: HandState
    right_hand: HandState
    # One 6-vector per arm: translation (m) then Euler angles (rad)
    left_action: np.ndarray = field(default_factory=lambda: np.zeros(6))
    right_action: np.ndarray = field(default_factory=lambda: np.zeros(6))

    def __post_init__(self):
        object.__setattr__(self, "object_poses", tuple(self.object_poses))
        object.__setattr__(
            self, "left_action", _frozen(self.left_action, (6,), "left_action")
        )
        object.__setattr__(
            self, "right_action", _frozen(self.right_action, (6,), "right_action")
        )
        ids = self.object_ids
        if len(set(ids)) != len(ids):
            raise ValidationError(f"duplicate object ids {list(ids)}")

    @property
    def object_ids(self) -> tuple[str, ...]:
        return tuple(object_id for object_id, _ in self.object_poses)

    def object_pose(self, object_id) -> Pose:
        for candidate, pose in self.object_poses:
            if candidate == object_id:
                return pose
        raise KeyError(object_id)

    def hand(self, side) -> HandState:
        return self.left_hand if side == "left" else self.right_hand

    def action(self, side) -> np.ndarray:
        return self.left_action if side == "left" else self.right_action


@dataclass(frozen=True, eq=False)
class ReferenceTrajectory:
    frames: tuple[TrajectoryFrame, ...]
    dt: float

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if not self.frames:
            raise ValidationError("trajectory has no frames")
        if not self.dt > 0:
            raise ValidationError(f"dt must be positive, got {self.dt}")
        expected = set(self.frames[0].object_ids)
        for index, frame in enumerate(self.frames):
            if set(frame.object_ids) != expected:
                raise ValidationError(
                    f"object ids {sorted(frame.object_ids)} differ from "
                    f"{sorted(expected)}",
                    frame=index,
                )

    def __len__(self):
        return len(self.frames)

    @property
    def object_ids(self) -> tuple[str, ...]:
        return self.frames[0].object_ids


@dataclass(frozen=True)
class AugmentationRange:
    x: tuple[float, float] = (-0.05, 0.05)
    y: tuple[float, float] = (-0.05, 0.05)
    z: tuple[float, float] = (0.0, 0.0)
    yaw: tuple[float, float] = (-0.3, 0.3)

    def __post_init__(self):
        for name in ("x", "y", "z", "yaw"):
            low, high = getattr(self, name)
            if low > high:
                raise ValidationError(f"{name} range has lower {low} > upper {high}")
