from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from app.errors import ChainLengthMismatch, ValidationError
from app.trajectory.models import FINGERS, SIDES

CHAIN_LENGTH = 12
HAND_PARTS = tuple(
    f"{side}_{part}" for side in SIDES for part in (*FINGERS, "palm")
)


@dataclass(frozen=True, eq=False)
class DistanceChain:
    """Object-center-to-keypoint vectors, left hand then right, palm last."""

    vectors: np.ndarray

    def __post_init__(self):
        arr = np.array(self.vectors, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValidationError(f"chain vectors must be (n, 3), got {arr.shape}")
        if arr.shape[0] != CHAIN_LENGTH:
            raise ChainLengthMismatch(
                f"chain has {arr.shape[0]} vectors, expected {CHAIN_LENGTH}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValidationError("chain contains non-finite values")
        arr.flags.writeable = False
        object.__setattr__(self, "vectors", arr)

    @classmethod
    def zeros(cls):
        return cls(np.zeros((CHAIN_LENGTH, 3)))

    def flatten(self) -> np.ndarray:
        return self.vectors.ravel()


@dataclass(frozen=True)
class ContactSet:
    """Contacting (hand part, object id) pairs. Absent pairs are not touching."""

    pairs: frozenset

    def __post_init__(self):
        pairs = frozenset(tuple(p) for p in self.pairs)
        for part, _ in pairs:
            if part not in HAND_PARTS:
                raise ValidationError(f"unknown hand part {part!r}")
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def empty(cls):
        return cls(frozenset())

    def touching(self, part, object_id) -> bool:
        return (part, object_id) in self.pairs


@dataclass(frozen=True)
class RewardConfig:
    k1: float = 1.0
    k2: float = 1.0
    lam: float = 1e-3
    n_num: int = 2
    w_chain: float = 1.0
    w_obj: float = 1.0
    termination_distance: float = 0.3
    target_object: str | None = None

    def __post_init__(self):
        for name in ("k1", "k2", "lam"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")
        if self.n_num < 0:
            raise ValidationError("n_num must be >= 0")
        if not self.termination_distance > 0:
            raise ValidationError("termination_distance must be positive")


@dataclass(frozen=True, eq=False)
class JointState:
    forces: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        forces = np.array(self.forces, dtype=np.float64).ravel()
        velocities = np.array(self.velocities, dtype=np.float64).ravel()
        if forces.shape != velocities.shape:
            raise ValidationError(
                f"{forces.size} joint forces but {velocities.size} velocities"
            )
        object.__setattr__(self, "forces", forces)
        object.__setattr__(self, "velocities", velocities)


@dataclass(frozen=True)
class ResidualBounds:
    translation: float = 0.01
    orientation: float = 0.04

    def __post_init__(self):
        if not (self.translation > 0 and self.orientation > 0):
            raise ValidationError("residual bounds must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([self.translation] * 3 + [self.orientation] * 3)


# (field, size) in the order build_observation concatenates them
OBSERVATION_LAYOUT = (
    ("arm_qpos", 12),
    ("hand_qpos", 36),
    ("arm_qvel", 12),
    ("hand_qvel", 36),
    ("hand_pos", 6),
    ("hand_quat", 8),
    ("distance_chain", 72),
    ("contact", 24),
    ("actuator", 24),
    ("time", 1),
    ("ref_hand_pos", 6),
    ("ref_hand_quat", 8),
    ("ref_obj_pos", 3),
    ("ref_obj_quat", 4),
)
OBSERVATION_SIZE = sum(size for _, size in OBSERVATION_LAYOUT)


@dataclass(frozen=True, eq=False)
class RobotState:
    """Proprioceptive state of both arms and hands for one control step."""

    arm_qpos: np.ndarray
    hand_qpos: np.ndarray
    arm_qvel: np.ndarray
    hand_qvel: np.ndarray
    hand_pos: np.ndarray
    hand_quat: np.ndarray
    actuator: np.ndarray

    @classmethod
    def zeros(cls):
        sizes = dict(OBSERVATION_LAYOUT)
        return cls(
            **{
                name: np.zeros(sizes[name])
                for name in (
                    "arm_qpos",
                    "hand_qpos",
                    "arm_qvel",
                    "hand_qvel",
                    "hand_pos",
                    "hand_quat",
                    "actuator",
                )
            }
        )


@dataclass(frozen=True, eq=False)
class ReferenceState:
    hand_pos: np.ndarray
    hand_quat: np.ndarray
    obj_pos: np.ndarray
    obj_quat: np.ndarray

    @classmethod
    def zeros(cls):
        return cls(np.zeros(6), np.zeros(8), np.zeros(3), np.zeros(4))


@dataclass(frozen=True)
class StepReward:
    step: int
    r_chain: float
    r_obj: float
    r_penalty: float
    total: float
    n_contact: int
    terminated: bool
