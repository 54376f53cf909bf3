from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from app.errors import ValidationError

SCHEDULE_UNITS = ("step", "epoch")


@dataclass(frozen=True)
class RolloutScheduler:
    p: float = 1.0
    decay: float = 0.93

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValidationError(f"scheduler probability {self.p} outside [0, 1]")
        if not 0.0 < self.decay <= 1.0:
            raise ValidationError(f"decay factor {self.decay} outside (0, 1]")


class ReplayBuffer:
    """Aggregated (student observation, expert action) pairs, oldest evicted first."""

    def __init__(self, capacity=100_000):
        if capacity < 1:
            raise ValidationError(f"buffer capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._entries = deque(maxlen=capacity)

    def __len__(self):
        return len(self._entries)

    def append(self, observation, action):
        self._entries.append(
            (np.array(observation, dtype=float), np.array(action, dtype=float))
        )

    def extend(self, pairs):
        for observation, action in pairs:
            self.append(observation, action)

    def observations(self) -> np.ndarray:
        return np.stack([obs for obs, _ in self._entries])

    def actions(self) -> np.ndarray:
        return np.stack([action for _, action in self._entries])


class Policy(Protocol):
    def act(self, observation) -> np.ndarray: ...


class TrainablePolicy(Policy, Protocol):
    def fit(self, observations, actions) -> None: ...


class LinearPolicy:
    """Affine map from observation to action, fitted by least squares."""

    def __init__(self, obs_dim, action_dim, weights=None):
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        if weights is None:
            weights = np.zeros((obs_dim + 1, action_dim))
        self.weights = np.array(weights, dtype=float)
        if self.weights.shape != (obs_dim + 1, action_dim):
            raise ValidationError(
                f"weights must be {(obs_dim + 1, action_dim)}, got {self.weights.shape}"
            )

    def act(self, observation):
        return np.append(np.asarray(observation, dtype=float), 1.0) @ self.weights

    def fit(self, observations, actions):
        observations = np.asarray(observations, dtype=float)
        design = np.column_stack([observations, np.ones(len(observations))])
        self.weights, *_ = np.linalg.lstsq(design, actions, rcond=None)


class ProportionalExpert:
    """Scripted reaching expert for the point-mass task: a = gain (goal - pos)."""

    def __init__(self, gain=0.5, max_action=1.0):
        self.gain = gain
        self.max_action = max_action

    def act(self, observation):
        observation = np.asarray(observation, dtype=float)
        position, goal = observation[:2], observation[2:4]
        return np.clip(self.gain * (goal - position), -self.max_action, self.max_action)

    def as_linear(self) -> LinearPolicy:
        """The unclamped expert as a LinearPolicy over the task observation."""
        weights = np.zeros((5, 2))
        weights[0:2] = -self.gain * np.eye(2)
        weights[2:4] = self.gain * np.eye(2)
        return LinearPolicy(4, 2, weights)


class SaturatedReachingPolicy:
    """Joint-space reaching toward goal with per-step increments capped at max_step."""

    def __init__(self, goal, gain=1.0, max_step=0.05):
        self.goal = np.asarray(goal, dtype=float)
        self.gain = gain
        self.max_step = max_step

    def act(self, observation):
        q = np.asarray(observation, dtype=float)
        return q + np.clip(self.gain * (self.goal - q), -self.max_step, self.max_step)


@dataclass(frozen=True)
class ToyTask:
    """2-D point mass reaching a goal; observation is (position, goal)."""

    max_action: float = 1.0
    bound: float = 1.0
    dt: float = 1.0

    proprio_indices = (0, 1)
    obs_dim = 4
    action_dim = 2

    def reset(self, rng) -> np.ndarray:
        return rng.uniform(-self.bound, self.bound, size=4)

    def observe(self, state) -> np.ndarray:
        return np.array(state, dtype=float)

    def step(self, state, action):
        action = np.clip(action, -self.max_action, self.max_action)
        position = state[:2] + action * self.dt
        goal = state[2:4]
        return np.concatenate([position, goal]), -float(np.linalg.norm(goal - position))

    def probe_states(self, n, rng) -> np.ndarray:
        return np.stack([self.observe(self.reset(rng)) for _ in range(n)])


@dataclass(frozen=True)
class DaggerConfig:
    epochs: int = 50
    rollout_len: int = 30
    rollouts_per_epoch: int = 1
    p0: float = 1.0
    decay: float = 0.93
    schedule_unit: str = "step"
    buffer_capacity: int = 100_000
    proprio_noise: float = 0.01
    probe_size: int = 256

    def __post_init__(self):
        if self.epochs < 0 or self.rollout_len < 1 or self.rollouts_per_epoch < 1:
            raise ValidationError("epochs must be >= 0 and rollout sizes >= 1")
        if self.schedule_unit not in SCHEDULE_UNITS:
            raise ValidationError(
                f"schedule_unit must be one of {SCHEDULE_UNITS}, got {self.schedule_unit!r}"
            )
        if self.proprio_noise < 0 or self.probe_size < 1:
            raise ValidationError("proprio_noise must be >= 0 and probe_size >= 1")
        RolloutScheduler(self.p0, self.decay)


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    p: float
    buffer_size: int
    probe_loss: float
    rollout_return: float


@dataclass(frozen=True)
class HybridConfig:
    n_joints: int = 6
    steps: int = 30
    dt: float = 0.05
    tau_sim: float = 0.15
    tau_real: float = 0.15
    gain: float = 1.0
    max_step: float = 0.05
    goal_low: float = 1.0
    goal_high: float = 2.0
    joint_limit: float = 3.14159

    def __post_init__(self):
        if self.n_joints < 1 or self.steps < 0:
            raise ValidationError("n_joints must be >= 1 and steps >= 0")
        if min(self.dt, self.tau_sim, self.tau_real, self.max_step) <= 0:
            raise ValidationError("dt, lag constants and max_step must be positive")
        if not 0 <= self.goal_low <= self.goal_high < self.joint_limit:
            raise ValidationError("goal magnitudes must lie inside the joint limits")


@dataclass(frozen=True, eq=False)
class JointTrace:
    """Per-step joint vectors of a commanded and a reached chain."""

    commanded: np.ndarray
    reached: np.ndarray
    saturated: bool = False

    @property
    def deviation(self) -> np.ndarray:
        if len(self.reached) == 0:
            return np.zeros(0)
        return np.linalg.norm(self.commanded - self.reached, axis=1)
