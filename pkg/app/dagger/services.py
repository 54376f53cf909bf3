import logging
from dataclasses import replace
from typing import Callable

import numpy as np

from app.dagger.models import (
    DaggerConfig,
    EpochMetrics,
    Policy,
    ReplayBuffer,
    RolloutScheduler,
    ToyTask,
    TrainablePolicy,
)
from app.errors import DimensionMismatch, ValidationError

logger = logging.getLogger(__name__)

TRAINING_MODES = ("dagger", "behavior_cloning", "student_only")


def scheduler_step(s: RolloutScheduler) -> RolloutScheduler:
    return RolloutScheduler(p=s.p * s.decay, decay=s.decay)


def choose_action(a_student, a_expert, p, seed):
    """Expert action with probability p. Returns (action, from_expert)."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"probability {p} outside [0, 1]")
    rng = np.random.default_rng(seed)
    from_expert = bool(rng.random() < p)
    return (a_expert if from_expert else a_student), from_expert


def action_loss(a, a_star) -> float:
    a = np.asarray(a, dtype=float)
    a_star = np.asarray(a_star, dtype=float)
    if a.shape != a_star.shape:
        raise DimensionMismatch(f"action shapes {a.shape} and {a_star.shape} differ")
    diff = a - a_star
    return float(np.sum(diff**2) + np.sum(np.abs(diff)))


def inject_proprio_noise(obs, proprio_indices, noise_range, seed) -> np.ndarray:
    noisy = np.array(obs, dtype=float)
    indices = np.asarray(proprio_indices, dtype=int)
    if noise_range == 0 or indices.size == 0:
        return noisy
    if indices.min() < 0 or indices.max() >= noisy.size:
        raise ValidationError(f"proprio indices {list(indices)} out of range")
    rng = np.random.default_rng(seed)
    noisy[indices] += rng.uniform(-noise_range, noise_range, size=indices.size)
    return noisy


def probe_loss(student: Policy, expert: Policy, probe_states) -> float:
    return float(
        np.mean([action_loss(student.act(o), expert.act(o)) for o in probe_states])
    )


def dagger_train(
    env: ToyTask,
    expert: Policy,
    student: TrainablePolicy,
    cfg: DaggerConfig,
    seed,
    buffer: ReplayBuffer | None = None,
):
    """Runs the DAgger loop and returns (student, per-epoch metrics, final scheduler).

    probe_loss in each epoch's metrics scores the student fitted at the end of
    that epoch, so the last entry is the returned student's loss.
    """
    rng = np.random.default_rng(seed)
    probe = env.probe_states(cfg.probe_size, rng)
    buffer = ReplayBuffer(cfg.buffer_capacity) if buffer is None else buffer
    scheduler = RolloutScheduler(cfg.p0, cfg.decay)
    metrics = []
    logger.info(f"Initial probe_loss={probe_loss(student, expert, probe):.6g}")

    for epoch in range(cfg.epochs):
        returns = []
        for _ in range(cfg.rollouts_per_epoch):
            state = env.reset(rng)
            total = 0.0
            for _ in range(cfg.rollout_len):
                obs = env.observe(state)
                noisy = inject_proprio_noise(
                    obs, env.proprio_indices, cfg.proprio_noise, rng
                )
                a_expert = expert.act(obs)
                action, _ = choose_action(student.act(noisy), a_expert, scheduler.p, rng)
                buffer.append(noisy, a_expert)
                state, reward = env.step(state, action)
                total += reward
                if cfg.schedule_unit == "step":
                    scheduler = scheduler_step(scheduler)
            returns.append(total)
        if cfg.schedule_unit == "epoch":
            scheduler = scheduler_step(scheduler)

        student.fit(buffer.observations(), buffer.actions())
        loss = probe_loss(student, expert, probe)
        metrics.append(
            EpochMetrics(
                epoch=epoch,
                p=scheduler.p,
                buffer_size=len(buffer),
                probe_loss=loss,
                rollout_return=float(np.mean(returns)),
            )
        )
        logger.info(
            f"Epoch {epoch}: p={scheduler.p:.4f} buffer={len(buffer)} probe_loss={loss:.6g}"
        )
    return student, metrics, scheduler


def mode_config(cfg: DaggerConfig, mode) -> DaggerConfig:
    """DAgger as configured, or the expert-only and student-only rollout baselines."""
    if mode not in TRAINING_MODES:
        raise ValidationError(
            f"training mode must be one of {TRAINING_MODES}, got {mode!r}"
        )
    if mode == "behavior_cloning":
        return replace(cfg, p0=1.0, decay=1.0)
    if mode == "student_only":
        return replace(cfg, p0=0.0)
    return cfg


def compare_training_modes(
    env: ToyTask,
    expert: Policy,
    make_student: Callable[[], TrainablePolicy],
    cfg: DaggerConfig,
    seed,
) -> dict:
    """Trains a fresh student per mode on the same seed; returns {mode: metrics}."""
    results = {}
    for mode in TRAINING_MODES:
        _, metrics, _ = dagger_train(
            env, expert, make_student(), mode_config(cfg, mode), seed
        )
        results[mode] = metrics
        final = metrics[-1].probe_loss if metrics else float("nan")
        logger.info(f"Mode {mode}: final probe_loss={final:.6g}")
    return results
