import logging
from typing import Callable, Protocol

import numpy as np

from app.errors import MatcherFailure
from app.geometry import (
    CameraIntrinsics,
    RigidTransform,
    compose,
    wrap_angle,
    yaw_of,
)
from app.pnp_servo.models import (
    AXES,
    DONE,
    CorrespondenceSet,
    CycleRecord,
    PidGains,
    PidState,
    PnPEstimate,
    PoseError,
    ServoConfig,
    ServoOutcome,
)
from app.pnp_servo.services import solve_pnp_ransac

logger = logging.getLogger(__name__)


class ServoWorld(Protocol):
    """What the servo loop needs from a robot: matches to the goal and a base to drive."""

    intrinsics: CameraIntrinsics

    def observe(self, goal) -> CorrespondenceSet: ...

    def command(self, velocity, dt) -> None: ...


def extract_pose_errors(est: PnPEstimate, extrinsic: RigidTransform) -> PoseError:
    """Goal base pose in the current base frame, as planar errors."""
    current_from_goal = est.transform.inverse()
    base_error = compose(compose(extrinsic, current_from_goal), extrinsic.inverse())
    return PoseError(
        e_x=float(base_error.translation[0]),
        e_y=float(base_error.translation[1]),
        e_yaw=wrap_angle(yaw_of(base_error.rotation)),
    )


def pid_step(state: PidState, error, dt, gains: PidGains):
    """One PID update. Returns the clamped command and the new controller memory."""
    previous = state.previous_error if state.initialized else error
    integral = state.integral + 0.5 * (error + previous) * dt
    integral = float(np.clip(integral, -gains.integral_clamp, gains.integral_clamp))
    derivative = (error - previous) / dt
    output = gains.kp * error + gains.ki * integral + gains.kd * derivative
    output = float(np.clip(output, -gains.output_clamp, gains.output_clamp))
    return output, PidState(integral=integral, previous_error=error, initialized=True)


def within_thresholds(err: PoseError, cfg: ServoConfig) -> bool:
    return all(abs(err.axis(axis)) <= cfg.threshold(axis) for axis in AXES)


def sequential_axis(err: PoseError, cfg: ServoConfig) -> str:
    for axis in AXES:
        if abs(err.axis(axis)) > cfg.threshold(axis):
            return axis
    return DONE


def servo_loop(
    world: ServoWorld,
    goal,
    cfg: ServoConfig,
    seed=0,
    on_cycle: Callable[[CycleRecord], None] | None = None,
) -> ServoOutcome:
    """Re-estimates the pose every control period and drives the base toward the goal.

    Returns a converged outcome, or one marked step_budget_exhausted after
    cfg.max_steps commands. Raises MatcherFailure after
    cfg.max_matcher_failures consecutive cycles short of cfg.min_matches.
    """
    rng = np.random.default_rng(seed)
    pid = {axis: PidState() for axis in AXES}
    active = None
    short_cycles = 0
    history = []
    steps = 0
    cycle = 0

    while True:
        corrs = world.observe(goal)
        if len(corrs) < cfg.min_matches:
            short_cycles += 1
            logger.warning(
                f"Cycle {cycle}: only {len(corrs)} matches "
                f"({short_cycles}/{cfg.max_matcher_failures})"
            )
            if short_cycles >= cfg.max_matcher_failures:
                raise MatcherFailure(
                    f"fewer than {cfg.min_matches} matches for {short_cycles} cycles",
                    steps=steps,
                )
        else:
            short_cycles = 0
            estimate = solve_pnp_ransac(
                corrs, world.intrinsics, cfg, int(rng.integers(2**32))
            )
            err = extract_pose_errors(estimate, cfg.extrinsic)
            axis = sequential_axis(err, cfg)

            command = np.zeros(3)
            if axis != DONE and steps < cfg.max_steps:
                if cfg.sequential:
                    if axis != active:
                        pid[axis] = PidState()
                        active = axis
                    index = AXES.index(axis)
                    command[index], pid[axis] = pid_step(
                        pid[axis], err.axis(axis), cfg.dt, cfg.gains[axis]
                    )
                else:
                    for index, name in enumerate(AXES):
                        command[index], pid[name] = pid_step(
                            pid[name], err.axis(name), cfg.dt, cfg.gains[name]
                        )

            record = CycleRecord(
                cycle=cycle,
                n_matches=len(corrs),
                n_inliers=estimate.n_inliers,
                reproj_error_px=estimate.mean_reprojection_error,
                error=err,
                active_axis=axis,
                command=tuple(float(v) for v in command),
            )
            history.append(record)
            if on_cycle is not None:
                on_cycle(record)
            logger.debug(
                f"Cycle {cycle}: axis={axis} error=({err.e_x:.4f}, {err.e_y:.4f}, "
                f"{err.e_yaw:.4f}) inliers={estimate.n_inliers}/{len(corrs)}"
            )

            if axis == DONE:
                logger.info(f"Servo converged after {steps} commands")
                return ServoOutcome(ServoOutcome.CONVERGED, steps, tuple(history))

        if steps >= cfg.max_steps:
            logger.warning(f"Servo step budget of {cfg.max_steps} exhausted")
            return ServoOutcome(ServoOutcome.BUDGET_EXHAUSTED, steps, tuple(history))

        command = history[-1].command if short_cycles == 0 else (0.0, 0.0, 0.0)
        world.command(command, cfg.dt)
        steps += 1
        cycle += 1


def open_loop_correction(world: ServoWorld, goal, cfg: ServoConfig, seed=0) -> PoseError:
    """Estimates the error once and holds one constant planar twist to cancel it."""
    corrs = world.observe(goal)
    estimate = solve_pnp_ransac(
        corrs, world.intrinsics, cfg, int(np.random.default_rng(seed).integers(2**32))
    )
    err = extract_pose_errors(estimate, cfg.extrinsic)
    duration = cfg.open_loop_duration
    twist = tuple(float(v) / duration for v in err.as_array())
    for _ in range(max(1, round(duration / cfg.dt))):
        world.command(twist, cfg.dt)
    logger.debug(f"Open-loop twist {twist} held for {duration} s")
    return err
