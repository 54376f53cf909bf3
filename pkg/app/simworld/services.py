import logging
import math

import numpy as np

from app.depth_aug.models import DepthImage
from app.errors import DegenerateField, NoVisibleLandmarks
from app.geometry import CameraIntrinsics, RigidTransform, compose, wrap_angle
from app.pnp_servo.models import CorrespondenceSet, default_extrinsic
from app.simworld.models import (
    BaseState,
    KinematicChain,
    LandmarkField,
    ScenarioConfig,
    WorldConfig,
)

logger = logging.getLogger(__name__)

FIELD_ATTEMPTS = 10


def generate_field(cfg: WorldConfig, seed=None) -> LandmarkField:
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    low = [cfg.landmark_x[0], cfg.landmark_y[0], cfg.landmark_z[0]]
    high = [cfg.landmark_x[1], cfg.landmark_y[1], cfg.landmark_z[1]]
    for attempt in range(FIELD_ATTEMPTS):
        points = rng.uniform(low, high, size=(cfg.n_landmarks, 3))
        try:
            return LandmarkField(points)
        except DegenerateField as e:
            logger.debug(f"Landmark field attempt {attempt} rejected: {e}")
    raise DegenerateField(
        f"no non-degenerate field of {cfg.n_landmarks} points after {FIELD_ATTEMPTS} draws"
    )


def camera_from_world(base: BaseState, extrinsic: RigidTransform) -> RigidTransform:
    return compose(base.as_transform(), extrinsic).inverse()


def _project(k: CameraIntrinsics, points):
    z = np.where(points[:, 2] > 0, points[:, 2], 1.0)
    return np.column_stack(
        [k.fx * points[:, 0] / z + k.cx, k.fy * points[:, 1] / z + k.cy]
    )


def _visible(points, pixels, cfg: WorldConfig):
    return (
        (points[:, 2] > cfg.near)
        & (points[:, 2] < cfg.far)
        & (pixels[:, 0] >= 0)
        & (pixels[:, 0] < cfg.width)
        & (pixels[:, 1] >= 0)
        & (pixels[:, 1] < cfg.height)
    )


def render_landmark_depth(pixels, depths, cfg: WorldConfig) -> DepthImage:
    """Z-buffer of landmarks splatted over a flat backdrop at max depth."""
    image = np.full((cfg.height, cfg.width), cfg.max_depth)
    r = cfg.splat_radius
    for (u, v), z in zip(np.rint(pixels).astype(int), depths):
        rows = slice(max(v - r, 0), min(v + r + 1, cfg.height))
        cols = slice(max(u - r, 0), min(u + r + 1, cfg.width))
        np.minimum(image[rows, cols], min(z, cfg.max_depth), out=image[rows, cols])
    return DepthImage(image, cfg.max_depth)


def observe(
    base: BaseState,
    goal: BaseState,
    field: LandmarkField,
    k: CameraIntrinsics,
    cfg: WorldConfig,
    seed,
    extrinsic: RigidTransform | None = None,
):
    """Matcher oracle: correspondences from goal pixels to current-camera points.

    Returns the CorrespondenceSet (outliers labelled) and the current depth image.
    """
    extrinsic = default_extrinsic() if extrinsic is None else extrinsic
    rng = np.random.default_rng(seed)

    current = camera_from_world(base, extrinsic).apply_points(field.points)
    goal_points = camera_from_world(goal, extrinsic).apply_points(field.points)
    current_pixels = _project(k, current)
    goal_pixels = _project(k, goal_points)
    seen_now = _visible(current, current_pixels, cfg)
    seen_both = seen_now & _visible(goal_points, goal_pixels, cfg)

    # Depth noise acts along each viewing ray
    ranges = np.linalg.norm(current, axis=1, keepdims=True)
    noisy = current + rng.normal(0.0, cfg.depth_noise_sigma, size=ranges.shape) * (
        current / ranges
    )
    depth = render_landmark_depth(
        _project(k, noisy[seen_now]), noisy[seen_now, 2], cfg
    )

    n = int(seen_both.sum())
    if n == 0:
        raise NoVisibleLandmarks("no landmark is visible from both poses")
    pixels = goal_pixels[seen_both] + rng.normal(
        0.0, cfg.pixel_noise_sigma, size=(n, 2)
    )
    outliers = np.zeros(n, dtype=bool)
    n_outliers = round(cfg.outlier_fraction * n)
    if n_outliers:
        chosen = rng.choice(n, size=n_outliers, replace=False)
        outliers[chosen] = True
        pixels[chosen] = rng.uniform(
            [0.0, 0.0], [cfg.width, cfg.height], size=(n_outliers, 2)
        )
    return CorrespondenceSet(pixels, noisy[seen_both], outliers), depth


def wheel_heading(v, previous=None):
    """Body-frame travel direction of the wheels; previous when v has no translation."""
    vx, vy = float(v[0]), float(v[1])
    if vx == 0.0 and vy == 0.0:
        return previous
    return math.atan2(vy, vx)


def steering_turn(previous, heading) -> float:
    """Angle the wheels swing through to go from previous to heading, in [0, pi]."""
    if previous is None or heading is None:
        return 0.0
    return abs(wrap_angle(heading - previous))


def step_base(state: BaseState, v, dt, cfg: WorldConfig, seed, heading=None):
    """Integrates a body-frame planar twist for dt seconds at the midpoint yaw.

    Actuation noise scales each axis by (1 + N(0, sigma^2)). heading is the
    current wheel heading; with a coupling gain, swinging the wheels to the
    commanded direction first shifts the base sideways by gain * turn.
    """
    rng = np.random.default_rng(seed)
    turn = steering_turn(heading, wheel_heading(v, heading))
    vx, vy, w = np.asarray(v, dtype=float)
    if cfg.actuation_noise_sigma > 0:
        vx, vy, w = np.array([vx, vy, w]) * (
            1.0 + rng.normal(0.0, cfg.actuation_noise_sigma, size=3)
        )

    kick_x = kick_y = 0.0
    if cfg.coupling_gain > 0 and turn > 0:
        new_heading = wheel_heading(v)
        kick = cfg.coupling_gain * turn * rng.choice([-1.0, 1.0])
        lateral_x, lateral_y = -math.sin(new_heading), math.cos(new_heading)
        c, s = math.cos(state.yaw), math.sin(state.yaw)
        kick_x = kick * (lateral_x * c - lateral_y * s)
        kick_y = kick * (lateral_x * s + lateral_y * c)

    mid_yaw = state.yaw + 0.5 * w * dt
    c, s = math.cos(mid_yaw), math.sin(mid_yaw)
    dx = (vx * c - vy * s) * dt + kick_x
    dy = (vx * s + vy * c) * dt + kick_y
    return BaseState(state.x + dx, state.y + dy, state.yaw + w * dt)


def ground_truth_error(base: BaseState, goal: BaseState):
    distance = math.hypot(base.x - goal.x, base.y - goal.y)
    return distance, abs(wrap_angle(base.yaw - goal.yaw))


def chain_step(chain: KinematicChain, target_q, dt) -> KinematicChain:
    """First-order tracking toward target_q, clamped to the joint limits."""
    target = np.asarray(target_q, dtype=float).ravel()
    alpha = np.minimum(dt / chain.tau, 1.0)
    q = np.where(alpha >= 1.0, target, chain.q + alpha * (target - chain.q))
    clamped = np.clip(q, chain.lower, chain.upper)
    saturated = bool(np.any(clamped != q))
    if saturated:
        logger.debug(f"Joint limit reached for target {target}")
    return KinematicChain(clamped, chain.tau, chain.lower, chain.upper, saturated)


def sample_start(scenario: ScenarioConfig, seed) -> tuple[BaseState, tuple]:
    """Start pose for a scenario; returns it with the (dx, dy, dyaw) offset used."""
    if scenario.start_offset is not None:
        offset = tuple(float(v) for v in scenario.start_offset)
    else:
        rng = np.random.default_rng(seed)
        offset = tuple(
            float(rng.uniform(*bounds))
            for bounds in (scenario.start_dx, scenario.start_dy, scenario.start_dyaw)
        )
    return scenario.goal_state.offset(*offset), offset
