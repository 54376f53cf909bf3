import logging
from dataclasses import replace
from pathlib import Path

import numpy as np

from app.errors import EmptyGroup, InvalidStride, ParseError, ValidationError
from app.geometry import (
    Pose,
    RigidTransform,
    UnitQuaternion,
    apply_transform,
    compose,
    quat_distance,
)
from app.trajectory.models import (
    ACTION_SOURCE_RANGES,
    SIDES,
    AugmentationRange,
    HandKeypoints,
    HandState,
    ReferenceTrajectory,
    TrajectoryFrame,
)

logger = logging.getLogger(__name__)

FORMAT_VERSION = "v1"
FIELD_LAYOUT = (
    "frame,dt,objects[id,pose7],hands[left,right][keypoints18,wrist7],"
    "guidance[left,right][6]"
)
HAND_TOKENS = 18 + 7


def _format(value):
    return repr(float(value))


def save_trajectory(traj: ReferenceTrajectory, path):
    lines = [
        f"#trajectory {FORMAT_VERSION} objects={len(traj.object_ids)} "
        f"fields={FIELD_LAYOUT}"
    ]
    for index, frame in enumerate(traj.frames):
        tokens = [str(index), _format(traj.dt)]
        for object_id, pose in frame.object_poses:
            tokens.append(object_id)
            tokens.extend(_format(v) for v in pose.as_array())
        for side in SIDES:
            hand = frame.hand(side)
            tokens.extend(_format(v) for v in hand.keypoints.as_array().ravel())
            tokens.extend(_format(v) for v in hand.wrist.as_array())
        for side in SIDES:
            tokens.extend(_format(v) for v in frame.action(side))
        lines.append(" ".join(tokens))
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_header(line, line_no):
    parts = line[1:].split()
    if len(parts) < 3 or parts[0] != "trajectory":
        raise ParseError("missing '#trajectory' header", line=line_no)
    if parts[1] != FORMAT_VERSION:
        raise ParseError(f"unsupported format version {parts[1]!r}", line=line_no)
    options = dict(part.split("=", 1) for part in parts[2:] if "=" in part)
    try:
        return int(options["objects"])
    except (KeyError, ValueError):
        raise ParseError("header does not declare an object count", line=line_no)


def _floats(tokens, line_no):
    try:
        return np.array([float(t) for t in tokens])
    except ValueError as e:
        raise ParseError(f"bad numeric value: {e}", line=line_no)


def _parse_frame(tokens, n_objects, line_no):
    expected = 2 + 8 * n_objects + 2 * HAND_TOKENS + 12
    if len(tokens) != expected:
        raise ParseError(
            f"expected {expected} fields for {n_objects} objects, got {len(tokens)}",
            line=line_no,
        )
    try:
        index = int(tokens[0])
    except ValueError:
        raise ParseError(f"bad frame index {tokens[0]!r}", line=line_no)
    dt = _floats(tokens[1:2], line_no)[0]
    cursor = 2
    objects = []
    for _ in range(n_objects):
        object_id = tokens[cursor]
        pose_values = _floats(tokens[cursor + 1 : cursor + 8], line_no)
        objects.append((object_id, pose_values))
        cursor += 8
    hands = []
    for _ in SIDES:
        values = _floats(tokens[cursor : cursor + HAND_TOKENS], line_no)
        hands.append(values)
        cursor += HAND_TOKENS
    actions = _floats(tokens[cursor : cursor + 12], line_no)
    return index, dt, objects, hands, actions


def _hand_from_values(values):
    return HandState(
        keypoints=HandKeypoints.from_array(values[:18]),
        wrist=Pose.from_array(values[18:]),
    )


def load_trajectory(path) -> ReferenceTrajectory:
    """Reads and validates a trajectory file written by save_trajectory."""
    n_objects = None
    dt = None
    frames = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if n_objects is None:
                    n_objects = _parse_header(line, line_no)
                continue
            if n_objects is None:
                raise ParseError("record before '#trajectory' header", line=line_no)

            index, frame_dt, objects, hands, actions = _parse_frame(
                line.split(), n_objects, line_no
            )
            position = len(frames)
            if index != position:
                raise ValidationError(
                    f"frame index {index} out of sequence", frame=position
                )
            if dt is None:
                dt = frame_dt
            elif frame_dt != dt:
                raise ValidationError(
                    f"dt {frame_dt} differs from {dt}", frame=position
                )
            try:
                frames.append(
                    TrajectoryFrame(
                        object_poses=[
                            (object_id, Pose.from_array(values))
                            for object_id, values in objects
                        ],
                        left_hand=_hand_from_values(hands[0]),
                        right_hand=_hand_from_values(hands[1]),
                        left_action=actions[:6],
                        right_action=actions[6:],
                    )
                )
            except ValidationError as e:
                raise ValidationError(str(e), frame=position)

    if n_objects is None:
        raise ParseError("empty trajectory file")
    traj = ReferenceTrajectory(frames=frames, dt=dt if dt is not None else 0.0)
    logger.debug(f"Loaded {len(traj)} frames from {path}")
    return traj


def _transform_hand(t: RigidTransform, hand: HandState) -> HandState:
    keypoints = t.apply_points(hand.keypoints.as_array())
    return HandState(
        keypoints=HandKeypoints(keypoints[:5], keypoints[5]),
        wrist=apply_transform(t, hand.wrist),
    )


def _rotate_action(t: RigidTransform, action):
    rotated = np.array(action, dtype=float)
    rotated[:3] = t.rotation.rotate(rotated[:3])
    return rotated


def augment_trajectory(traj: ReferenceTrajectory, t: RigidTransform):
    """Applies t to every object and hand pose of every frame.

    Guidance translations are rotated with t; their orientation offsets are
    left as recorded.
    """
    frames = [
        TrajectoryFrame(
            object_poses=[
                (object_id, apply_transform(t, pose))
                for object_id, pose in frame.object_poses
            ],
            left_hand=_transform_hand(t, frame.left_hand),
            right_hand=_transform_hand(t, frame.right_hand),
            left_action=_rotate_action(t, frame.left_action),
            right_action=_rotate_action(t, frame.right_action),
        )
        for frame in traj.frames
    ]
    return ReferenceTrajectory(frames=frames, dt=traj.dt)


def sample_random_transform(rng_range: AugmentationRange, seed) -> RigidTransform:
    rng = np.random.default_rng(seed)
    translation = [
        rng.uniform(*bounds) for bounds in (rng_range.x, rng_range.y, rng_range.z)
    ]
    yaw = rng.uniform(*rng_range.yaw)
    return RigidTransform(UnitQuaternion.from_yaw(yaw), translation)


def downsample(traj: ReferenceTrajectory, stride) -> ReferenceTrajectory:
    if not isinstance(stride, (int, np.integer)) or stride < 1:
        raise InvalidStride(f"stride must be an integer >= 1, got {stride!r}")
    last = len(traj) - 1
    indices = list(range(0, len(traj), stride))
    # The final frame always survives
    if indices[-1] != last:
        indices.append(last)
    return ReferenceTrajectory(
        frames=[traj.frames[i] for i in indices], dt=traj.dt * stride
    )


def canonicalize_symmetry(traj: ReferenceTrajectory, object_id, symmetry_group):
    """Removes orientation flips caused by object symmetry.

    Each frame after the first takes the equivalent orientation q * s closest
    to the previous canonical orientation. Ties keep the raw orientation.
    """
    group = list(symmetry_group)
    if not group:
        raise EmptyGroup("symmetry group is empty")
    identity = UnitQuaternion.identity()
    if not any(quat_distance(s, identity) < 1e-12 for s in group):
        raise ValidationError("symmetry group must contain the identity")
    if object_id not in traj.object_ids:
        raise ValidationError(f"unknown object id {object_id!r}")

    frames = [traj.frames[0]]
    previous = traj.frames[0].object_pose(object_id).orientation
    for frame in traj.frames[1:]:
        pose = frame.object_pose(object_id)
        raw_distance = quat_distance(pose.orientation, previous)
        best, best_distance = pose.orientation, raw_distance
        for s in group:
            candidate = pose.orientation * s
            distance = quat_distance(candidate, previous)
            if distance < best_distance - 1e-12:
                best, best_distance = candidate, distance
        object_poses = [
            (oid, Pose(p.position, best) if oid == object_id else p)
            for oid, p in frame.object_poses
        ]
        frames.append(replace(frame, object_poses=tuple(object_poses)))
        previous = best
    return ReferenceTrajectory(frames=frames, dt=traj.dt)


def clip_guidance_actions(traj: ReferenceTrajectory, source) -> ReferenceTrajectory:
    """Clamps guidance actions to the range of the motion source."""
    if source not in ACTION_SOURCE_RANGES:
        raise ValidationError(
            f"unknown motion source {source!r}, expected one of "
            f"{sorted(ACTION_SOURCE_RANGES)}"
        )
    translation, orientation = ACTION_SOURCE_RANGES[source]
    bounds = np.array([translation] * 3 + [orientation] * 3)
    frames = [
        replace(
            frame,
            left_action=np.clip(frame.left_action, -bounds, bounds),
            right_action=np.clip(frame.right_action, -bounds, bounds),
        )
        for frame in traj.frames
    ]
    return ReferenceTrajectory(frames=frames, dt=traj.dt)


def relative_hand_pose(frame: TrajectoryFrame, object_id, side) -> RigidTransform:
    """Wrist pose expressed in the object's frame."""
    object_pose = frame.object_pose(object_id)
    return compose(
        object_pose.as_transform().inverse(), frame.hand(side).wrist.as_transform()
    )
