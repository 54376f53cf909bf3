import json
from dataclasses import dataclass

import numpy as np

from app.errors import ParseError, ToolkitError
from app.geometry import Pose
from app.rewards.models import ContactSet, JointState
from app.trajectory.models import HandKeypoints

REQUIRED_KEYS = (
    "step",
    "objects",
    "left_hand",
    "right_hand",
    "contacts",
    "joint_forces",
    "joint_velocities",
)


@dataclass(frozen=True, eq=False)
class RolloutStep:
    step: int
    objects: dict
    left_hand: HandKeypoints
    right_hand: HandKeypoints
    contacts: ContactSet
    joints: JointState


def _parse_step(record, line_no):
    if not isinstance(record, dict):
        raise ParseError("rollout record must be a JSON object", line=line_no)
    missing = [key for key in REQUIRED_KEYS if key not in record]
    if missing:
        raise ParseError(f"missing keys {missing}", line=line_no)
    try:
        return RolloutStep(
            step=int(record["step"]),
            objects={
                object_id: Pose.from_array(values)
                for object_id, values in record["objects"].items()
            },
            left_hand=HandKeypoints.from_array(record["left_hand"]["keypoints"]),
            right_hand=HandKeypoints.from_array(record["right_hand"]["keypoints"]),
            contacts=ContactSet(frozenset(tuple(pair) for pair in record["contacts"])),
            joints=JointState(record["joint_forces"], record["joint_velocities"]),
        )
    except ToolkitError as e:
        raise ParseError(str(e), line=line_no)
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise ParseError(f"malformed rollout record: {e}", line=line_no)


def load_rollout(path) -> list[RolloutStep]:
    """Reads a JSON-lines rollout log, one control step per line."""
    steps = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as e:
                raise ParseError(f"invalid JSON: {e.msg}", line=line_no)
            steps.append(_parse_step(record, line_no))
    return steps


def step_record(step, objects, left_hand, right_hand, contacts, forces, velocities):
    """JSON-ready dict of one rollout step, the inverse of the reader."""
    return {
        "step": int(step),
        "objects": {oid: pose.as_array().tolist() for oid, pose in objects.items()},
        "left_hand": {"keypoints": np.asarray(left_hand.as_array()).tolist()},
        "right_hand": {"keypoints": np.asarray(right_hand.as_array()).tolist()},
        "contacts": [list(pair) for pair in sorted(contacts.pairs)],
        "joint_forces": np.asarray(forces, dtype=float).tolist(),
        "joint_velocities": np.asarray(velocities, dtype=float).tolist(),
    }
