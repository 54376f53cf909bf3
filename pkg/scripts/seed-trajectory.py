import json
import math
from pathlib import Path

import numpy as np

from app.geometry import Pose, UnitQuaternion
from app.rewards.models import ContactSet
from app.rewards.rollouts import step_record
from app.trajectory.models import (
    HandKeypoints,
    HandState,
    ReferenceTrajectory,
    TrajectoryFrame,
)
from app.trajectory.services import save_trajectory

# Fingertips then palm, relative to the grasp point, for the left hand
GRASP_OFFSETS = np.array(
    [
        [0.00, 0.06, 0.03],
        [0.03, 0.07, 0.00],
        [0.01, 0.07, 0.00],
        [-0.01, 0.07, 0.00],
        [-0.03, 0.06, 0.00],
        [0.00, 0.10, 0.00],
    ]
)


def _hand(center, mirror):
    offsets = GRASP_OFFSETS * [1.0, -1.0 if mirror else 1.0, 1.0]
    keypoints = HandKeypoints.from_array(center + offsets)
    wrist = Pose(center + offsets[5] * 1.5, UnitQuaternion.identity())
    return HandState(keypoints, wrist)


def lift_trajectory(n_frames=40, dt=0.05, height=0.15):
    """Both hands lifting and turning a box along a smooth ramp."""
    frames = []
    for i in range(n_frames):
        s = 0.5 - 0.5 * math.cos(math.pi * i / (n_frames - 1))
        center = np.array([0.5, 0.0, 0.05 + height * s])
        box = Pose(center, UnitQuaternion.from_yaw(0.4 * s))
        frames.append(
            TrajectoryFrame(
                object_poses=[("box", box)],
                left_hand=_hand(center + [0.0, 0.08, 0.0], mirror=False),
                right_hand=_hand(center - [0.0, 0.08, 0.0], mirror=True),
            )
        )
    return ReferenceTrajectory(frames=frames, dt=dt)


def seed_trajectory(app, drift=0.004, seed=None):
    """Writes a reference lift and a rollout log that slowly drifts off it."""
    with app.app_context():
        out = Path(app.config["OUTPUT_DIR"]) / "rewards"
        out.mkdir(parents=True, exist_ok=True)
        seed = app.config["DEFAULT_SEED"] if seed is None else seed
        rng = np.random.default_rng(seed)

        traj = lift_trajectory()
        save_trajectory(traj, out / "lift.traj")

        grasp = ContactSet(
            frozenset(
                (f"{side}_{finger}", "box")
                for side in ("left", "right")
                for finger in ("thumb", "index", "middle")
            )
        )
        with open(out / "lift_rollout.jsonl", "w") as f:
            offset = np.zeros(3)
            for step, frame in enumerate(traj.frames):
                offset = offset + rng.normal(0.0, drift, size=3)
                pose = frame.object_pose("box")
                moved = Pose(pose.position + offset, pose.orientation)
                record = step_record(
                    step,
                    {"box": moved},
                    frame.left_hand.keypoints,
                    frame.right_hand.keypoints,
                    grasp,
                    rng.normal(0.0, 2.0, size=12),
                    rng.normal(0.0, 0.5, size=12),
                )
                f.write(json.dumps(record) + "\n")

        print(f"Wrote {len(traj)}-frame reference and rollout to {out}")
        print(
            f"Try: flask reward-eval {out / 'lift.traj'} {out / 'lift_rollout.jsonl'}"
        )


if __name__ == "__main__":
    from app import create_app

    app = create_app("default")
    seed_trajectory(app)
