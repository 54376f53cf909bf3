import numpy as np
import pytest

from app import create_app
from app.geometry import CameraIntrinsics, Pose, RigidTransform, UnitQuaternion
from app.geometry.services import project_points
from app.pnp_servo.models import CorrespondenceSet
from app.trajectory.models import (
    HandKeypoints,
    HandState,
    ReferenceTrajectory,
    TrajectoryFrame,
)


@pytest.fixture
def app():
    app = create_app("testing")
    yield app


@pytest.fixture
def runner(app):
    return app.test_cli_runner()


@pytest.fixture
def intrinsics():
    return CameraIntrinsics(300.0, 300.0, 160.0, 160.0)


@pytest.fixture
def make_scene(intrinsics):
    """Factory for a PnP scene with a known current-to-goal camera transform.

    Returns (transform, CorrespondenceSet). Goal-camera points sit depth metres
    ahead; outlier pixels are redrawn uniformly over the image.
    """

    def _make(seed=0, n=120, pixel_noise=0.0, outlier_fraction=0.0, depth=(2.0, 4.0)):
        rng = np.random.default_rng(seed)
        truth = RigidTransform(
            UnitQuaternion.from_rotvec(rng.uniform(-0.15, 0.15, size=3)),
            rng.uniform(-0.2, 0.2, size=3),
        )
        goal_points = np.column_stack(
            [
                rng.uniform(-1.2, 1.2, size=n),
                rng.uniform(-1.2, 1.2, size=n),
                rng.uniform(*depth, size=n),
            ]
        )
        current_points = truth.inverse().apply_points(goal_points)
        pixels = project_points(intrinsics, goal_points)
        pixels = pixels + rng.normal(0.0, pixel_noise, size=pixels.shape)
        outliers = np.zeros(n, dtype=bool)
        n_out = round(outlier_fraction * n)
        if n_out:
            chosen = rng.choice(n, size=n_out, replace=False)
            outliers[chosen] = True
            pixels[chosen] = rng.uniform(0.0, 320.0, size=(n_out, 2))
        return truth, CorrespondenceSet(pixels, current_points, outliers)

    return _make


def _hand(rng, center):
    keypoints = center + rng.uniform(-0.05, 0.05, size=(6, 3))
    orientation = UnitQuaternion.from_rotvec(rng.normal(size=3))
    wrist = Pose(center + [0.0, 0.0, 0.1], orientation)
    return HandState(HandKeypoints.from_array(keypoints), wrist)


@pytest.fixture
def make_trajectory():
    """Factory for a smooth bimanual trajectory over the given object ids."""

    def _make(n_frames=10, object_ids=("box",), dt=0.05, seed=0):
        rng = np.random.default_rng(seed)
        frames = []
        for i in range(n_frames):
            s = i / max(n_frames - 1, 1)
            poses = [
                (
                    object_id,
                    Pose(
                        [0.5 + 0.1 * s, 0.2 * j, 0.1 + 0.05 * s],
                        UnitQuaternion.from_yaw(0.3 * s + j),
                    ),
                )
                for j, object_id in enumerate(object_ids)
            ]
            frames.append(
                TrajectoryFrame(
                    object_poses=poses,
                    left_hand=_hand(rng, np.array([0.45, 0.15, 0.15])),
                    right_hand=_hand(rng, np.array([0.45, -0.15, 0.15])),
                    left_action=rng.uniform(-0.5, 0.5, size=6),
                    right_action=rng.uniform(-0.5, 0.5, size=6),
                )
            )
        return ReferenceTrajectory(frames=frames, dt=dt)

    return _make
