import math
from dataclasses import replace

import numpy as np
import pytest

from app.errors import EmptyGroup, InvalidStride, ParseError, ValidationError
from app.geometry import Pose, RigidTransform, UnitQuaternion, compose, quat_distance
from app.trajectory.models import AugmentationRange, ReferenceTrajectory
from app.trajectory.services import (
    augment_trajectory,
    canonicalize_symmetry,
    clip_guidance_actions,
    downsample,
    load_trajectory,
    relative_hand_pose,
    sample_random_transform,
    save_trajectory,
)


def assert_same_trajectory(a, b, atol=0.0):
    assert len(a) == len(b)
    assert a.dt == pytest.approx(b.dt)
    for fa, fb in zip(a.frames, b.frames):
        assert fa.object_ids == fb.object_ids
        for (_, pa), (_, pb) in zip(fa.object_poses, fb.object_poses):
            np.testing.assert_allclose(pa.as_array(), pb.as_array(), atol=atol)
        for side in ("left", "right"):
            np.testing.assert_allclose(
                fa.hand(side).keypoints.as_array(),
                fb.hand(side).keypoints.as_array(),
                atol=atol,
            )
            np.testing.assert_allclose(
                fa.hand(side).wrist.as_array(),
                fb.hand(side).wrist.as_array(),
                atol=atol,
            )
            np.testing.assert_allclose(fa.action(side), fb.action(side), atol=atol)


def test_save_load_round_trip(tmp_path, make_trajectory):
    traj = make_trajectory(n_frames=50, object_ids=("cup", "lid"))
    path = tmp_path / "traj.txt"
    save_trajectory(traj, path)
    assert_same_trajectory(load_trajectory(path), traj)


def test_load_two_frames(tmp_path, make_trajectory):
    path = tmp_path / "traj.txt"
    save_trajectory(make_trajectory(n_frames=2), path)
    assert len(load_trajectory(path)) == 2


def test_load_rejects_changed_object_set(tmp_path, make_trajectory):
    path = tmp_path / "traj.txt"
    save_trajectory(make_trajectory(n_frames=3), path)
    lines = path.read_text().splitlines()
    lines[2] = lines[2].replace(" box ", " bowl ", 1)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValidationError) as exc:
        load_trajectory(path)
    assert exc.value.frame == 1


def test_load_reports_malformed_line(tmp_path, make_trajectory):
    path = tmp_path / "traj.txt"
    save_trajectory(make_trajectory(n_frames=3), path)
    lines = path.read_text().splitlines()
    lines[3] = lines[3].rsplit(" ", 1)[0]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ParseError) as exc:
        load_trajectory(path)
    assert exc.value.line == 4


def test_load_requires_header(tmp_path):
    path = tmp_path / "traj.txt"
    path.write_text("0 0.05 box\n")
    with pytest.raises(ParseError):
        load_trajectory(path)


def test_trajectory_invariants(make_trajectory):
    traj = make_trajectory(n_frames=2)
    with pytest.raises(ValidationError):
        ReferenceTrajectory(frames=(), dt=0.1)
    with pytest.raises(ValidationError):
        ReferenceTrajectory(frames=traj.frames, dt=0.0)


def test_augment_identity_is_noop(make_trajectory):
    traj = make_trajectory()
    assert_same_trajectory(augment_trajectory(traj, RigidTransform.identity()), traj)


def test_augment_preserves_hand_object_relative_pose(make_trajectory):
    traj = make_trajectory(n_frames=8)
    t = RigidTransform(UnitQuaternion.from_yaw(0.7), [0.3, -0.1, 0.05])
    moved = augment_trajectory(traj, t)
    for before, after in zip(traj.frames, moved.frames):
        for side in ("left", "right"):
            np.testing.assert_allclose(
                relative_hand_pose(before, "box", side).as_matrix(),
                relative_hand_pose(after, "box", side).as_matrix(),
                atol=1e-10,
            )


def test_augment_matches_rotation_matrix(make_trajectory):
    traj = make_trajectory(n_frames=5)
    yaw = math.pi / 4
    moved = augment_trajectory(traj, RigidTransform(UnitQuaternion.from_yaw(yaw)))
    rz = np.array(
        [
            [math.cos(yaw), -math.sin(yaw), 0.0],
            [math.sin(yaw), math.cos(yaw), 0.0],
            [0.0, 0.0, 1.0],
        ]
    )
    for before, after in zip(traj.frames, moved.frames):
        np.testing.assert_allclose(
            after.object_pose("box").position,
            rz @ before.object_pose("box").position,
            atol=1e-10,
        )
        np.testing.assert_allclose(
            after.left_action[:3], rz @ before.left_action[:3], atol=1e-12
        )
        np.testing.assert_allclose(after.left_action[3:], before.left_action[3:])


def test_augment_then_inverse_recovers_original(make_trajectory):
    traj = make_trajectory()
    t = sample_random_transform(AugmentationRange(), seed=11)
    restored = augment_trajectory(augment_trajectory(traj, t), t.inverse())
    assert_same_trajectory(restored, traj, atol=1e-10)


def test_augment_twice_matches_augment_by_composition(make_trajectory):
    traj = make_trajectory(n_frames=4)
    for pair in range(100):
        t1 = sample_random_transform(AugmentationRange(), seed=2 * pair)
        t2 = sample_random_transform(AugmentationRange(), seed=2 * pair + 1)
        stepwise = augment_trajectory(augment_trajectory(traj, t1), t2)
        direct = augment_trajectory(traj, compose(t2, t1))
        assert_same_trajectory(stepwise, direct, atol=1e-10)


def test_sample_random_transform():
    zero = AugmentationRange(x=(0, 0), y=(0, 0), z=(0, 0), yaw=(0, 0))
    t = sample_random_transform(zero, seed=3)
    np.testing.assert_allclose(t.as_matrix(), np.eye(4), atol=1e-12)

    rng_range = AugmentationRange()
    a = sample_random_transform(rng_range, seed=5)
    b = sample_random_transform(rng_range, seed=5)
    np.testing.assert_array_equal(a.as_array(), b.as_array())

    with pytest.raises(ValidationError):
        AugmentationRange(x=(0.1, -0.1))


def test_sample_random_transform_is_uniform():
    rng_range = AugmentationRange(x=(-0.1, 0.3), y=(0.0, 0.2), z=(-0.05, 0.05))
    samples = np.array(
        [sample_random_transform(rng_range, seed).translation for seed in range(10000)]
    )
    for axis, (low, high) in enumerate((rng_range.x, rng_range.y, rng_range.z)):
        standard_error = (high - low) / math.sqrt(12) / math.sqrt(len(samples))
        assert abs(samples[:, axis].mean() - (low + high) / 2) < 4 * standard_error


def test_downsample(make_trajectory):
    traj = make_trajectory(n_frames=10)
    assert_same_trajectory(downsample(traj, 1), traj)

    thinned = downsample(traj, 3)
    assert [traj.frames.index(f) for f in thinned.frames] == [0, 3, 6, 9]
    assert thinned.dt == pytest.approx(traj.dt * 3)

    with pytest.raises(InvalidStride):
        downsample(traj, 0)


def test_downsample_keeps_final_frame(make_trajectory):
    traj = make_trajectory(n_frames=300, dt=1 / 75)
    thinned = downsample(traj, 5)
    assert len(thinned) == 61
    assert thinned.frames[-1] is traj.frames[-1]
    assert 1 / thinned.dt == pytest.approx(15.0)


def _with_orientations(traj, orientations):
    frames = [
        replace(
            frame,
            object_poses=(("box", Pose(frame.object_pose("box").position, q)),),
        )
        for frame, q in zip(traj.frames, orientations)
    ]
    return ReferenceTrajectory(frames=frames, dt=traj.dt)


def test_canonicalize_removes_symmetry_flip(make_trajectory):
    flip = UnitQuaternion.from_axis_angle([0, 0, 1], math.pi)
    group = [UnitQuaternion.identity(), flip]
    raw = [UnitQuaternion.from_yaw(0.05 * i) for i in range(12)]
    raw = [q * flip if i >= 6 else q for i, q in enumerate(raw)]
    traj = _with_orientations(make_trajectory(n_frames=12), raw)

    canonical = canonicalize_symmetry(traj, "box", group)
    steps = [
        quat_distance(
            a.object_pose("box").orientation, b.object_pose("box").orientation
        )
        for a, b in zip(canonical.frames, canonical.frames[1:])
    ]
    assert max(steps) < math.pi / 2
    for before, after in zip(traj.frames, canonical.frames):
        np.testing.assert_array_equal(
            before.object_pose("box").position, after.object_pose("box").position
        )

    again = canonicalize_symmetry(canonical, "box", group)
    assert_same_trajectory(again, canonical)


def test_canonicalize_identity_group_is_noop(make_trajectory):
    traj = make_trajectory()
    same = canonicalize_symmetry(traj, "box", [UnitQuaternion.identity()])
    assert_same_trajectory(same, traj)
    with pytest.raises(EmptyGroup):
        canonicalize_symmetry(traj, "box", [])


def test_clip_guidance_actions(make_trajectory):
    traj = make_trajectory()
    clipped = clip_guidance_actions(traj, "teleop")
    for frame in clipped.frames:
        assert np.all(np.abs(frame.left_action[:3]) <= 0.2)
        assert np.all(np.abs(frame.right_action[3:]) <= 0.4)
    with pytest.raises(ValidationError):
        clip_guidance_actions(traj, "telepathy")
