import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from app.errors import (
    DegenerateGeometry,
    PointBehindCamera,
    TooFewCorrespondences,
    ValidationError,
)
from app.geometry import RigidTransform, UnitQuaternion, compose, quat_distance
from app.geometry.services import project_points
from app.pnp_servo.controller import extract_pose_errors
from app.pnp_servo.models import (
    CorrespondenceSet,
    PnPEstimate,
    ServoConfig,
    default_extrinsic,
)
from app.pnp_servo.services import (
    refine_pnp,
    reprojection_error,
    required_iterations,
    residuals_and_jacobian,
    solve_pnp_ransac,
)


def estimate_of(transform, n):
    return PnPEstimate.from_transform(transform, np.ones(n, dtype=bool))


def assert_pose_close(estimate, truth, position_tol, angle_tol):
    assert np.linalg.norm(estimate.translation - truth.translation) < position_tol
    assert quat_distance(estimate.rotation, truth.rotation) < angle_tol


def test_reprojection_error_is_zero_at_the_generating_pose(intrinsics, make_scene):
    truth, corrs = make_scene(seed=1)
    assert reprojection_error(intrinsics, estimate_of(truth, len(corrs)), corrs) < 1e-16


def test_reprojection_error_of_lateral_offset(intrinsics):
    xs, ys = np.meshgrid(np.linspace(-0.3, 0.3, 4), np.linspace(-0.3, 0.3, 4))
    points = np.column_stack([xs.ravel(), ys.ravel(), np.ones(16)])
    corrs = CorrespondenceSet(project_points(intrinsics, points), points)

    shifted = RigidTransform(UnitQuaternion.identity(), [0.01, 0.0, 0.0])
    error = reprojection_error(intrinsics, estimate_of(shifted, 16), corrs)
    assert error == pytest.approx(9.0)


def test_reprojection_error_rejects_points_behind_camera(intrinsics, make_scene):
    _, corrs = make_scene(seed=2)
    behind = RigidTransform(UnitQuaternion.identity(), [0.0, 0.0, -10.0])
    with pytest.raises(PointBehindCamera):
        reprojection_error(intrinsics, estimate_of(behind, len(corrs)), corrs)


def test_reprojection_error_needs_correspondences(intrinsics):
    empty = CorrespondenceSet(np.zeros((0, 2)), np.zeros((0, 3)))
    with pytest.raises(ValidationError):
        reprojection_error(intrinsics, estimate_of(RigidTransform.identity(), 0), empty)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_jacobian_matches_central_differences(intrinsics, make_scene, seed):
    truth, corrs = make_scene(seed=seed, n=15)
    rng = np.random.default_rng(seed + 10)
    rotation = Rotation.from_rotvec(rng.normal(0, 0.05, size=3)).as_matrix()
    rotation = rotation @ truth.rotation.as_matrix()
    translation = truth.translation + rng.normal(0, 0.05, size=3)

    _, jacobian = residuals_and_jacobian(intrinsics, rotation, translation, corrs)

    h = 1e-6
    numeric = np.empty_like(jacobian)
    for i in range(6):
        step = np.zeros(6)
        step[i] = h
        plus = residuals_and_jacobian(
            intrinsics,
            Rotation.from_rotvec(step[:3]).as_matrix() @ rotation,
            translation + step[3:],
            corrs,
        )[0]
        minus = residuals_and_jacobian(
            intrinsics,
            Rotation.from_rotvec(-step[:3]).as_matrix() @ rotation,
            translation - step[3:],
            corrs,
        )[0]
        numeric[:, i] = (plus - minus) / (2 * h)

    np.testing.assert_allclose(jacobian, numeric, rtol=1e-5, atol=1e-5)


def test_refine_keeps_the_exact_pose(intrinsics, make_scene):
    truth, corrs = make_scene(seed=3, n=30)
    refined = refine_pnp(corrs, intrinsics, estimate_of(truth, 30), ServoConfig())
    assert_pose_close(refined, truth, 1e-10, 1e-10)
    assert refined.mean_reprojection_error < 1e-16


@pytest.mark.parametrize("seed", [4, 5, 6])
def test_refine_converges_from_perturbed_start(intrinsics, make_scene, seed):
    truth, corrs = make_scene(seed=seed, n=30)
    axis = np.random.default_rng(seed).normal(size=3)
    axis /= np.linalg.norm(axis)
    perturbed = RigidTransform(
        UnitQuaternion.from_axis_angle(axis, math.radians(5.0)) * truth.rotation,
        truth.translation + 0.05 * axis,
    )
    initial = estimate_of(perturbed, 30)
    initial_error = reprojection_error(intrinsics, initial, corrs)

    cfg = ServoConfig(refine_max_iterations=10)
    refined = refine_pnp(corrs, intrinsics, initial, cfg)

    assert refined.mean_reprojection_error <= initial_error
    assert_pose_close(refined, truth, 1e-8, 1e-8)


def test_refine_never_increases_error_with_noise(intrinsics, make_scene):
    truth, corrs = make_scene(seed=7, n=40, pixel_noise=2.0)
    initial = estimate_of(truth, 40)
    initial_error = reprojection_error(intrinsics, initial, corrs)
    refined = refine_pnp(corrs, intrinsics, initial, ServoConfig())
    assert refined.mean_reprojection_error <= initial_error


def test_refine_needs_four_inliers(intrinsics, make_scene):
    truth, corrs = make_scene(seed=8, n=10)
    mask = np.zeros(10, dtype=bool)
    mask[:3] = True
    with pytest.raises(TooFewCorrespondences):
        refine_pnp(
            corrs, intrinsics, PnPEstimate.from_transform(truth, mask), ServoConfig()
        )


def test_ransac_recovers_clean_scenes(intrinsics, make_scene):
    cfg = ServoConfig()
    for seed in range(100):
        truth, corrs = make_scene(seed=seed, n=20)
        estimate = solve_pnp_ransac(corrs, intrinsics, cfg, seed=seed)
        assert_pose_close(estimate, truth, 1e-6, 1e-8)
        assert estimate.n_inliers == 20


def test_ransac_with_outliers_and_pixel_noise_at_two_metres(intrinsics, make_scene):
    cfg = ServoConfig()
    accurate = 0
    for seed in range(100):
        truth, corrs = make_scene(
            seed=seed, n=300, pixel_noise=1.0, outlier_fraction=0.3, depth=(1.0, 3.0)
        )
        assert len(corrs) >= 200
        estimate = solve_pnp_ransac(corrs, intrinsics, cfg, seed=seed)
        inliers = ~corrs.outliers
        recall = np.count_nonzero(estimate.inlier_mask & inliers) / inliers.sum()
        position_error = np.linalg.norm(estimate.translation - truth.translation)
        angle_error = quat_distance(estimate.rotation, truth.rotation)
        if recall >= 0.95 and position_error <= 0.01:
            accurate += angle_error <= math.radians(0.5)
    assert accurate >= 95


def test_ransac_separates_gross_outliers(intrinsics, make_scene):
    cfg = ServoConfig()
    exact = 0
    for seed in range(100):
        _, corrs = make_scene(seed=seed, n=40, outlier_fraction=0.3)
        estimate = solve_pnp_ransac(corrs, intrinsics, cfg, seed=seed)
        if np.array_equal(estimate.inlier_mask, ~corrs.outliers):
            exact += 1
    assert exact >= 95


def test_ransac_with_pixel_noise(intrinsics, make_scene):
    truth, corrs = make_scene(seed=11, pixel_noise=1.0, outlier_fraction=0.1)
    estimate = solve_pnp_ransac(corrs, intrinsics, ServoConfig(), seed=1)
    assert_pose_close(estimate, truth, 0.02, math.radians(0.5))
    assert not np.any(estimate.inlier_mask & corrs.outliers)


def test_ransac_is_deterministic_per_seed(intrinsics, make_scene):
    _, corrs = make_scene(seed=12, pixel_noise=1.0, outlier_fraction=0.3)
    cfg = ServoConfig()
    first = solve_pnp_ransac(corrs, intrinsics, cfg, seed=42)
    second = solve_pnp_ransac(corrs, intrinsics, cfg, seed=42)
    np.testing.assert_array_equal(first.translation, second.translation)
    np.testing.assert_array_equal(first.inlier_mask, second.inlier_mask)
    assert first.rotation == second.rotation


def test_ransac_needs_four_correspondences(intrinsics, make_scene):
    _, corrs = make_scene(seed=13, n=3)
    with pytest.raises(TooFewCorrespondences):
        solve_pnp_ransac(corrs, intrinsics, ServoConfig(), seed=0)


def test_ransac_rejects_collinear_points(intrinsics):
    points = np.column_stack(
        [np.linspace(-1.0, 1.0, 10), np.zeros(10), np.full(10, 3.0)]
    )
    corrs = CorrespondenceSet(project_points(intrinsics, points), points)
    with pytest.raises(DegenerateGeometry):
        solve_pnp_ransac(corrs, intrinsics, ServoConfig(ransac_iterations=20), seed=0)


def test_required_iterations():
    assert required_iterations(1.0, 0.99, 1000) == 1
    assert required_iterations(0.0, 0.99, 1000) == 1000
    assert required_iterations(0.5, 0.99, 1000) == 72
    assert required_iterations(0.5, 0.99, 10) == 10


def test_pose_errors_of_identity_estimate():
    est = estimate_of(RigidTransform.identity(), 4)
    err = extract_pose_errors(est, default_extrinsic())
    assert err.as_array() == pytest.approx([0.0, 0.0, 0.0], abs=1e-12)


def test_pose_errors_with_aligned_camera():
    # Goal 0.2 m ahead: the current camera sits at -0.2 in goal coordinates
    est = estimate_of(RigidTransform(UnitQuaternion.identity(), [-0.2, 0.0, 0.0]), 4)
    err = extract_pose_errors(est, RigidTransform.identity())
    assert err.as_array() == pytest.approx([0.2, 0.0, 0.0], abs=1e-12)


def test_pose_errors_with_yawed_camera_mount():
    est = estimate_of(RigidTransform(UnitQuaternion.identity(), [-0.2, 0.0, 0.0]), 4)
    mount = RigidTransform(UnitQuaternion.from_yaw(math.pi / 2), [0.0, 0.0, 0.0])
    err = extract_pose_errors(est, mount)
    assert err.as_array() == pytest.approx([0.0, 0.2, 0.0], abs=1e-12)


def test_pose_errors_with_forward_looking_camera():
    # Optical axis is base x under the default mount
    est = estimate_of(RigidTransform(UnitQuaternion.identity(), [0.0, 0.0, -0.2]), 4)
    err = extract_pose_errors(est, default_extrinsic())
    assert err.as_array() == pytest.approx([0.2, 0.0, 0.0], abs=1e-12)


@pytest.mark.parametrize("yaw", [0.3, -1.2, 2.9])
def test_pose_errors_read_base_yaw(yaw):
    mount = default_extrinsic()
    base_error = RigidTransform(UnitQuaternion.from_yaw(yaw), [0.1, -0.05, 0.0])
    current_from_goal = compose(compose(mount.inverse(), base_error), mount)
    err = extract_pose_errors(estimate_of(current_from_goal.inverse(), 4), mount)
    assert err.e_x == pytest.approx(0.1, abs=1e-12)
    assert err.e_y == pytest.approx(-0.05, abs=1e-12)
    assert err.e_yaw == pytest.approx(yaw, abs=1e-12)
