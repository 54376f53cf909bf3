import logging
import math

import cv2
import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.spatial.transform import Rotation

from app.errors import (
    DegenerateGeometry,
    PointBehindCamera,
    SingularNormalEquations,
    TooFewCorrespondences,
    ValidationError,
)
from app.geometry import CameraIntrinsics, UnitQuaternion
from app.pnp_servo.models import CorrespondenceSet, PnPEstimate, ServoConfig

logger = logging.getLogger(__name__)

MINIMAL_SAMPLE = 4


def as_correspondence_set(corrs) -> CorrespondenceSet:
    if isinstance(corrs, CorrespondenceSet):
        return corrs
    return CorrespondenceSet.from_correspondences(corrs)


def _transform(rotation_matrix, translation, points):
    return points @ rotation_matrix.T + translation


def _squared_residuals(k: CameraIntrinsics, rotation_matrix, translation, corrs):
    transformed = _transform(rotation_matrix, translation, corrs.points)
    if np.any(transformed[:, 2] <= 0):
        raise PointBehindCamera("a transformed point lies at or behind the camera")
    u = k.fx * transformed[:, 0] / transformed[:, 2] + k.cx
    v = k.fy * transformed[:, 1] / transformed[:, 2] + k.cy
    return (u - corrs.pixels[:, 0]) ** 2 + (v - corrs.pixels[:, 1]) ** 2


def reprojection_error(k: CameraIntrinsics, est: PnPEstimate, corrs) -> float:
    """Mean squared pixel distance between projected points and goal pixels."""
    corrs = as_correspondence_set(corrs)
    if len(corrs) == 0:
        raise ValidationError("no correspondences to score")
    residuals = _squared_residuals(
        k, est.rotation.as_matrix(), est.translation, corrs
    )
    return float(residuals.mean())


def residuals_and_jacobian(k: CameraIntrinsics, rotation_matrix, translation, corrs):
    """Stacked pixel residuals (2n,) and their Jacobian (2n, 6).

    The pose increment is (dw, dt) applied as R <- exp(dw) R, t <- t + dt.
    """
    rotated = corrs.points @ rotation_matrix.T
    transformed = rotated + translation
    x, y, z = transformed.T
    if np.any(z <= 0):
        raise PointBehindCamera("a transformed point lies at or behind the camera")

    residuals = np.empty(2 * len(corrs))
    residuals[0::2] = k.fx * x / z + k.cx - corrs.pixels[:, 0]
    residuals[1::2] = k.fy * y / z + k.cy - corrs.pixels[:, 1]

    # d(pixel)/d(point) for each correspondence, shape (n, 2, 3)
    d_pixel = np.zeros((len(corrs), 2, 3))
    d_pixel[:, 0, 0] = k.fx / z
    d_pixel[:, 0, 2] = -k.fx * x / z**2
    d_pixel[:, 1, 1] = k.fy / z
    d_pixel[:, 1, 2] = -k.fy * y / z**2

    # d(point)/d(dw) = -[R X]x, d(point)/d(dt) = I
    skew = np.zeros((len(corrs), 3, 3))
    skew[:, 0, 1], skew[:, 0, 2] = -rotated[:, 2], rotated[:, 1]
    skew[:, 1, 0], skew[:, 1, 2] = rotated[:, 2], -rotated[:, 0]
    skew[:, 2, 0], skew[:, 2, 1] = -rotated[:, 1], rotated[:, 0]
    d_point = np.concatenate([-skew, np.broadcast_to(np.eye(3), skew.shape)], axis=2)

    jacobian = np.einsum("nij,njk->nik", d_pixel, d_point).reshape(-1, 6)
    return residuals, jacobian


def _apply_increment(rotation_matrix, translation, step):
    delta = Rotation.from_rotvec(step[:3]).as_matrix()
    return delta @ rotation_matrix, translation + step[3:]


def _solve_normal_equations(jacobian, residuals):
    hessian = jacobian.T @ jacobian
    gradient = jacobian.T @ residuals
    try:
        return -cho_solve(cho_factor(hessian), gradient)
    except LinAlgError:
        damping = 1e-6 * max(np.trace(hessian) / 6.0, 1e-12)
        logger.warning(f"Normal equations singular, retrying with damping {damping:.3g}")
    try:
        return -cho_solve(cho_factor(hessian + damping * np.eye(6)), gradient)
    except LinAlgError:
        raise SingularNormalEquations("normal equations stay singular after damping")


def _safe_error(k, rotation_matrix, translation, corrs):
    try:
        return float(_squared_residuals(k, rotation_matrix, translation, corrs).mean())
    except PointBehindCamera:
        return math.inf


def refine_pnp(corrs, k: CameraIntrinsics, initial: PnPEstimate, cfg: ServoConfig):
    """Gauss-Newton on the inliers of initial; the error never increases."""
    corrs = as_correspondence_set(corrs)
    mask = np.asarray(initial.inlier_mask, dtype=bool)
    if mask.shape != (len(corrs),):
        mask = np.ones(len(corrs), dtype=bool)
    inliers = corrs.subset(mask)
    if len(inliers) < MINIMAL_SAMPLE:
        raise TooFewCorrespondences(
            f"refinement needs {MINIMAL_SAMPLE} inliers, got {len(inliers)}"
        )

    rotation = initial.rotation.as_matrix()
    translation = np.array(initial.translation, dtype=float)
    error = _safe_error(k, rotation, translation, inliers)

    for iteration in range(cfg.refine_max_iterations):
        residuals, jacobian = residuals_and_jacobian(k, rotation, translation, inliers)
        step = _solve_normal_equations(jacobian, residuals)

        scale = 1.0
        while scale > 1e-6:
            candidate = _apply_increment(rotation, translation, scale * step)
            candidate_error = _safe_error(k, *candidate, inliers)
            if candidate_error <= error:
                break
            scale *= 0.5
        else:
            logger.debug(f"Refinement stalled after {iteration} iterations")
            break

        rotation, translation = candidate
        error = candidate_error
        if np.linalg.norm(scale * step) < cfg.tolerance:
            break

    return PnPEstimate(
        rotation=UnitQuaternion.from_matrix(rotation),
        translation=translation,
        inlier_mask=mask,
        mean_reprojection_error=error,
    )


def _is_degenerate(points, pixels):
    for coords in (points, pixels):
        singular = np.linalg.svd(coords - coords.mean(axis=0), compute_uv=False)
        if singular[1] <= 1e-9 * max(singular[0], 1e-12):
            return True
    return False


def _minimal_pose(k: CameraIntrinsics, pixels, points):
    try:
        ok, rvec, tvec = cv2.solvePnP(
            points.astype(np.float64),
            pixels.astype(np.float64),
            k.matrix,
            None,
            flags=cv2.SOLVEPNP_AP3P,
        )
    except cv2.error:
        return None
    if not ok:
        return None
    return Rotation.from_rotvec(rvec.ravel()).as_matrix(), tvec.ravel()


def _inlier_mask(k, rotation_matrix, translation, corrs, threshold_px):
    transformed = _transform(rotation_matrix, translation, corrs.points)
    in_front = transformed[:, 2] > 0
    z = np.where(in_front, transformed[:, 2], 1.0)
    u = k.fx * transformed[:, 0] / z + k.cx
    v = k.fy * transformed[:, 1] / z + k.cy
    distance = (u - corrs.pixels[:, 0]) ** 2 + (v - corrs.pixels[:, 1]) ** 2
    return in_front & (distance < threshold_px**2)


def required_iterations(inlier_ratio, confidence, cap) -> int:
    """Samples needed to draw one all-inlier minimal set with the given confidence."""
    if inlier_ratio >= 1.0:
        return 1
    p_good = inlier_ratio**MINIMAL_SAMPLE
    if p_good <= 0.0:
        return cap
    return min(cap, math.ceil(math.log(1.0 - confidence) / math.log(1.0 - p_good)))


def solve_pnp_ransac(corrs, k: CameraIntrinsics, cfg: ServoConfig, seed) -> PnPEstimate:
    corrs = as_correspondence_set(corrs)
    n = len(corrs)
    if n < MINIMAL_SAMPLE:
        raise TooFewCorrespondences(
            f"PnP needs at least {MINIMAL_SAMPLE} correspondences, got {n}"
        )

    # Sample i depends only on the seed, never on when the loop stops
    rng = np.random.default_rng(seed)
    keys = rng.random((cfg.ransac_iterations, n))
    samples = np.argpartition(keys, MINIMAL_SAMPLE - 1, axis=1)[:, :MINIMAL_SAMPLE]

    best = None
    best_count = -1
    needed = cfg.ransac_iterations
    degenerate = 0
    for index, sample in enumerate(samples):
        if index >= needed:
            break
        points, pixels = corrs.points[sample], corrs.pixels[sample]
        if _is_degenerate(points, pixels):
            degenerate += 1
            continue
        hypothesis = _minimal_pose(k, pixels, points)
        if hypothesis is None:
            continue
        mask = _inlier_mask(k, *hypothesis, corrs, cfg.inlier_threshold_px)
        count = int(mask.sum())
        if count > best_count:
            best, best_count = (hypothesis, mask), count
            needed = required_iterations(
                count / n, cfg.ransac_confidence, cfg.ransac_iterations
            )

    if degenerate:
        logger.debug(f"Skipped {degenerate} degenerate minimal samples")
    if best is None or best_count < MINIMAL_SAMPLE:
        raise DegenerateGeometry(
            f"no usable minimal sample among {min(needed, len(samples))} drawn"
        )

    (rotation, translation), mask = best
    estimate = PnPEstimate(UnitQuaternion.from_matrix(rotation), translation, mask, 0.0)
    estimate = refine_pnp(corrs, k, estimate, cfg)

    mask = _inlier_mask(
        k,
        estimate.rotation.as_matrix(),
        estimate.translation,
        corrs,
        cfg.inlier_threshold_px,
    )
    changed = not np.array_equal(mask, estimate.inlier_mask)
    if changed and mask.sum() >= MINIMAL_SAMPLE:
        rescored = PnPEstimate(estimate.rotation, estimate.translation, mask, 0.0)
        estimate = refine_pnp(corrs, k, rescored, cfg)
    return estimate
