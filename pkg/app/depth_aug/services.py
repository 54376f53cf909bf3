import logging
import math

import numpy as np
from scipy import ndimage

from app.depth_aug.models import AugmentConfig, DepthImage, Histogram
from app.errors import DimensionMismatch, ValidationError, ZeroDepth

logger = logging.getLogger(__name__)


def clip_depth(img: DepthImage, d) -> DepthImage:
    if not d > 0:
        raise ValidationError(f"clip distance must be positive, got {d}")
    return DepthImage(np.minimum(img.values, d), d)


def fill_missing(img: DepthImage) -> DepthImage:
    return img.with_values(np.where(img.values == 0, img.max_depth, img.values))


def add_gaussian_noise(img: DepthImage, sigma, seed) -> DepthImage:
    if sigma < 0:
        raise ValidationError(f"noise sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return img
    rng = np.random.default_rng(seed)
    noisy = img.values + rng.normal(0.0, sigma, size=img.shape)
    return img.with_values(np.clip(noisy, 0.0, img.max_depth))


def gaussian_kernel(sigma) -> np.ndarray:
    radius = math.ceil(3 * sigma)
    x = np.arange(-radius, radius + 1, dtype=float)
    kernel = np.exp(-0.5 * (x / sigma) ** 2)
    return kernel / kernel.sum()


def gaussian_blur(img: DepthImage, sigma) -> DepthImage:
    """Separable Gaussian blur, kernel radius ceil(3 sigma), edges clamped."""
    if sigma < 0:
        raise ValidationError(f"blur sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return img
    kernel = gaussian_kernel(sigma)
    blurred = ndimage.correlate1d(img.values, kernel, axis=0, mode="nearest")
    blurred = ndimage.correlate1d(blurred, kernel, axis=1, mode="nearest")
    return img.with_values(np.clip(blurred, 0.0, img.max_depth))


def dropout_to_max(img: DepthImage, fraction, seed) -> DepthImage:
    if not 0.0 <= fraction <= 1.0:
        raise ValidationError(f"dropout fraction must be in [0, 1], got {fraction}")
    count = round(fraction * img.values.size)
    if count == 0:
        return img
    rng = np.random.default_rng(seed)
    chosen = rng.choice(img.values.size, size=count, replace=False)
    values = img.values.copy().ravel()
    values[chosen] = img.max_depth
    return img.with_values(values.reshape(img.shape))


def mixup(sim: DepthImage, dataset: DepthImage, alpha) -> DepthImage:
    if sim.shape != dataset.shape:
        raise DimensionMismatch(
            f"sim image {sim.shape} and dataset image {dataset.shape} differ",
            field="shape",
        )
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError(f"mixup alpha must be in [0, 1], got {alpha}")
    blended = alpha * sim.values + (1.0 - alpha) * dataset.values
    return DepthImage(blended, max(sim.max_depth, dataset.max_depth))


def to_disparity(img: DepthImage) -> DepthImage:
    """Per-pixel reciprocal. max_depth becomes 1 / smallest depth."""
    if np.any(img.values == 0):
        raise ZeroDepth("depth image has zero pixels; fill and clip it first")
    disparity = 1.0 / img.values
    return DepthImage(disparity, float(disparity.max()))


def sim_pipeline(img: DepthImage, cfg: AugmentConfig, dataset=None) -> DepthImage:
    """Clip, blur, noise, dropout, then mixup with dataset when one is given.

    With cfg.randomize_clip the clip distance is drawn from cfg.clip_range under
    cfg.seed instead of fixed at cfg.clip_distance. The dataset frame goes through
    real_pipeline at the same distance before blending.
    """
    noise_seed, dropout_seed, clip_seed = np.random.SeedSequence(cfg.seed).spawn(3)
    d = cfg.clip_distance
    if cfg.randomize_clip:
        d = sample_clip_distance(*cfg.clip_range, seed=clip_seed)
        logger.debug(f"Sampled clip distance {d:.4f} m")
    out = clip_depth(img, d)
    out = gaussian_blur(out, cfg.blur_sigma)
    out = add_gaussian_noise(out, cfg.noise_sigma, noise_seed)
    out = dropout_to_max(out, cfg.dropout_fraction, dropout_seed)
    if dataset is not None:
        out = mixup(out, real_pipeline(dataset, d), cfg.mixup_alpha)
    return out


def real_pipeline(img: DepthImage, d) -> DepthImage:
    return clip_depth(fill_missing(img), d)


def histogram(img: DepthImage, bins) -> Histogram:
    if bins < 1:
        raise ValidationError(f"bins must be >= 1, got {bins}")
    counts, edges = np.histogram(img.values, bins=bins, range=(0.0, img.max_depth))
    return Histogram(
        centers=(edges[:-1] + edges[1:]) / 2, proportions=counts / counts.sum()
    )


def sample_clip_distance(low=0.9, high=1.1, seed=None) -> float:
    return float(np.random.default_rng(seed).uniform(low, high))


def disparity_mixup(sim: DepthImage, dataset: DepthImage, alpha, d) -> DepthImage:
    """Blends two depth frames in disparity space after fill and clip at d."""
    return mixup(
        to_disparity(real_pipeline(sim, d)),
        to_disparity(real_pipeline(dataset, d)),
        alpha,
    )


def kl_divergence(p, q, eps=1e-8) -> float:
    p = np.asarray(getattr(p, "proportions", p), dtype=float) + eps
    q = np.asarray(getattr(q, "proportions", q), dtype=float) + eps
    if p.shape != q.shape:
        raise DimensionMismatch(f"histograms have {p.size} and {q.size} bins")
    p, q = p / p.sum(), q / q.sum()
    return float(np.sum(p * np.log(p / q)))
