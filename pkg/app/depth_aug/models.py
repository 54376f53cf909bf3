from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from app.errors import ValidationError

CLIP_RANGE = (0.9, 1.1)


@dataclass(frozen=True, eq=False)
class DepthImage:
    """Metric depth grid, row-major (height, width). Missing pixels are 0."""

    values: np.ndarray
    max_depth: float

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2 or 0 in values.shape:
            raise ValidationError(f"depth image must be a non-empty grid, got {values.shape}")
        if not self.max_depth > 0:
            raise ValidationError(f"max_depth must be positive, got {self.max_depth}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("depth image contains non-finite values")
        if values.min() < 0 or values.max() > self.max_depth:
            raise ValidationError(
                f"depth values outside [0, {self.max_depth}]: "
                f"[{values.min()}, {values.max()}]"
            )
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "max_depth", float(self.max_depth))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape

    def with_values(self, values, max_depth=None) -> DepthImage:
        return DepthImage(values, self.max_depth if max_depth is None else max_depth)


@dataclass(frozen=True)
class AugmentConfig:
    clip_distance: float = 1.0
    noise_sigma: float = 0.005
    blur_sigma: float = 1.0
    dropout_fraction: float = 0.005
    mixup_alpha: float = 1.0
    seed: int = 0
    clip_range: tuple[float, float] = CLIP_RANGE
    randomize_clip: bool = False
    histogram_bins: int = 50
    dataset_image: str | None = None

    def __post_init__(self):
        low, high = self.clip_range
        if not 0 < low <= high:
            raise ValidationError(f"bad clip range {self.clip_range}")
        if not low <= self.clip_distance <= high:
            raise ValidationError(
                f"clip distance {self.clip_distance} outside task range {self.clip_range}"
            )
        if self.noise_sigma < 0 or self.blur_sigma < 0:
            raise ValidationError("noise and blur sigma must be >= 0")
        if not 0.0 <= self.dropout_fraction <= 1.0:
            raise ValidationError("dropout_fraction must be in [0, 1]")
        if not 0.0 <= self.mixup_alpha <= 1.0:
            raise ValidationError("mixup_alpha must be in [0, 1]")
        if self.histogram_bins < 1:
            raise ValidationError("histogram_bins must be >= 1")


@dataclass(frozen=True, eq=False)
class Histogram:
    centers: np.ndarray
    proportions: np.ndarray

    def __len__(self):
        return len(self.proportions)
