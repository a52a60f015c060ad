"""Token-wise attention purification: smooth, normalize, subtract noise prior.

All operations are pure functions on 2D float arrays and return float64
outputs regardless of input dtype.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class SmoothingConfig:
    """Truncated Gaussian kernel parameters, in patch units.

    The kernel is cut at radius ceil(3*sigma) and renormalized to sum 1,
    which loses under 0.3% of mass before renormalization.
    """

    sigma: float = 3.0
    radius: int = field(init=False)

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValidationError(f"sigma must be > 0, got {self.sigma}")
        object.__setattr__(self, "radius", math.ceil(3.0 * self.sigma))

    def kernel1d(self) -> np.ndarray:
        offsets = np.arange(-self.radius, self.radius + 1, dtype=np.float64)
        weights = np.exp(-0.5 * (offsets / self.sigma) ** 2)
        return weights / weights.sum()


def _as_map(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"attention map must be 2D, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValidationError("attention map contains NaN or Inf")
    return arr


def gaussian_smooth(values, cfg: SmoothingConfig) -> np.ndarray:
    """Separable truncated-Gaussian convolution with reflect (mirror) padding.

    Reflect padding preserves constant maps and avoids dimming attention at
    image borders, where targets can legitimately sit.
    """
    arr = _as_map(values)
    kernel = cfg.kernel1d()
    r = cfg.radius
    # rows, then columns; np.convolve flips the kernel but it is symmetric
    padded = np.pad(arr, ((0, 0), (r, r)), mode="reflect")
    arr = np.apply_along_axis(lambda row: np.convolve(row, kernel, mode="valid"), 1, padded)
    padded = np.pad(arr, ((r, r), (0, 0)), mode="reflect")
    return np.apply_along_axis(lambda col: np.convolve(col, kernel, mode="valid"), 0, padded)


def minmax_normalize(values) -> np.ndarray:
    """Affine rescale to [0, 1]; a constant map rescales to all zeros.

    Constant attention carries no localization signal, so the degenerate
    case collapses to zero and downstream extraction yields no boxes.
    """
    arr = _as_map(values)
    low = arr.min()
    high = arr.max()
    if high == low:
        return np.zeros_like(arr)
    return (arr - low) / (high - low)


def noise_prior(noise_maps, cfg: SmoothingConfig) -> np.ndarray | None:
    """Mean of normalized smoothed noise planes; None stands in for all-zeros.

    Returns None only when the list is empty so callers can cheaply skip the
    subtraction; otherwise all maps must share one shape.
    """
    if not noise_maps:
        return None
    shapes = {np.asarray(m).shape for m in noise_maps}
    if len(shapes) != 1:
        raise ValidationError(f"noise maps disagree on shape: {sorted(shapes)}")
    total = np.zeros(shapes.pop(), dtype=np.float64)
    for m in noise_maps:
        total += minmax_normalize(gaussian_smooth(m, cfg))
    return total / len(noise_maps)


def purify(key_map, prior, cfg: SmoothingConfig) -> np.ndarray:
    """Normalized smoothed key map minus the noise prior (range [-1, 1]).

    Negative values are retained; downstream binarization re-normalizes, so
    clamping here would change thresholding semantics.
    """
    cleaned = minmax_normalize(gaussian_smooth(key_map, cfg))
    if prior is None:
        return cleaned
    prior = np.asarray(prior, dtype=np.float64)
    if prior.shape != cleaned.shape:
        raise ValidationError(
            f"prior shape {prior.shape} does not match map shape {cleaned.shape}"
        )
    return cleaned - prior


def aggregate_overlay(maps) -> np.ndarray:
    """Element-wise max of per-map normalized values, for visualization only."""
    maps = list(maps)
    if not maps:
        raise ValidationError("aggregate_overlay needs at least one map")
    out = minmax_normalize(maps[0])
    for m in maps[1:]:
        norm = minmax_normalize(m)
        if norm.shape != out.shape:
            raise ValidationError("overlay maps disagree on shape")
        out = np.maximum(out, norm)
    return out
