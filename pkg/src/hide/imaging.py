"""PNG raster IO and overlay rendering."""

from __future__ import annotations

import numpy as np
from PIL import Image

from .errors import ValidationError

OVERLAY_BLEND = 0.5  # fixed blend ratio: 0.5 image + 0.5 heat


def load_png(path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"))


def save_png(pixels: np.ndarray, path) -> None:
    pixels = np.asarray(pixels)
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ValidationError(f"expected HxWx3 raster, got {pixels.shape}")
    Image.fromarray(pixels.astype(np.uint8), mode="RGB").save(path, format="PNG")


def upsample_nearest(grid: np.ndarray, width: int, height: int) -> np.ndarray:
    """Nearest-neighbor upsample of a patch grid to pixel dimensions."""
    rows, cols = grid.shape
    row_idx = np.minimum((np.arange(height) * rows) // height, rows - 1)
    col_idx = np.minimum((np.arange(width) * cols) // width, cols - 1)
    return grid[np.ix_(row_idx, col_idx)]


def render_overlay(image: np.ndarray, heat: np.ndarray) -> np.ndarray:
    """Blend a [0,1] heat grid over the image as a red channel wash.

    The heat grid is upsampled nearest-neighbor to the image size and
    alpha-blended at the fixed OVERLAY_BLEND ratio.
    """
    image = np.asarray(image)
    height, width = image.shape[:2]
    up = upsample_nearest(np.asarray(heat, dtype=np.float64), width, height)
    heat_rgb = np.zeros_like(image, dtype=np.float64)
    heat_rgb[:, :, 0] = up * 255.0
    blended = (1.0 - OVERLAY_BLEND) * image.astype(np.float64) + OVERLAY_BLEND * heat_rgb
    return np.clip(np.rint(blended), 0, 255).astype(np.uint8)
