"""Layout-preserving compaction: canonical grid, coordinate remap, re-stitch.

The box edges plus the image boundary induce a canonical grid. Columns and
rows of that grid that intersect no box are dropped; surviving cells are
pasted at cumulatively shifted offsets, preserving the relative order of
everything that is kept. All intervals are half-open, which makes the
intersection tests unambiguous and lets the grid partition the image
exactly.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

import numpy as np

from .boxes import BoundingBox, BoxSet
from .errors import ValidationError

DEFAULT_FILL = (128, 128, 128)

RECOMPOSE_MODES = (
    "sequence_tiling",
    "random_tiling",
    "masking",
    "layout_no_compaction",
    "layout_compact",
)


@dataclass(frozen=True)
class GridDecomposition:
    """Canonical grid lines with content flags and destination offsets.

    ``x_offsets[i]`` is the destination x of grid line ``x_lines[i]``:
    the summed widths of content columns left of it. ``compact_width``
    equals ``x_offsets[-1]``. Same along y.
    """

    x_lines: tuple[int, ...]
    y_lines: tuple[int, ...]
    col_has_content: tuple[bool, ...]
    row_has_content: tuple[bool, ...]
    x_offsets: tuple[int, ...]
    y_offsets: tuple[int, ...]
    compact_width: int
    compact_height: int

    def column_of(self, x: int) -> int:
        i = int(np.searchsorted(self.x_lines, x, side="right")) - 1
        if i < 0 or i >= len(self.x_lines) - 1:
            raise ValidationError(f"x={x} outside grid [0, {self.x_lines[-1]})")
        return i

    def row_of(self, y: int) -> int:
        j = int(np.searchsorted(self.y_lines, y, side="right")) - 1
        if j < 0 or j >= len(self.y_lines) - 1:
            raise ValidationError(f"y={y} outside grid [0, {self.y_lines[-1]})")
        return j


def build_grid(boxes: BoxSet, width: int, height: int) -> GridDecomposition:
    """Grid lines from image boundaries plus all box edges, with mappings."""
    for b in boxes:
        if b.x2 > width or b.y2 > height:
            raise ValidationError(f"box {b.rect} outside {width}x{height}")

    x_lines = sorted({0, width} | {v for b in boxes for v in (b.x1, b.x2)})
    y_lines = sorted({0, height} | {v for b in boxes for v in (b.y1, b.y2)})

    col_has_content = tuple(
        any(b.x1 < x_lines[i + 1] and b.x2 > x_lines[i] for b in boxes)
        for i in range(len(x_lines) - 1)
    )
    row_has_content = tuple(
        any(b.y1 < y_lines[j + 1] and b.y2 > y_lines[j] for b in boxes)
        for j in range(len(y_lines) - 1)
    )

    x_offsets = [0]
    for i in range(len(x_lines) - 1):
        width_i = x_lines[i + 1] - x_lines[i] if col_has_content[i] else 0
        x_offsets.append(x_offsets[-1] + width_i)
    y_offsets = [0]
    for j in range(len(y_lines) - 1):
        height_j = y_lines[j + 1] - y_lines[j] if row_has_content[j] else 0
        y_offsets.append(y_offsets[-1] + height_j)

    return GridDecomposition(
        x_lines=tuple(x_lines),
        y_lines=tuple(y_lines),
        col_has_content=col_has_content,
        row_has_content=row_has_content,
        x_offsets=tuple(x_offsets),
        y_offsets=tuple(y_offsets),
        compact_width=x_offsets[-1],
        compact_height=y_offsets[-1],
    )


def is_content_cell(i: int, j: int, boxes: BoxSet, grid: GridDecomposition) -> bool:
    """True iff cell (column i, row j) has interior overlap with some box."""
    if not (0 <= i < len(grid.x_lines) - 1 and 0 <= j < len(grid.y_lines) - 1):
        raise ValidationError(f"cell index ({i}, {j}) out of range")
    cx1, cx2 = grid.x_lines[i], grid.x_lines[i + 1]
    cy1, cy2 = grid.y_lines[j], grid.y_lines[j + 1]
    return any(b.x1 < cx2 and b.x2 > cx1 and b.y1 < cy2 and b.y2 > cy1 for b in boxes)


def transform_point(x: int, y: int, grid: GridDecomposition) -> tuple[int, int]:
    """Map an original pixel coordinate into the compact image.

    Defined only for points in a content column and content row; points in
    dropped strips have no destination.
    """
    i = grid.column_of(x)
    j = grid.row_of(y)
    if not grid.col_has_content[i]:
        raise ValidationError(f"x={x} lies in dropped column strip {i}")
    if not grid.row_has_content[j]:
        raise ValidationError(f"y={y} lies in dropped row strip {j}")
    return (x - grid.x_lines[i]) + grid.x_offsets[i], (y - grid.y_lines[j]) + grid.y_offsets[j]


def transform_box(box: BoundingBox, grid: GridDecomposition) -> BoundingBox:
    """Map a box into the compact image. Box edges are grid lines."""
    ix1 = grid.x_lines.index(box.x1)
    ix2 = grid.x_lines.index(box.x2)
    jy1 = grid.y_lines.index(box.y1)
    jy2 = grid.y_lines.index(box.y2)
    return BoundingBox(
        x1=grid.x_offsets[ix1],
        y1=grid.y_offsets[jy1],
        x2=grid.x_offsets[ix2],
        y2=grid.y_offsets[jy2],
        token=box.token,
    )


@dataclass
class CompactImage:
    """Compact raster plus per-cell provenance.

    ``provenance`` lists (source rect, destination origin) for every content
    cell; destination rects are pairwise disjoint by construction.
    ``degenerate`` flags the empty-box fallback, where the original image is
    returned unchanged so the pipeline always yields a usable input.
    """

    pixels: np.ndarray
    provenance: list[tuple[tuple[int, int, int, int], tuple[int, int]]] = field(
        default_factory=list
    )
    fill: tuple[int, int, int] = DEFAULT_FILL
    degenerate: bool = False

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def _check_image(image, boxes: BoxSet) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValidationError(f"expected HxWx3 raster, got shape {image.shape}")
    if image.shape[0] != boxes.image_height or image.shape[1] != boxes.image_width:
        raise ValidationError(
            f"image is {image.shape[1]}x{image.shape[0]} but boxes were computed "
            f"for {boxes.image_width}x{boxes.image_height}"
        )
    return image


def compact_image(image, boxes: BoxSet, fill=DEFAULT_FILL) -> CompactImage:
    """Re-stitch content cells into a compact raster, dropping empty strips.

    Cells at kept row/column crossings that intersect no box are painted
    with ``fill``. An empty box set falls back to the original image with
    the degenerate flag set.
    """
    image = _check_image(image, boxes)
    fill = tuple(int(v) for v in fill)
    if len(boxes) == 0:
        return CompactImage(pixels=image.copy(), fill=fill, degenerate=True)

    grid = build_grid(boxes, boxes.image_width, boxes.image_height)
    out = np.empty((grid.compact_height, grid.compact_width, 3), dtype=image.dtype)
    out[:, :] = fill
    provenance = []
    for i in range(len(grid.x_lines) - 1):
        if not grid.col_has_content[i]:
            continue
        for j in range(len(grid.y_lines) - 1):
            if not grid.row_has_content[j]:
                continue
            if not is_content_cell(i, j, boxes, grid):
                continue
            sx1, sx2 = grid.x_lines[i], grid.x_lines[i + 1]
            sy1, sy2 = grid.y_lines[j], grid.y_lines[j + 1]
            dx, dy = grid.x_offsets[i], grid.y_offsets[j]
            out[dy : dy + (sy2 - sy1), dx : dx + (sx2 - sx1)] = image[sy1:sy2, sx1:sx2]
            provenance.append(((sx1, sy1, sx2, sy2), (dx, dy)))
    return CompactImage(pixels=out, provenance=provenance, fill=fill)


def _scan_order(boxes: BoxSet) -> list[BoundingBox]:
    return sorted(boxes, key=lambda b: (b.y1, b.x1, b.x2, b.y2))


def _tile(image: np.ndarray, ordered: list[BoundingBox], fill):
    strip_h = max(b.y2 - b.y1 for b in ordered)
    strip_w = sum(b.x2 - b.x1 for b in ordered)
    out = np.empty((strip_h, strip_w, 3), dtype=image.dtype)
    out[:, :] = fill
    provenance = []
    x = 0
    for b in ordered:
        w = b.x2 - b.x1
        out[: b.y2 - b.y1, x : x + w] = image[b.y1 : b.y2, b.x1 : b.x2]
        provenance.append((b.rect, (x, 0)))
        x += w
    return out, provenance


def recompose_with_provenance(
    image, boxes: BoxSet, mode: str, fill=DEFAULT_FILL, seed: int = 0
) -> CompactImage:
    """Build a recomposition variant with provenance matching that mode.

    sequence_tiling concatenates crops left-to-right in scan order of box
    origins; random_tiling shuffles the same crops with a seeded RNG;
    masking keeps the original resolution and fills non-box pixels;
    layout_no_compaction keeps content cells at their original offsets on a
    fill canvas; layout_compact is compact_image. An empty box set returns
    the original image for every mode (pipeline degeneracy rule).
    """
    if mode not in RECOMPOSE_MODES:
        raise ValidationError(f"unknown recompose mode {mode!r}")
    image = _check_image(image, boxes)
    fill = tuple(int(v) for v in fill)
    if len(boxes) == 0:
        return CompactImage(pixels=image.copy(), fill=fill, degenerate=True)

    if mode == "layout_compact":
        return compact_image(image, boxes, fill=fill)

    if mode in ("sequence_tiling", "random_tiling"):
        ordered = _scan_order(boxes)
        if mode == "random_tiling":
            random.Random(seed).shuffle(ordered)
        pixels, provenance = _tile(image, ordered, fill)
        return CompactImage(pixels=pixels, provenance=provenance, fill=fill)

    if mode == "masking":
        out = np.empty_like(image)
        out[:, :] = fill
        provenance = []
        for b in boxes:
            out[b.y1 : b.y2, b.x1 : b.x2] = image[b.y1 : b.y2, b.x1 : b.x2]
            provenance.append((b.rect, (b.x1, b.y1)))
        return CompactImage(pixels=out, provenance=provenance, fill=fill)

    # layout_no_compaction: content cells stay at their original offsets
    grid = build_grid(boxes, boxes.image_width, boxes.image_height)
    out = np.empty_like(image)
    out[:, :] = fill
    provenance = []
    for i in range(len(grid.x_lines) - 1):
        for j in range(len(grid.y_lines) - 1):
            if is_content_cell(i, j, boxes, grid):
                sx1, sx2 = grid.x_lines[i], grid.x_lines[i + 1]
                sy1, sy2 = grid.y_lines[j], grid.y_lines[j + 1]
                out[sy1:sy2, sx1:sx2] = image[sy1:sy2, sx1:sx2]
                provenance.append(((sx1, sy1, sx2, sy2), (sx1, sy1)))
    return CompactImage(pixels=out, provenance=provenance, fill=fill)


def recompose(image, boxes: BoxSet, mode: str, fill=DEFAULT_FILL, seed: int = 0) -> np.ndarray:
    """Raster-only variant of recompose_with_provenance."""
    return recompose_with_provenance(image, boxes, mode, fill=fill, seed=seed).pixels


def write_provenance(compact: CompactImage, path) -> None:
    """Provenance sidecar: source rect and destination origin per cell."""
    payload = {
        "cells": [
            {"src": list(src), "dst": list(dst)} for src, dst in compact.provenance
        ]
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, separators=(",", ":"))
        fh.write("\n")
