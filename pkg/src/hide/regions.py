"""Turn purified attention maps into pixel-space bounding boxes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .attention import SmoothingConfig, minmax_normalize, noise_prior, purify
from .boxes import BoundingBox, BoxSet
from .bundle import AttentionBundle
from .errors import ValidationError

_STRUCTURE_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_STRUCTURE_8 = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class ThresholdConfig:
    """Binarization threshold and component filtering.

    Connectivity defaults to 8 because smoothed attention blobs are roughly
    isotropic and 4-connectivity would split diagonal ridges.
    """

    alpha: float = 0.7
    connectivity: int = 8
    min_area: int = 1

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValidationError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.connectivity not in (4, 8):
            raise ValidationError(f"connectivity must be 4 or 8, got {self.connectivity}")
        if self.min_area < 1:
            raise ValidationError(f"min_area must be >= 1, got {self.min_area}")


@dataclass(frozen=True)
class ConnectedComponent:
    """Patch coordinates of one connected region, as (row, col) pairs."""

    cells: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if not self.cells:
            raise ValidationError("component must be non-empty")

    @property
    def row_range(self) -> tuple[int, int]:
        rows = [r for r, _ in self.cells]
        return min(rows), max(rows)

    @property
    def col_range(self) -> tuple[int, int]:
        cols = [c for _, c in self.cells]
        return min(cols), max(cols)


def binarize(values, cfg: ThresholdConfig) -> np.ndarray:
    """Mask of cells whose normalized value strictly exceeds alpha.

    A constant map normalizes to zero everywhere, so it binarizes to an
    all-zero mask for every alpha.
    """
    return (minmax_normalize(values) > cfg.alpha).astype(np.uint8)


def components(mask, cfg: ThresholdConfig) -> list[ConnectedComponent]:
    """Maximal connected regions of 1-cells, ordered by (min row, min col).

    Components smaller than cfg.min_area patches are dropped.
    """
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValidationError(f"mask must be 2D, got shape {mask.shape}")
    structure = _STRUCTURE_8 if cfg.connectivity == 8 else _STRUCTURE_4
    labels, count = ndimage.label(mask != 0, structure=structure)
    out = []
    for lab in range(1, count + 1):
        rows, cols = np.nonzero(labels == lab)
        if len(rows) < cfg.min_area:
            continue
        cells = tuple(sorted(zip(rows.tolist(), cols.tolist())))
        out.append(ConnectedComponent(cells=cells))
    out.sort(key=lambda c: (c.row_range[0], c.col_range[0], c.cells))
    return out


def component_to_box(
    component: ConnectedComponent,
    image_width: int,
    image_height: int,
    patch_rows: int,
    patch_cols: int,
    token: str = "",
) -> BoundingBox:
    """Scale a patch-space component to a pixel box.

    The patch-space rectangle is tight (min/max of member cells, exclusive
    max); floor/ceil scaling guarantees full pixel coverage of the covered
    patches even when the patch stride is non-integer.
    """
    r1, r2 = component.row_range
    c1, c2 = component.col_range
    sx = image_width / patch_cols
    sy = image_height / patch_rows
    return BoundingBox(
        x1=max(0, math.floor(c1 * sx)),
        y1=max(0, math.floor(r1 * sy)),
        x2=min(image_width, math.ceil((c2 + 1) * sx)),
        y2=min(image_height, math.ceil((r2 + 1) * sy)),
        token=token,
    )


def extract_boxes(
    bundle: AttentionBundle,
    smoothing: SmoothingConfig,
    thresh: ThresholdConfig,
    use_noise_prior: bool = True,
) -> BoxSet:
    """Run purify -> binarize -> components -> boxes for every key token.

    Boxes from different tokens that land on the identical rectangle are
    merged, keeping all token tags joined with commas. Overlapping but
    distinct boxes are kept separate; grid compaction handles overlap.
    Setting use_noise_prior=False skips the prior subtraction, which is the
    ablation baseline.
    """
    prior = None
    if use_noise_prior:
        prior = noise_prior([plane for _, plane in bundle.noise_maps], smoothing)

    by_rect: dict[tuple[int, int, int, int], list[str]] = {}
    order: list[tuple[int, int, int, int]] = []
    for ref, plane in bundle.key_maps:
        purified = purify(plane, prior, smoothing)
        mask = binarize(purified, thresh)
        for comp in components(mask, thresh):
            box = component_to_box(
                comp,
                bundle.image_width,
                bundle.image_height,
                bundle.patch_rows,
                bundle.patch_cols,
                token=ref.text,
            )
            if box.rect not in by_rect:
                by_rect[box.rect] = []
                order.append(box.rect)
            if ref.text not in by_rect[box.rect]:
                by_rect[box.rect].append(ref.text)

    merged = [
        BoundingBox(x1=r[0], y1=r[1], x2=r[2], y2=r[3], token=",".join(by_rect[r]))
        for r in order
    ]
    return BoxSet(image_width=bundle.image_width, image_height=bundle.image_height, boxes=merged)
