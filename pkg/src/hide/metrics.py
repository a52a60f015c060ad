"""Region attention scores, layer profiling, and localization metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boxes import BoundingBox, BoxSet
from .bundle import AttentionBundle, TokenRef
from .errors import ValidationError


@dataclass(frozen=True)
class Region:
    """A ground-truth pixel rectangle and the patch indices it touches.

    A patch belongs to the region when its pixel footprint intersects the
    rectangle, mirroring the inverse of the patch-to-pixel box scaling.
    """

    rect: tuple[int, int, int, int]
    patches: tuple[tuple[int, int], ...]

    @staticmethod
    def from_rect(
        rect: tuple[int, int, int, int],
        image_width: int,
        image_height: int,
        patch_rows: int,
        patch_cols: int,
    ) -> "Region":
        x1, y1, x2, y2 = rect
        if not (0 <= x1 < x2 <= image_width and 0 <= y1 < y2 <= image_height):
            raise ValidationError(f"region rect {rect} outside image bounds")
        sx = image_width / patch_cols
        sy = image_height / patch_rows
        patches = tuple(
            (r, c)
            for r in range(patch_rows)
            for c in range(patch_cols)
            if c * sx < x2 and (c + 1) * sx > x1 and r * sy < y2 and (r + 1) * sy > y1
        )
        if not patches:
            raise ValidationError(f"region rect {rect} covers no patches")
        return Region(rect=rect, patches=patches)


@dataclass(frozen=True)
class TokenGroup:
    """Named token subset, e.g. the semantic vs non-semantic split.

    The partition itself is an input; no part-of-speech tagging happens
    here.
    """

    label: str
    members: tuple[TokenRef, ...]

    def __post_init__(self):
        if not self.members:
            raise ValidationError(f"token group {self.label!r} is empty")


def region_attention(values, region: Region) -> list[float]:
    """Attention values at the region's patches, row-major order."""
    arr = np.asarray(values, dtype=np.float64)
    rows, cols = arr.shape
    for r, c in region.patches:
        if not (0 <= r < rows and 0 <= c < cols):
            raise ValidationError(f"region patch ({r}, {c}) outside {rows}x{cols} grid")
    return [float(arr[r, c]) for r, c in region.patches]


def mean_group_score(maps, region: Region) -> float:
    """Mean attention over all (token, region patch) pairs."""
    maps = list(maps)
    if not maps:
        raise ValidationError("mean_group_score needs at least one map")
    total = 0.0
    for m in maps:
        total += sum(region_attention(m, region))
    return total / (len(maps) * len(region.patches))


def _lookup_map(bundle: AttentionBundle, ref: TokenRef) -> np.ndarray:
    for r, plane in list(bundle.key_maps) + list(bundle.noise_maps):
        if r == ref:
            return plane
    raise ValidationError(f"token {ref} not present in bundle (layer {bundle.layer})")


def layer_profile(
    bundles: list[AttentionBundle],
    region: Region,
    groups: list[TokenGroup],
) -> dict[str, list[tuple[int, float]]]:
    """Per-layer mean group scores, ordered by layer index.

    Every bundle must share the same grid geometry; each holds one layer.
    """
    if not bundles:
        raise ValidationError("layer_profile needs at least one bundle")
    geo = {(b.image_width, b.image_height, b.patch_rows, b.patch_cols) for b in bundles}
    if len(geo) != 1:
        raise ValidationError(f"bundles disagree on geometry: {sorted(geo)}")
    ordered = sorted(bundles, key=lambda b: b.layer)
    profile: dict[str, list[tuple[int, float]]] = {g.label: [] for g in groups}
    for b in ordered:
        for g in groups:
            score = mean_group_score([_lookup_map(b, ref) for ref in g.members], region)
            profile[g.label].append((b.layer, score))
    return profile


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two half-open pixel rectangles."""
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.area() + b.area() - inter
    return inter / union


def match_boxes(
    pred: BoxSet, gt: BoxSet, threshold: float
) -> list[tuple[BoundingBox, BoundingBox | None, float]]:
    """Greedy one-to-one matching: best remaining prediction per gt box.

    Ground-truth boxes are processed in stored order; each prediction can
    match at most once. Returns (gt, matched pred or None, iou).
    """
    if not 0.0 < threshold <= 1.0:
        raise ValidationError(f"iou threshold must be in (0, 1], got {threshold}")
    if len(gt) == 0:
        raise ValidationError("ground truth is empty")
    available = list(pred)
    result = []
    for g in gt:
        best_i, best_iou = -1, 0.0
        for i, p in enumerate(available):
            v = iou(p, g)
            if v > best_iou:
                best_i, best_iou = i, v
        if best_i >= 0 and best_iou >= threshold:
            result.append((g, available.pop(best_i), best_iou))
        else:
            result.append((g, None, 0.0))
    return result


def recall_at_iou(pred: BoxSet, gt: BoxSet, threshold: float) -> float:
    """Fraction of gt boxes matched by a prediction at IoU >= threshold."""
    matches = match_boxes(pred, gt, threshold)
    return sum(1 for _, p, _ in matches if p is not None) / len(matches)


def evaluation_report(
    pairs: list[tuple[str, BoxSet, BoxSet]], threshold: float
) -> dict:
    """Per-sample recall and mean matched IoU plus aggregate means.

    ``pairs`` holds (sample id, predictions, ground truth). Samples with an
    empty ground truth are skipped; mean IoU counts unmatched gt boxes as 0.
    """
    samples = []
    for sample_id, pred, gt in pairs:
        if len(gt) == 0:
            continue
        matches = match_boxes(pred, gt, threshold)
        matched = sum(1 for _, p, _ in matches if p is not None)
        samples.append(
            {
                "id": sample_id,
                "gt_boxes": len(gt),
                "pred_boxes": len(pred),
                "matched": matched,
                "recall": matched / len(matches),
                "mean_iou": sum(v for _, _, v in matches) / len(matches),
            }
        )
    if not samples:
        raise ValidationError("no samples with non-empty ground truth")
    return {
        "iou_threshold": threshold,
        "samples": samples,
        "aggregate": {
            "recall": sum(s["recall"] for s in samples) / len(samples),
            "mean_iou": sum(s["mean_iou"] for s in samples) / len(samples),
            "samples": len(samples),
        },
    }
