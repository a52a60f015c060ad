"""Ground-truth-labeled synthetic attention bundles.

Each sample plants one flat attention plateau per key token (the signal), a
shared corner "sink" block that appears in every plane regardless of token
(the non-discriminative artifact purification is meant to remove), and
optional per-patch noise. Plateaus make the noise-free threshold set
analytically exact: signal patches normalize to 1 and everything else to 0.

Randomness comes from a 64-bit linear congruential generator with fixed
constants so fixtures are reproducible across implementations:

    state = (6364136223846793005 * state + 1442695040888963407) mod 2**64
    u01   = (state >> 11) / 2**53
    randint(lo, hi) = lo + floor(u01 * (hi - lo + 1))
    normals via Box-Muller from consecutive u01 pairs

Draw order per sample: for each key token, blob width, blob height, then
(row, col) placements until the blob avoids the sink block and previously
placed blobs; then per-plane noise draws (row-major), key planes first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .attention import SmoothingConfig
from .boxes import BoundingBox, BoxSet, write_boxes
from .bundle import AttentionBundle, TokenRef, write_bundle
from .errors import ValidationError
from .imaging import save_png
from .metrics import evaluation_report
from .regions import ThresholdConfig, extract_boxes

_LCG_MULT = 6364136223846793005
_LCG_INC = 1442695040888963407
_LCG_MASK = (1 << 64) - 1

PALETTE = (
    (220, 50, 47),
    (38, 139, 210),
    (133, 153, 0),
    (211, 54, 130),
    (42, 161, 152),
    (203, 75, 22),
    (108, 113, 196),
    (181, 137, 0),
)
BACKGROUND = (235, 235, 235)


class Lcg:
    """The documented 64-bit linear congruential generator."""

    def __init__(self, seed: int):
        self.state = seed & _LCG_MASK

    def next_u64(self) -> int:
        self.state = (_LCG_MULT * self.state + _LCG_INC) & _LCG_MASK
        return self.state

    def u01(self) -> float:
        return (self.next_u64() >> 11) / float(1 << 53)

    def randint(self, lo: int, hi: int) -> int:
        if hi < lo:
            raise ValidationError(f"empty range [{lo}, {hi}]")
        return lo + int(self.u01() * (hi - lo + 1))

    def normal(self) -> float:
        u1 = self.u01()
        u2 = self.u01()
        if u1 <= 0.0:
            u1 = 2.0 ** -53
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


@dataclass(frozen=True)
class SynthSpec:
    """Knobs controlling a generated suite."""

    seed: int = 0
    n_samples: int = 10
    patch_rows: int = 24
    patch_cols: int = 24
    image_width: int = 240
    image_height: int = 240
    n_tokens: int = 2
    n_noise_tokens: int = 4
    blob_min: int = 2
    blob_max: int = 4
    signal_amplitude: float = 0.45
    sink_amplitude: float = 0.9
    sink_size: int = 3
    noise_std: float = 0.0

    def __post_init__(self):
        if self.n_samples < 1 or self.n_tokens < 1:
            raise ValidationError("need at least one sample and one token")
        if self.signal_amplitude < 0 or self.sink_amplitude < 0 or self.noise_std < 0:
            raise ValidationError("amplitudes and noise std must be >= 0")
        if not (1 <= self.blob_min <= self.blob_max):
            raise ValidationError("blob range must satisfy 1 <= min <= max")
        if self.blob_max > self.patch_rows or self.blob_max > self.patch_cols:
            raise ValidationError("blob range exceeds grid")
        if self.sink_size > min(self.patch_rows, self.patch_cols):
            raise ValidationError("sink block exceeds grid")


@dataclass
class SynthSample:
    bundle: AttentionBundle
    gt_boxes: BoxSet
    image: np.ndarray


def _patch_rect_to_pixels(
    r1: int, c1: int, r2: int, c2: int, spec: SynthSpec
) -> tuple[int, int, int, int]:
    # same floor/ceil rule the extractor applies when scaling components
    sx = spec.image_width / spec.patch_cols
    sy = spec.image_height / spec.patch_rows
    return (
        math.floor(c1 * sx),
        math.floor(r1 * sy),
        min(spec.image_width, math.ceil(c2 * sx)),
        min(spec.image_height, math.ceil(r2 * sy)),
    )


def _overlaps(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> bool:
    return a[0] < b[2] and a[2] > b[0] and a[1] < b[3] and a[3] > b[1]


def generate(spec: SynthSpec) -> list[SynthSample]:
    """Deterministic sample list for the given spec."""
    rng = Lcg(spec.seed)
    sink_rect = (0, 0, spec.sink_size, spec.sink_size)  # (r1, c1, r2, c2)

    samples = []
    for _ in range(spec.n_samples):
        blob_rects = []
        for _ in range(spec.n_tokens):
            w = rng.randint(spec.blob_min, spec.blob_max)
            h = rng.randint(spec.blob_min, spec.blob_max)
            placed = None
            for _attempt in range(1000):
                r = rng.randint(0, spec.patch_rows - h)
                c = rng.randint(0, spec.patch_cols - w)
                rect = (r, c, r + h, c + w)
                if spec.sink_amplitude > 0 and _overlaps(rect, sink_rect):
                    continue
                if any(_overlaps(rect, other) for other in blob_rects):
                    continue
                placed = rect
                break
            if placed is None:
                raise ValidationError(
                    "could not place blob without overlap; grid too crowded"
                )
            blob_rects.append(placed)

        sink = np.zeros((spec.patch_rows, spec.patch_cols), dtype=np.float64)
        if spec.sink_amplitude > 0:
            sink[sink_rect[0] : sink_rect[2], sink_rect[1] : sink_rect[3]] = spec.sink_amplitude

        def finish_plane(plane: np.ndarray) -> np.ndarray:
            if spec.noise_std > 0:
                noise = np.empty_like(plane)
                for r in range(plane.shape[0]):
                    for c in range(plane.shape[1]):
                        noise[r, c] = rng.normal() * spec.noise_std
                plane = np.clip(plane + noise, 0.0, None)
            total = plane.sum()
            if total > 1.0:
                plane = plane / total
            return plane.astype(np.float32)

        key_maps = []
        gt = []
        for idx, (r1, c1, r2, c2) in enumerate(blob_rects):
            plane = sink.copy()
            plane[r1:r2, c1:c2] += spec.signal_amplitude
            ref = TokenRef(text=f"object_{idx}", position=idx)
            key_maps.append((ref, finish_plane(plane)))
            gt.append(
                BoundingBox(*_patch_rect_to_pixels(r1, c1, r2, c2, spec), token=ref.text)
            )

        noise_maps = []
        for idx in range(spec.n_noise_tokens):
            ref = TokenRef(text=f"filler_{idx}", position=spec.n_tokens + idx)
            noise_maps.append((ref, finish_plane(sink.copy())))

        image = np.empty((spec.image_height, spec.image_width, 3), dtype=np.uint8)
        image[:, :] = BACKGROUND
        for idx, box in enumerate(gt):
            image[box.y1 : box.y2, box.x1 : box.x2] = PALETTE[idx % len(PALETTE)]

        samples.append(
            SynthSample(
                bundle=AttentionBundle(
                    image_width=spec.image_width,
                    image_height=spec.image_height,
                    patch_rows=spec.patch_rows,
                    patch_cols=spec.patch_cols,
                    layer=0,
                    key_maps=key_maps,
                    noise_maps=noise_maps,
                ),
                gt_boxes=BoxSet(
                    image_width=spec.image_width,
                    image_height=spec.image_height,
                    boxes=gt,
                ),
                image=image,
            )
        )
    return samples


def write_samples(samples: list[SynthSample], out_dir) -> list[Path]:
    """Emit sample_%04d/{bundle.hab, gt.json, image.png} under out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dirs = []
    for i, sample in enumerate(samples):
        sample_dir = out_dir / f"sample_{i:04d}"
        sample_dir.mkdir(exist_ok=True)
        write_bundle(sample.bundle, sample_dir / "bundle.hab")
        write_boxes(sample.gt_boxes, sample_dir / "gt.json")
        save_png(sample.image, sample_dir / "image.png")
        dirs.append(sample_dir)
    return dirs


@dataclass(frozen=True)
class SuiteConfig:
    """One extraction configuration evaluated by run_suite."""

    name: str
    smoothing: SmoothingConfig
    threshold: ThresholdConfig
    use_noise_prior: bool = True


def run_suite(samples: list[SynthSample], configs: list[SuiteConfig], iou_threshold: float = 0.5) -> dict:
    """Extract boxes under each config and score them against ground truth."""
    if not samples:
        raise ValidationError("run_suite needs at least one sample")
    report = {}
    for cfg in configs:
        pairs = []
        for i, sample in enumerate(samples):
            if len(sample.gt_boxes) == 0:
                continue
            pred = extract_boxes(
                sample.bundle, cfg.smoothing, cfg.threshold, use_noise_prior=cfg.use_noise_prior
            )
            pairs.append((f"sample_{i:04d}", pred, sample.gt_boxes))
        report[cfg.name] = evaluation_report(pairs, iou_threshold)
    return report
