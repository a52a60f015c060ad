"""End-to-end orchestration shared by the CLI and the HTTP service."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import SmoothingConfig, aggregate_overlay, noise_prior, purify
from .boxes import BoxSet
from .bundle import AttentionBundle
from .errors import ValidationError
from .imaging import render_overlay
from .layout import DEFAULT_FILL, CompactImage, recompose_with_provenance
from .regions import ThresholdConfig, extract_boxes

# tuned operating points for the two supported encoder families
QWEN_PROFILE = {"layer": 15, "sigma": 3.0, "alpha": 0.7}
INTERNVL_PROFILE = {"layer": 17, "sigma": 2.0, "alpha": 0.6}


@dataclass(frozen=True)
class PipelineConfig:
    sigma: float = QWEN_PROFILE["sigma"]
    alpha: float = QWEN_PROFILE["alpha"]
    connectivity: int = 8
    min_area: int = 1
    fill: tuple[int, int, int] = DEFAULT_FILL
    mode: str = "layout_compact"
    use_noise_prior: bool = True
    seed: int = 0

    def smoothing(self) -> SmoothingConfig:
        return SmoothingConfig(sigma=self.sigma)

    def threshold(self) -> ThresholdConfig:
        return ThresholdConfig(
            alpha=self.alpha, connectivity=self.connectivity, min_area=self.min_area
        )


def purify_bundle(bundle: AttentionBundle, sigma: float) -> AttentionBundle:
    """Replace key planes with purified ones; noise planes are consumed.

    The output bundle carries the purified maps (possibly negative) and an
    empty noise list, since the prior has already been subtracted.
    """
    cfg = SmoothingConfig(sigma=sigma)
    prior = noise_prior([plane for _, plane in bundle.noise_maps], cfg)
    purified = [(ref, purify(plane, prior, cfg)) for ref, plane in bundle.key_maps]
    return AttentionBundle(
        image_width=bundle.image_width,
        image_height=bundle.image_height,
        patch_rows=bundle.patch_rows,
        patch_cols=bundle.patch_cols,
        layer=bundle.layer,
        key_maps=purified,
        noise_maps=[],
    )


def regions_from_bundle(bundle: AttentionBundle, config: PipelineConfig) -> BoxSet:
    return extract_boxes(
        bundle,
        config.smoothing(),
        config.threshold(),
        use_noise_prior=config.use_noise_prior,
    )


def overlay_from_bundle(
    image: np.ndarray, bundle: AttentionBundle, config: PipelineConfig
) -> np.ndarray:
    """Visualization of all purified key maps overlaid on the image."""
    cfg = config.smoothing()
    prior = None
    if config.use_noise_prior:
        prior = noise_prior([plane for _, plane in bundle.noise_maps], cfg)
    purified = [purify(plane, prior, cfg) for _, plane in bundle.key_maps]
    return render_overlay(image, aggregate_overlay(purified))


@dataclass
class PipelineResult:
    boxes: BoxSet
    compact: CompactImage  # artifact for the configured recompose mode
    overlay: np.ndarray


def run_pipeline(
    image: np.ndarray, bundle: AttentionBundle, config: PipelineConfig
) -> PipelineResult:
    """Full chain: purify, extract boxes, recompose, render overlay."""
    if image.shape[0] != bundle.image_height or image.shape[1] != bundle.image_width:
        raise ValidationError(
            f"image is {image.shape[1]}x{image.shape[0]} but bundle declares "
            f"{bundle.image_width}x{bundle.image_height}"
        )
    boxes = regions_from_bundle(bundle, config)
    compact = recompose_with_provenance(
        image, boxes, config.mode, fill=config.fill, seed=config.seed
    )
    overlay = overlay_from_bundle(image, bundle, config)
    return PipelineResult(boxes=boxes, compact=compact, overlay=overlay)
