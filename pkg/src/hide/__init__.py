"""Attention-guided region extraction and layout-preserving compaction."""

__version__ = "0.1.0"

from .attention import SmoothingConfig, aggregate_overlay, gaussian_smooth, minmax_normalize, noise_prior, purify
from .boxes import BoundingBox, BoxSet, read_boxes, write_boxes
from .bundle import AttentionBundle, TokenRef, read_bundle, write_bundle
from .layout import CompactImage, GridDecomposition, build_grid, compact_image, recompose, transform_point
from .regions import ConnectedComponent, ThresholdConfig, binarize, component_to_box, components, extract_boxes

__all__ = [
    "AttentionBundle",
    "BoundingBox",
    "BoxSet",
    "CompactImage",
    "ConnectedComponent",
    "GridDecomposition",
    "SmoothingConfig",
    "ThresholdConfig",
    "TokenRef",
    "aggregate_overlay",
    "binarize",
    "build_grid",
    "compact_image",
    "component_to_box",
    "components",
    "extract_boxes",
    "gaussian_smooth",
    "minmax_normalize",
    "noise_prior",
    "purify",
    "read_boxes",
    "read_bundle",
    "recompose",
    "transform_point",
    "write_boxes",
    "write_bundle",
]
