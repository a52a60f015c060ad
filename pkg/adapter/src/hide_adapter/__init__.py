"""Model-side attention extraction to HAB bundles."""

__version__ = "0.1.0"

from .extraction import (
    AdapterError,
    ExtractionConfig,
    NoKeyTokensError,
    collect_noise_tokens,
    export_bundle,
    extract_key_tokens,
    load_model,
)
from .model import ToyVLM, preprocess_image

__all__ = [
    "AdapterError",
    "ExtractionConfig",
    "NoKeyTokensError",
    "ToyVLM",
    "collect_noise_tokens",
    "export_bundle",
    "extract_key_tokens",
    "load_model",
    "preprocess_image",
]
