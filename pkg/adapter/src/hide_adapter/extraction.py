"""Key-token extraction and memory-bounded bundle export.

The flow mirrors production attention hooking: one streamed forward pass
over [image tokens][prompt tokens] capturing per-layer attention inputs
(offloaded to CPU when requested), then per-token attention rows are
recomputed selectively and written out as a HAB bundle. The full attention
matrix is never materialized on the export path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .hab import TokenRef, write_hab
from .model import Preprocessed, ToyVLM, preprocess_image
from .tokenizer import STOPWORDS, content_words, tokenize


class AdapterError(Exception):
    pass


class NoKeyTokensError(AdapterError):
    """The model emitted no extractable phrases.

    Callers may fall back to using all question content words directly.
    """


# Prompt wording is not canonical; both templates are configurable.
DEFAULT_EXTRACT_TEMPLATE = "list the key object words needed to answer: {question}"
DEFAULT_SEARCH_TEMPLATE = "please look around the image and describe everything then answer: {question}"


@dataclass(frozen=True)
class ExtractionConfig:
    model: str = "toy"
    layer: int = 2
    head_aggregation: str = "mean"  # mean | max
    extract_template: str = DEFAULT_EXTRACT_TEMPLATE
    search_template: str = DEFAULT_SEARCH_TEMPLATE
    max_image_tokens: int = 1024
    offload: bool = True
    model_kwargs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.head_aggregation not in ("mean", "max"):
            raise AdapterError(f"unknown head aggregation {self.head_aggregation!r}")


_REGISTRY = {"toy": ToyVLM}


def load_model(cfg: ExtractionConfig) -> ToyVLM:
    try:
        factory = _REGISTRY[cfg.model]
    except KeyError:
        raise AdapterError(f"unknown model {cfg.model!r}; known: {sorted(_REGISTRY)}")
    model = factory(**cfg.model_kwargs)
    if not 0 <= cfg.layer < model.n_layers:
        raise AdapterError(f"layer {cfg.layer} outside model depth {model.n_layers}")
    return model


def render_prompt(question: str, cfg: ExtractionConfig) -> list[str]:
    return tokenize(cfg.search_template.format(question=question))


def extract_key_tokens(image: np.ndarray, question: str, cfg: ExtractionConfig,
                       model: ToyVLM | None = None) -> list[TokenRef]:
    """Ask the model for key phrases and map them to prompt token positions."""
    if not question or not question.strip():
        raise AdapterError("question must be non-empty")
    model = model or load_model(cfg)
    phrases = model.extract_phrases(image, cfg.extract_template.format(question=question))
    prompt = render_prompt(question, cfg)
    refs = []
    for phrase in phrases:
        for word in tokenize(phrase):
            if word in (r.text for r in refs):
                continue
            try:
                position = prompt.index(word)
            except ValueError:
                continue
            refs.append(TokenRef(text=word, position=position))
    if not refs:
        raise NoKeyTokensError(
            f"no key phrases recoverable from question {question!r}; "
            "fall back to question content words"
        )
    return refs


def collect_noise_tokens(question: str, cfg: ExtractionConfig) -> list[TokenRef]:
    """Semantically irrelevant prompt tokens supplying the background prior."""
    prompt = render_prompt(question, cfg)
    question_words = set(content_words(question))
    refs = []
    seen = set()
    for position, word in enumerate(prompt):
        if word in STOPWORDS and word not in question_words and word not in seen:
            refs.append(TokenRef(text=word, position=position))
            seen.add(word)
    return refs


def _aggregate_heads(rows: torch.Tensor, rule: str) -> torch.Tensor:
    # rows: (n, heads, T)
    if rule == "mean":
        return rows.mean(dim=1)
    return rows.amax(dim=1)


@dataclass
class ExportResult:
    path: str
    patch_rows: int
    patch_cols: int
    n_key: int
    n_noise: int


def export_bundle(
    image: np.ndarray,
    question: str,
    key_tokens: list[TokenRef],
    noise_tokens: list[TokenRef],
    cfg: ExtractionConfig,
    path,
    model: ToyVLM | None = None,
) -> ExportResult:
    """One streamed forward, then selective row recomputation, then HAB write.

    Each requested token's softmax row spans every attended position; the
    image-token slice of that row is what lands in the bundle, so raw planes
    are sub-distributions. Peak memory is the streamed forward plus a single
    (heads, n, T) row batch.
    """
    if not key_tokens:
        raise AdapterError("need at least one key token")
    model = model or load_model(cfg)
    pre: Preprocessed = preprocess_image(image, model.patch_px, cfg.max_image_tokens)
    n_img = pre.patch_rows * pre.patch_cols
    prompt = render_prompt(question, cfg)
    seq_len = n_img + len(prompt)
    for ref in key_tokens + noise_tokens:
        if not 0 <= ref.position < len(prompt):
            raise AdapterError(
                f"token {ref.text!r} position {ref.position} outside prompt "
                f"of {len(prompt)} tokens"
            )

    x = model.embed(pre, prompt)
    assert x.shape[0] == seq_len
    captured = model.forward_capture(x, offload=cfg.offload)

    ordered = list(key_tokens) + list(noise_tokens)
    indices = [n_img + ref.position for ref in ordered]
    rows = model.attention_rows(captured, cfg.layer, indices)  # (n, H, T)
    planes = _aggregate_heads(rows, cfg.head_aggregation)[:, :n_img]
    grids = planes.reshape(len(ordered), pre.patch_rows, pre.patch_cols).numpy()

    height, width = image.shape[:2]
    write_hab(
        path,
        image_width=width,
        image_height=height,
        patch_rows=pre.patch_rows,
        patch_cols=pre.patch_cols,
        layer=cfg.layer,
        key_planes=[(ref, grids[i]) for i, ref in enumerate(key_tokens)],
        noise_planes=[
            (ref, grids[len(key_tokens) + i]) for i, ref in enumerate(noise_tokens)
        ],
    )
    return ExportResult(
        path=str(path),
        patch_rows=pre.patch_rows,
        patch_cols=pre.patch_cols,
        n_key=len(key_tokens),
        n_noise=len(noise_tokens),
    )
