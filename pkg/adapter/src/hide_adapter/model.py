"""A small deterministic vision-language transformer for desk-scale tests.

The sequence is [image patch tokens][text tokens], causally masked, so text
queries attend to every image token. The forward pass uses block-streamed
attention (online softmax over key blocks) and never materializes the
T x T attention matrix; a naive reference path that does materialize it
exists solely as an oracle and as the memory-comparison baseline.

During the streamed forward each layer's attention input (the post-norm
hidden states feeding the q/k projections) is captured, optionally offloaded
to CPU, so that individual attention rows can be recomputed afterwards
without a second forward pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .tokenizer import VOCAB_SIZE, token_id


@dataclass
class Preprocessed:
    """Image preprocessor output; the patch grid is authoritative here."""

    patch_rows: int
    patch_cols: int
    features: torch.Tensor  # (rows*cols, 3) mean RGB in [0, 1]


def preprocess_image(image: np.ndarray, patch_px: int, max_image_tokens: int) -> Preprocessed:
    """Mean-pool the image into a patch grid capped at max_image_tokens.

    The grid shape is decided here, from the pixel size, never inferred
    downstream from the token count.
    """
    height, width = image.shape[:2]
    rows = max(1, round(height / patch_px))
    cols = max(1, round(width / patch_px))
    if rows * cols > max_image_tokens:
        scale = math.sqrt(max_image_tokens / (rows * cols))
        rows = max(1, math.floor(rows * scale))
        cols = max(1, math.floor(cols * scale))
    # PIL-backed arrays are read-only; copy before handing to torch
    pixels = torch.from_numpy(np.array(image[:, :, :3], dtype=np.uint8)).float() / 255.0
    feats = torch.empty(rows * cols, 3)
    for r in range(rows):
        y0, y1 = r * height // rows, max((r + 1) * height // rows, r * height // rows + 1)
        for c in range(cols):
            x0, x1 = c * width // cols, max((c + 1) * width // cols, c * width // cols + 1)
            feats[r * cols + c] = pixels[y0:y1, x0:x1].mean(dim=(0, 1))
    return Preprocessed(patch_rows=rows, patch_cols=cols, features=feats)


class Block(nn.Module):
    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        self.n_heads = n_heads
        self.d_head = d_model // n_heads
        self.ln1 = nn.LayerNorm(d_model)
        self.q_proj = nn.Linear(d_model, d_model)
        self.k_proj = nn.Linear(d_model, d_model)
        self.v_proj = nn.Linear(d_model, d_model)
        self.o_proj = nn.Linear(d_model, d_model)
        self.ln2 = nn.LayerNorm(d_model)
        self.mlp = nn.Sequential(
            nn.Linear(d_model, 4 * d_model),
            nn.GELU(),
            nn.Linear(4 * d_model, d_model),
        )

    def heads(self, x: torch.Tensor, proj: nn.Linear) -> torch.Tensor:
        seq = x.shape[0]
        return proj(x).view(seq, self.n_heads, self.d_head).transpose(0, 1)


class ToyVLM(nn.Module):
    """Deterministically initialized toy model with streamed attention."""

    def __init__(
        self,
        d_model: int = 64,
        n_heads: int = 4,
        n_layers: int = 4,
        patch_px: int = 16,
        seed: int = 1234,
        block_size: int = 128,
    ):
        super().__init__()
        self.d_model = d_model
        self.n_heads = n_heads
        self.n_layers = n_layers
        self.patch_px = patch_px
        self.block_size = block_size
        self.token_emb = nn.Embedding(VOCAB_SIZE, d_model)
        self.patch_proj = nn.Linear(3, d_model)
        self.pos_emb = nn.Embedding(8192, d_model)
        self.blocks = nn.ModuleList(Block(d_model, n_heads) for _ in range(n_layers))
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for p in self.parameters():
                p.copy_(torch.randn(p.shape, generator=gen) * 0.05)
        self.eval()

    # -- embedding ---------------------------------------------------------

    def embed(self, pre: Preprocessed, text_tokens: list[str]) -> torch.Tensor:
        n_img = pre.patch_rows * pre.patch_cols
        ids = torch.tensor([token_id(w) for w in text_tokens], dtype=torch.long)
        parts = [self.patch_proj(pre.features)]
        if len(ids):
            parts.append(self.token_emb(ids))
        x = torch.cat(parts, dim=0)
        positions = torch.arange(x.shape[0], dtype=torch.long)
        return x + self.pos_emb(positions % self.pos_emb.num_embeddings)

    # -- attention variants -------------------------------------------------

    def _streamed_attention(self, block: Block, x: torch.Tensor) -> torch.Tensor:
        """Causal attention via online softmax over key blocks.

        Peak extra memory is one (heads, q_block, k_block) score tile.
        """
        seq = x.shape[0]
        q = block.heads(x, block.q_proj)  # (H, T, dh)
        k = block.heads(x, block.k_proj)
        v = block.heads(x, block.v_proj)
        scale = 1.0 / math.sqrt(block.d_head)
        out = torch.empty_like(q)
        bs = self.block_size
        for q0 in range(0, seq, bs):
            q1 = min(q0 + bs, seq)
            qb = q[:, q0:q1] * scale
            running_max = torch.full((self.n_heads, q1 - q0, 1), -torch.inf)
            denom = torch.zeros(self.n_heads, q1 - q0, 1)
            acc = torch.zeros(self.n_heads, q1 - q0, block.d_head)
            for k0 in range(0, q1, bs):
                k1 = min(k0 + bs, q1)
                scores = qb @ k[:, k0:k1].transpose(1, 2)  # (H, qb, kb)
                if k1 > q0:  # tile crosses the diagonal: apply causal mask
                    qi = torch.arange(q0, q1).unsqueeze(1)
                    kj = torch.arange(k0, k1).unsqueeze(0)
                    scores = scores.masked_fill(kj > qi, -torch.inf)
                tile_max = scores.amax(dim=-1, keepdim=True)
                new_max = torch.maximum(running_max, tile_max)
                correction = torch.exp(running_max - new_max)
                weights = torch.exp(scores - new_max)
                denom = denom * correction + weights.sum(dim=-1, keepdim=True)
                acc = acc * correction + weights @ v[:, k0:k1]
                running_max = new_max
            out[:, q0:q1] = acc / denom
        seq_first = out.transpose(0, 1).reshape(seq, self.d_model)
        return block.o_proj(seq_first)

    def _full_attention(self, block: Block, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Naive reference: materializes the full (H, T, T) weight matrix."""
        seq = x.shape[0]
        q = block.heads(x, block.q_proj)
        k = block.heads(x, block.k_proj)
        v = block.heads(x, block.v_proj)
        scores = q @ k.transpose(1, 2) / math.sqrt(block.d_head)
        mask = torch.triu(torch.ones(seq, seq, dtype=torch.bool), diagonal=1)
        scores = scores.masked_fill(mask, -torch.inf)
        weights = torch.softmax(scores, dim=-1)
        out = (weights @ v).transpose(0, 1).reshape(seq, self.d_model)
        return block.o_proj(out), weights

    # -- forward passes ------------------------------------------------------

    @torch.no_grad()
    def forward_capture(self, x: torch.Tensor, offload: bool = True) -> list[torch.Tensor]:
        """Streamed forward; returns per-layer attention inputs.

        The captured tensors are all that is needed to recompute any
        attention row afterwards (they feed the q and k projections).
        """
        captured = []
        for block in self.blocks:
            a_in = block.ln1(x)
            captured.append(a_in.cpu() if offload else a_in)
            x = x + self._streamed_attention(block, a_in)
            x = x + block.mlp(block.ln2(x))
        return captured

    @torch.no_grad()
    def forward_full(self, x: torch.Tensor) -> list[torch.Tensor]:
        """Naive forward; returns the full attention weights per layer."""
        all_weights = []
        for block in self.blocks:
            a_in = block.ln1(x)
            out, weights = self._full_attention(block, a_in)
            all_weights.append(weights)
            x = x + out
            x = x + block.mlp(block.ln2(x))
        return all_weights

    @torch.no_grad()
    def attention_rows(
        self, captured: list[torch.Tensor], layer: int, token_indices: list[int]
    ) -> torch.Tensor:
        """Recompute softmax rows for chosen tokens at one layer.

        Only the requested rows are formed: an (H, n, T) score batch against
        the layer's keys, never the full T x T matrix. Returns (n, heads, T)
        probabilities over all attended positions.
        """
        if not 0 <= layer < self.n_layers:
            raise IndexError(f"layer {layer} out of range [0, {self.n_layers})")
        a_in = captured[layer]
        seq = a_in.shape[0]
        for idx in token_indices:
            if not 0 <= idx < seq:
                raise IndexError(f"token index {idx} out of sequence [0, {seq})")
        block = self.blocks[layer]
        q = block.heads(a_in, block.q_proj)[:, token_indices]  # (H, n, dh)
        k = block.heads(a_in, block.k_proj)  # (H, T, dh)
        scores = q @ k.transpose(1, 2) / math.sqrt(block.d_head)  # (H, n, T)
        positions = torch.arange(seq).view(1, 1, seq)
        allowed = positions <= torch.tensor(token_indices).view(1, -1, 1)
        scores = scores.masked_fill(~allowed, -torch.inf)
        return torch.softmax(scores, dim=-1).transpose(0, 1)  # (n, H, T)

    # -- toy "generation" ----------------------------------------------------

    def extract_phrases(self, image: np.ndarray, question: str) -> list[str]:
        """Stand-in for instruction-following extraction.

        A real backend would decode the extract prompt's answer; the toy
        model deterministically emits the question's content words.
        """
        from .tokenizer import content_words

        return content_words(question)
