"""Attention bundle container and its on-disk HAB format.

A bundle holds per-token attention planes over a patch grid, together with
the pixel geometry of the source image. The file layout is:

    bytes 0..3    magic ``HAB1``
    bytes 4..7    unsigned 32-bit little-endian header length N
    bytes 8..8+N  UTF-8 JSON header with keys image_width, image_height,
                  patch_rows, patch_cols, layer, key_tokens, noise_tokens
    remainder     one plane per token (key planes first, header order),
                  each patch_rows*patch_cols float32 little-endian row-major

Planes are stored as 32-bit floats so files are compact and bit-exact
across platforms.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import CorruptionError, FormatError, ValidationError

MAGIC = b"HAB1"

_HEADER_KEYS = (
    "image_width",
    "image_height",
    "patch_rows",
    "patch_cols",
    "layer",
    "key_tokens",
    "noise_tokens",
)


@dataclass(frozen=True)
class TokenRef:
    """A text token identified by its surface form and prompt position."""

    text: str
    position: int

    def __post_init__(self):
        if self.position < 0:
            raise ValidationError(f"token position must be >= 0, got {self.position}")


@dataclass
class AttentionBundle:
    """Per-token attention planes plus the geometry they live on.

    ``key_maps`` carries the planes of key-information tokens and must be
    non-empty. ``noise_maps`` carries search-prompt planes used for the
    background prior and may be empty, in which case purification
    degenerates to smoothing plus normalization.
    """

    image_width: int
    image_height: int
    patch_rows: int
    patch_cols: int
    layer: int
    key_maps: list[tuple[TokenRef, np.ndarray]]
    noise_maps: list[tuple[TokenRef, np.ndarray]] = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    @property
    def grid_shape(self) -> tuple[int, int]:
        return (self.patch_rows, self.patch_cols)

    def validate(self) -> None:
        if self.patch_rows < 1 or self.patch_cols < 1:
            raise ValidationError("patch grid must be at least 1x1")
        if self.image_width < self.patch_cols or self.image_height < self.patch_rows:
            raise ValidationError(
                "image must be at least as large as the patch grid: "
                f"{self.image_width}x{self.image_height} vs grid "
                f"{self.patch_cols}x{self.patch_rows}"
            )
        if not self.key_maps:
            raise ValidationError("bundle must contain at least one key map")
        for kind, maps in (("key", self.key_maps), ("noise", self.noise_maps)):
            for i, (ref, plane) in enumerate(maps):
                if plane.shape != self.grid_shape:
                    raise ValidationError(
                        f"{kind} plane {i} ({ref.text!r}) has shape {plane.shape}, "
                        f"expected {self.grid_shape}"
                    )
                if not np.isfinite(plane).all():
                    raise ValidationError(
                        f"{kind} plane {i} ({ref.text!r}) contains NaN or Inf"
                    )


def check_raw_maps(bundle: AttentionBundle) -> None:
    """Check the extra invariants of raw (unpurified) bundles.

    Raw planes are softmax rows restricted to image tokens: entries are
    non-negative and each plane sums to at most 1 (plus rounding slack).
    Purified bundles are exempt; they legitimately hold negative values.
    """
    for kind, maps in (("key", bundle.key_maps), ("noise", bundle.noise_maps)):
        for i, (ref, plane) in enumerate(maps):
            if (plane < 0).any():
                raise ValidationError(
                    f"raw {kind} plane {i} ({ref.text!r}) has negative entries"
                )
            total = float(plane.sum())
            if total > 1.0 + 1e-4:
                raise ValidationError(
                    f"raw {kind} plane {i} ({ref.text!r}) sums to {total:.6f} > 1"
                )


def _token_list(tokens) -> list[TokenRef]:
    refs = []
    for entry in tokens:
        if not isinstance(entry, dict) or "text" not in entry or "position" not in entry:
            raise FormatError("token entries must be objects with text and position")
        refs.append(TokenRef(text=str(entry["text"]), position=int(entry["position"])))
    return refs


def write_bundle(bundle: AttentionBundle, path) -> None:
    """Serialize a bundle to the HAB byte layout. Planes are cast to float32."""
    bundle.validate()
    header = {
        "image_width": bundle.image_width,
        "image_height": bundle.image_height,
        "patch_rows": bundle.patch_rows,
        "patch_cols": bundle.patch_cols,
        "layer": bundle.layer,
        "key_tokens": [{"text": r.text, "position": r.position} for r, _ in bundle.key_maps],
        "noise_tokens": [{"text": r.text, "position": r.position} for r, _ in bundle.noise_maps],
    }
    header_bytes = json.dumps(header, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        for _, plane in bundle.key_maps:
            fh.write(np.ascontiguousarray(plane, dtype="<f4").tobytes())
        for _, plane in bundle.noise_maps:
            fh.write(np.ascontiguousarray(plane, dtype="<f4").tobytes())


def read_bundle(path) -> AttentionBundle:
    """Parse a HAB file, validating structure before returning the bundle."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 8 or data[:4] != MAGIC:
        raise FormatError(f"{path}: not a HAB bundle (bad magic)")
    (header_len,) = struct.unpack("<I", data[4:8])
    if len(data) < 8 + header_len:
        raise CorruptionError(f"{path}: header truncated")
    try:
        header = json.loads(data[8 : 8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: header is not valid JSON: {exc}") from exc
    missing = [k for k in _HEADER_KEYS if k not in header]
    if missing:
        raise FormatError(f"{path}: header missing keys {missing}")

    rows, cols = int(header["patch_rows"]), int(header["patch_cols"])
    key_refs = _token_list(header["key_tokens"])
    noise_refs = _token_list(header["noise_tokens"])
    n_planes = len(key_refs) + len(noise_refs)
    plane_bytes = rows * cols * 4
    body = data[8 + header_len :]
    if len(body) != n_planes * plane_bytes:
        raise CorruptionError(
            f"{path}: header declares {n_planes} planes "
            f"({n_planes * plane_bytes} bytes) but file body has {len(body)} bytes"
        )

    planes = []
    for i in range(n_planes):
        raw = body[i * plane_bytes : (i + 1) * plane_bytes]
        plane = np.frombuffer(raw, dtype="<f4").reshape(rows, cols).copy()
        ref = key_refs[i] if i < len(key_refs) else noise_refs[i - len(key_refs)]
        if not np.isfinite(plane).all():
            raise ValidationError(
                f"{path}: plane {i} (token {ref.text!r}) contains NaN or Inf"
            )
        planes.append(plane)

    return AttentionBundle(
        image_width=int(header["image_width"]),
        image_height=int(header["image_height"]),
        patch_rows=rows,
        patch_cols=cols,
        layer=int(header["layer"]),
        key_maps=list(zip(key_refs, planes[: len(key_refs)])),
        noise_maps=list(zip(noise_refs, planes[len(key_refs) :])),
    )
