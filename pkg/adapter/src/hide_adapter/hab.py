"""Writer for the HAB bundle interchange format.

This mirrors the documented external byte layout: ``HAB1`` magic, u32-LE
header length, UTF-8 JSON header, then one float32-LE row-major plane per
token, key planes first in header order. The pipeline package is the
consumer; this module intentionally has no dependency on it.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"HAB1"


@dataclass(frozen=True)
class TokenRef:
    text: str
    position: int


def write_hab(
    path,
    image_width: int,
    image_height: int,
    patch_rows: int,
    patch_cols: int,
    layer: int,
    key_planes: list[tuple[TokenRef, np.ndarray]],
    noise_planes: list[tuple[TokenRef, np.ndarray]],
) -> None:
    if not key_planes:
        raise ValueError("need at least one key plane")
    for ref, plane in key_planes + noise_planes:
        if plane.shape != (patch_rows, patch_cols):
            raise ValueError(
                f"plane for {ref.text!r} has shape {plane.shape}, "
                f"expected {(patch_rows, patch_cols)}"
            )
    header = {
        "image_width": image_width,
        "image_height": image_height,
        "patch_rows": patch_rows,
        "patch_cols": patch_cols,
        "layer": layer,
        "key_tokens": [{"text": r.text, "position": r.position} for r, _ in key_planes],
        "noise_tokens": [{"text": r.text, "position": r.position} for r, _ in noise_planes],
    }
    blob = json.dumps(header, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _, plane in key_planes:
            fh.write(np.ascontiguousarray(plane, dtype="<f4").tobytes())
        for _, plane in noise_planes:
            fh.write(np.ascontiguousarray(plane, dtype="<f4").tobytes())
