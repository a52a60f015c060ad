"""Peak-memory probe for the two attention strategies.

Run as a module in a fresh subprocess per mode; ru_maxrss is a process-wide
high-water mark, so the two strategies cannot be compared within one
process. Prints a single JSON line with the peak in kilobytes.
"""

from __future__ import annotations

import argparse
import json
import resource
import sys

import numpy as np


def run(mode: str, grid: int, text_tokens: int) -> dict:
    import torch

    from .model import ToyVLM, preprocess_image

    model = ToyVLM(patch_px=8)
    image = np.full((grid * 8, grid * 8, 3), 127, dtype=np.uint8)
    pre = preprocess_image(image, model.patch_px, max_image_tokens=grid * grid)
    prompt = [f"w{i}" for i in range(text_tokens)]
    x = model.embed(pre, prompt)
    with torch.no_grad():
        if mode == "full":
            weights = model.forward_full(x)
            checksum = float(weights[-1][0, -1].sum())
        else:
            captured = model.forward_capture(x, offload=True)
            rows = model.attention_rows(captured, model.n_layers - 1, [x.shape[0] - 1])
            checksum = float(rows.sum())
    peak_kb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    return {"mode": mode, "seq_len": int(x.shape[0]), "peak_kb": peak_kb, "checksum": checksum}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--mode", choices=("full", "selective"), required=True)
    parser.add_argument("--grid", type=int, default=56)
    parser.add_argument("--text-tokens", type=int, default=16)
    args = parser.parse_args(argv)
    print(json.dumps(run(args.mode, args.grid, args.text_tokens)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
