"""Adapter acceptance: row-recomputation oracle and the memory contract.

Run ``pytest -s tests/test_acceptance.py`` for one PASS line per criterion.
"""

import json
import struct
import subprocess
import sys

import numpy as np

from hide_adapter.extraction import (
    ExtractionConfig,
    collect_noise_tokens,
    export_bundle,
    extract_key_tokens,
    load_model,
    render_prompt,
)
from hide_adapter.model import preprocess_image


def report(name):
    print(f"\nACCEPTANCE PASS: {name}")


def test_row_recomputation_matches_full_matrix_oracle():
    # toy model small enough to materialize full attention
    cfg = ExtractionConfig(layer=0, max_image_tokens=64)
    model = load_model(cfg)
    rng = np.random.default_rng(11)
    image = rng.integers(0, 255, (96, 128, 3), dtype=np.uint8)
    pre = preprocess_image(image, model.patch_px, cfg.max_image_tokens)
    prompt = render_prompt("where is the red ball near the dog", cfg)
    x = model.embed(pre, prompt)
    n_img = pre.patch_rows * pre.patch_cols

    captured = model.forward_capture(x, offload=True)
    indices = list(range(n_img, x.shape[0]))
    worst = 0.0
    for layer in range(model.n_layers):
        got = model.attention_rows(captured, layer, indices)
        full = model.forward_full(x)[layer]
        want = full[:, indices, :].transpose(0, 1)
        worst = max(worst, (got - want).abs().max().item())
    assert worst < 1e-4
    report(f"selective rows match full-matrix oracle (max err {worst:.2e} < 1e-4)")


def test_exported_planes_are_valid_sub_distributions(tmp_path):
    cfg = ExtractionConfig(layer=2, max_image_tokens=100)
    model = load_model(cfg)
    rng = np.random.default_rng(12)
    image = rng.integers(0, 255, (160, 160, 3), dtype=np.uint8)
    question = "is the red ball left of the blue chair"
    keys = extract_key_tokens(image, question, cfg, model=model)
    noise = collect_noise_tokens(question, cfg)
    out = tmp_path / "acc.hab"
    result = export_bundle(image, question, keys, noise, cfg, out, model=model)

    data = out.read_bytes()
    assert data[:4] == b"HAB1"
    header_len = struct.unpack("<I", data[4:8])[0]
    header = json.loads(data[8 : 8 + header_len])
    assert len(header["key_tokens"]) == result.n_key
    assert len(header["noise_tokens"]) == result.n_noise
    planes = np.frombuffer(data[8 + header_len :], dtype="<f4").reshape(
        result.n_key + result.n_noise, -1
    )
    assert (planes >= 0).all()
    assert (planes.sum(axis=1) <= 1 + 1e-4).all()
    report(
        f"exported planes are sub-distributions "
        f"({result.n_key} key + {result.n_noise} noise, max sum {planes.sum(axis=1).max():.4f})"
    )


def test_memory_recomputation_below_materialization():
    # directional check in fresh subprocesses; ru_maxrss is monotone per process
    peaks = {}
    for mode in ("selective", "full"):
        proc = subprocess.run(
            [sys.executable, "-m", "hide_adapter.membench", "--mode", mode, "--grid", "56"],
            capture_output=True,
            text=True,
            timeout=300,
        )
        assert proc.returncode == 0, proc.stderr
        peaks[mode] = json.loads(proc.stdout)["peak_kb"]
    assert peaks["selective"] < peaks["full"], peaks
    report(
        f"peak memory selective {peaks['selective'] // 1024} MB < "
        f"full materialization {peaks['full'] // 1024} MB"
    )
