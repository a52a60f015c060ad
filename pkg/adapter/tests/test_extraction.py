import shutil
import struct
import subprocess

import numpy as np
import pytest

from hide_adapter.extraction import (
    AdapterError,
    ExtractionConfig,
    NoKeyTokensError,
    collect_noise_tokens,
    export_bundle,
    extract_key_tokens,
    load_model,
    render_prompt,
)
from hide_adapter.hab import TokenRef


@pytest.fixture(scope="module")
def image():
    rng = np.random.default_rng(3)
    return rng.integers(0, 255, (128, 160, 3), dtype=np.uint8)


@pytest.fixture(scope="module")
def cfg():
    return ExtractionConfig(layer=1, max_image_tokens=80)


@pytest.fixture(scope="module")
def model(cfg):
    return load_model(cfg)


def test_unknown_model_rejected():
    with pytest.raises(AdapterError):
        load_model(ExtractionConfig(model="qwen-900b"))


def test_layer_out_of_depth_rejected():
    with pytest.raises(AdapterError):
        load_model(ExtractionConfig(layer=99))


def test_extract_includes_umbrella(image, cfg, model):
    refs = extract_key_tokens(image, "what color is the umbrella", cfg, model=model)
    assert "umbrella" in [r.text for r in refs]
    prompt = render_prompt("what color is the umbrella", cfg)
    for r in refs:
        assert prompt[r.position] == r.text


def test_extract_empty_question_rejected(image, cfg, model):
    with pytest.raises(AdapterError):
        extract_key_tokens(image, "   ", cfg, model=model)


def test_extract_multi_object(image, cfg, model):
    refs = extract_key_tokens(
        image, "is the red ball left of the blue chair", cfg, model=model
    )
    assert len(refs) >= 2


def test_extract_stopword_only_question_raises(image, cfg, model):
    with pytest.raises(NoKeyTokensError):
        extract_key_tokens(image, "what is this", cfg, model=model)


def test_noise_tokens_are_stopwords(cfg):
    noise = collect_noise_tokens("what color is the umbrella", cfg)
    assert noise
    texts = [n.text for n in noise]
    assert "umbrella" not in texts
    assert "the" in texts


def test_export_plane_count_and_geometry(image, cfg, model, tmp_path):
    question = "what color is the umbrella"
    keys = extract_key_tokens(image, question, cfg, model=model)
    noise = collect_noise_tokens(question, cfg)
    out = tmp_path / "export.hab"
    result = export_bundle(image, question, keys, noise, cfg, out, model=model)
    assert result.n_key == len(keys)
    assert result.n_noise == len(noise)
    assert result.patch_rows * result.patch_cols <= cfg.max_image_tokens

    data = out.read_bytes()
    assert data[:4] == b"HAB1"
    header_len = struct.unpack("<I", data[4:8])[0]
    plane_bytes = result.patch_rows * result.patch_cols * 4
    assert len(data) == 8 + header_len + (len(keys) + len(noise)) * plane_bytes


def test_export_planes_are_sub_distributions(image, cfg, model, tmp_path):
    question = "find the dog near the scooter"
    keys = extract_key_tokens(image, question, cfg, model=model)
    noise = collect_noise_tokens(question, cfg)
    out = tmp_path / "sub.hab"
    result = export_bundle(image, question, keys, noise, cfg, out, model=model)

    data = out.read_bytes()
    header_len = struct.unpack("<I", data[4:8])[0]
    body = data[8 + header_len :]
    n_cells = result.patch_rows * result.patch_cols
    planes = np.frombuffer(body, dtype="<f4").reshape(-1, n_cells)
    assert (planes >= 0).all()
    assert (planes.sum(axis=1) <= 1 + 1e-4).all()


def test_export_bad_token_position(image, cfg, model, tmp_path):
    with pytest.raises(AdapterError):
        export_bundle(
            image,
            "what color is the umbrella",
            [TokenRef("ghost", 999)],
            [],
            cfg,
            tmp_path / "bad.hab",
            model=model,
        )


@pytest.mark.skipif(shutil.which("hide") is None, reason="pipeline CLI not installed")
def test_export_validates_under_pipeline_cli(image, cfg, model, tmp_path):
    # external-interface check: the consumer's own CLI must accept the file
    question = "what color is the umbrella"
    keys = extract_key_tokens(image, question, cfg, model=model)
    noise = collect_noise_tokens(question, cfg)
    out = tmp_path / "wire.hab"
    export_bundle(image, question, keys, noise, cfg, out, model=model)
    proc = subprocess.run(
        ["hide", "purify", str(out), "--sigma", "1", "--out", str(tmp_path / "p.hab")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
