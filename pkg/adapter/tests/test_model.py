import numpy as np
import pytest
import torch

from hide_adapter.model import ToyVLM, preprocess_image


def toy_input(model, rows=6, cols=8, words=10):
    rng = np.random.default_rng(17)
    image = rng.integers(0, 255, (rows * model.patch_px, cols * model.patch_px, 3), dtype=np.uint8)
    pre = preprocess_image(image, model.patch_px, max_image_tokens=rows * cols)
    assert (pre.patch_rows, pre.patch_cols) == (rows, cols)
    return pre, [f"word{i}" for i in range(words)]


def test_weights_deterministic():
    a = ToyVLM(seed=5)
    b = ToyVLM(seed=5)
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert torch.equal(pa, pb)


def test_preprocess_caps_tokens():
    image = np.zeros((320, 320, 3), dtype=np.uint8)
    pre = preprocess_image(image, patch_px=16, max_image_tokens=100)
    assert pre.patch_rows * pre.patch_cols <= 100
    assert pre.features.shape == (pre.patch_rows * pre.patch_cols, 3)


def test_preprocess_small_image_gives_1x1_floor():
    image = np.zeros((4, 4, 3), dtype=np.uint8)
    pre = preprocess_image(image, patch_px=16, max_image_tokens=64)
    assert pre.patch_rows >= 1 and pre.patch_cols >= 1


def test_streamed_rows_match_full_attention():
    model = ToyVLM(block_size=16)  # force multiple key blocks
    pre, words = toy_input(model)
    x = model.embed(pre, words)
    captured = model.forward_capture(x, offload=True)
    n_img = pre.patch_rows * pre.patch_cols
    indices = [n_img, n_img + 4, x.shape[0] - 1]
    for layer in range(model.n_layers):
        full = model.forward_full(x)[layer]
        got = model.attention_rows(captured, layer, indices)
        want = full[:, indices, :].transpose(0, 1)
        assert (got - want).abs().max().item() < 1e-4


def test_rows_are_causal_distributions():
    model = ToyVLM()
    pre, words = toy_input(model)
    x = model.embed(pre, words)
    captured = model.forward_capture(x, offload=False)
    n_img = pre.patch_rows * pre.patch_cols
    idx = n_img + 2
    rows = model.attention_rows(captured, 1, [idx])
    sums = rows.sum(dim=-1)
    assert torch.allclose(sums, torch.ones_like(sums), atol=1e-5)
    assert (rows[0, :, idx + 1 :] == 0).all()


def test_offload_matches_resident():
    model = ToyVLM()
    pre, words = toy_input(model, rows=4, cols=4, words=6)
    x = model.embed(pre, words)
    on = model.forward_capture(x, offload=True)
    off = model.forward_capture(x, offload=False)
    for a, b in zip(on, off):
        assert torch.equal(a, b)


def test_layer_and_token_bounds():
    model = ToyVLM()
    pre, words = toy_input(model, rows=2, cols=2, words=3)
    x = model.embed(pre, words)
    captured = model.forward_capture(x)
    with pytest.raises(IndexError):
        model.attention_rows(captured, model.n_layers, [0])
    with pytest.raises(IndexError):
        model.attention_rows(captured, 0, [x.shape[0]])
