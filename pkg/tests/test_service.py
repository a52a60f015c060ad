import base64
import io

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from hide.bundle import write_bundle
from hide.service.app import app
from hide.synth import SynthSpec, generate

client = TestClient(app)


@pytest.fixture(scope="module")
def sample(tmp_path_factory):
    spec = SynthSpec(seed=77, n_samples=1, n_tokens=2, sink_amplitude=0.0, noise_std=0.0)
    s = generate(spec)[0]
    tmp = tmp_path_factory.mktemp("svc")
    bundle_path = tmp / "bundle.hab"
    write_bundle(s.bundle, bundle_path)
    buf = io.BytesIO()
    Image.fromarray(s.image, mode="RGB").save(buf, format="PNG")
    return {"sample": s, "bundle_bytes": bundle_path.read_bytes(), "png": buf.getvalue()}


def decode_png(b64: str) -> np.ndarray:
    with Image.open(io.BytesIO(base64.b64decode(b64))) as img:
        return np.asarray(img.convert("RGB"))


def test_health():
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json()["status"] == "ok"


def test_purify_returns_valid_bundle(sample, tmp_path):
    resp = client.post(
        "/v1/purify",
        files={"bundle": ("bundle.hab", sample["bundle_bytes"])},
        data={"sigma": "1.0"},
    )
    assert resp.status_code == 200
    out = tmp_path / "purified.hab"
    out.write_bytes(resp.content)
    from hide.bundle import read_bundle

    purified = read_bundle(out)
    assert len(purified.noise_maps) == 0


def test_purify_rejects_garbage():
    resp = client.post(
        "/v1/purify",
        files={"bundle": ("bundle.hab", b"XXXX" + b"\x00" * 16)},
        data={"sigma": "1.0"},
    )
    assert resp.status_code == 422


def test_regions_endpoint(sample):
    resp = client.post(
        "/v1/regions",
        files={"bundle": ("bundle.hab", sample["bundle_bytes"])},
        data={"sigma": "0.01", "alpha": "0.5"},
    )
    assert resp.status_code == 200
    payload = resp.json()
    gt = sample["sample"].gt_boxes
    assert payload["image_width"] == gt.image_width
    got = [(b["x1"], b["y1"], b["x2"], b["y2"]) for b in payload["boxes"]]
    assert got == [b.rect for b in gt]


def test_compact_endpoint(sample):
    gt = sample["sample"].gt_boxes
    boxes_json = {
        "image_width": gt.image_width,
        "image_height": gt.image_height,
        "boxes": [
            {"x1": b.x1, "y1": b.y1, "x2": b.x2, "y2": b.y2, "token": b.token}
            for b in gt
        ],
    }
    import json

    resp = client.post(
        "/v1/compact",
        files={"image": ("image.png", sample["png"])},
        data={"boxes": json.dumps(boxes_json), "fill": "128,128,128"},
    )
    assert resp.status_code == 200
    body = resp.json()
    assert not body["degenerate"]
    pixels = decode_png(body["png_base64"])
    assert pixels.shape == (body["height"], body["width"], 3)
    assert body["provenance"]


def test_pipeline_endpoint(sample):
    resp = client.post(
        "/v1/pipeline",
        files={
            "image": ("image.png", sample["png"]),
            "bundle": ("bundle.hab", sample["bundle_bytes"]),
        },
        data={"sigma": "0.01", "alpha": "0.5"},
    )
    assert resp.status_code == 200
    body = resp.json()
    gt = sample["sample"].gt_boxes
    got = [(b["x1"], b["y1"], b["x2"], b["y2"]) for b in body["boxes"]["boxes"]]
    assert got == [b.rect for b in gt]
    overlay = decode_png(body["overlay_png_base64"])
    assert overlay.shape == sample["sample"].image.shape


def test_eval_endpoint():
    boxes = {
        "image_width": 20,
        "image_height": 20,
        "boxes": [{"x1": 0, "y1": 0, "x2": 5, "y2": 5, "token": "t"}],
    }
    resp = client.post("/v1/eval", json={"pred": boxes, "gt": boxes, "iou_threshold": 0.5})
    assert resp.status_code == 200
    assert resp.json()["recall"] == 1.0


def test_eval_rejects_empty_gt():
    pred = {"image_width": 20, "image_height": 20, "boxes": []}
    resp = client.post("/v1/eval", json={"pred": pred, "gt": pred, "iou_threshold": 0.5})
    assert resp.status_code == 422
