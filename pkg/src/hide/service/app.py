"""HTTP service wrapping the pipeline for long-running multi-client use.

Bundles travel as their binary file format in multipart uploads; box sets
and reports are plain JSON. Binary outputs inside JSON responses are
base64-encoded PNG.
"""

from __future__ import annotations

import base64
import io
import tempfile
from pathlib import Path

import numpy as np
from fastapi import FastAPI, File, Form, HTTPException, UploadFile
from fastapi.responses import JSONResponse, Response
from PIL import Image, UnidentifiedImageError

from .. import __version__
from ..bundle import read_bundle, write_bundle
from ..errors import HideError
from ..layout import compact_image
from ..metrics import match_boxes
from ..pipeline import PipelineConfig, purify_bundle, regions_from_bundle, run_pipeline
from .schemas import (
    BoxesPayload,
    CompactResponse,
    EvalRequest,
    EvalResponse,
    HealthResponse,
    PipelineResponse,
    ProvenanceCell,
)

app = FastAPI(title="hide-pipeline", version=__version__)


@app.exception_handler(HideError)
async def hide_error_handler(request, exc: HideError):
    return JSONResponse(status_code=422, content={"detail": str(exc)})


def _bundle_from_upload(upload: UploadFile):
    data = upload.file.read()
    with tempfile.NamedTemporaryFile(suffix=".hab") as tmp:
        tmp.write(data)
        tmp.flush()
        return read_bundle(tmp.name)


def _image_from_upload(upload: UploadFile) -> np.ndarray:
    try:
        with Image.open(io.BytesIO(upload.file.read())) as img:
            return np.asarray(img.convert("RGB"))
    except UnidentifiedImageError:
        raise HTTPException(status_code=422, detail="upload is not a decodable image")


def _png_base64(pixels: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(pixels.astype(np.uint8), mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _parse_fill(fill: str) -> tuple[int, int, int]:
    parts = fill.split(",")
    if len(parts) != 3:
        raise HTTPException(status_code=422, detail=f"fill expects r,g,b, got {fill!r}")
    return tuple(int(p) for p in parts)


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/v1/purify")
def purify_endpoint(bundle: UploadFile = File(...), sigma: float = Form(3.0)) -> Response:
    parsed = _bundle_from_upload(bundle)
    purified = purify_bundle(parsed, sigma)
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "purified.hab"
        write_bundle(purified, out)
        return Response(content=out.read_bytes(), media_type="application/octet-stream")


@app.post("/v1/regions", response_model=BoxesPayload)
def regions_endpoint(
    bundle: UploadFile = File(...),
    sigma: float = Form(3.0),
    alpha: float = Form(0.7),
    connectivity: int = Form(8),
    min_area: int = Form(1),
    use_noise_prior: bool = Form(True),
) -> BoxesPayload:
    config = PipelineConfig(
        sigma=sigma,
        alpha=alpha,
        connectivity=connectivity,
        min_area=min_area,
        use_noise_prior=use_noise_prior,
    )
    return BoxesPayload.from_boxset(regions_from_bundle(_bundle_from_upload(bundle), config))


def _compact_response(result) -> CompactResponse:
    return CompactResponse(
        width=result.width,
        height=result.height,
        png_base64=_png_base64(result.pixels),
        provenance=[
            ProvenanceCell(src=list(src), dst=list(dst)) for src, dst in result.provenance
        ],
        degenerate=result.degenerate,
    )


@app.post("/v1/compact", response_model=CompactResponse)
def compact_endpoint(
    image: UploadFile = File(...),
    boxes: str = Form(...),
    fill: str = Form("128,128,128"),
) -> CompactResponse:
    payload = BoxesPayload.model_validate_json(boxes)
    pixels = _image_from_upload(image)
    result = compact_image(pixels, payload.to_boxset(), fill=_parse_fill(fill))
    return _compact_response(result)


@app.post("/v1/pipeline", response_model=PipelineResponse)
def pipeline_endpoint(
    image: UploadFile = File(...),
    bundle: UploadFile = File(...),
    sigma: float = Form(3.0),
    alpha: float = Form(0.7),
    connectivity: int = Form(8),
    min_area: int = Form(1),
    fill: str = Form("128,128,128"),
    mode: str = Form("layout_compact"),
    seed: int = Form(0),
) -> PipelineResponse:
    config = PipelineConfig(
        sigma=sigma,
        alpha=alpha,
        connectivity=connectivity,
        min_area=min_area,
        fill=_parse_fill(fill),
        mode=mode,
        seed=seed,
    )
    result = run_pipeline(_image_from_upload(image), _bundle_from_upload(bundle), config)
    return PipelineResponse(
        boxes=BoxesPayload.from_boxset(result.boxes),
        compact=_compact_response(result.compact),
        overlay_png_base64=_png_base64(result.overlay),
    )


@app.post("/v1/eval", response_model=EvalResponse)
def eval_endpoint(request: EvalRequest) -> EvalResponse:
    matches = match_boxes(
        request.pred.to_boxset(), request.gt.to_boxset(), request.iou_threshold
    )
    matched = sum(1 for _, p, _ in matches if p is not None)
    return EvalResponse(
        recall=matched / len(matches),
        mean_iou=sum(v for _, _, v in matches) / len(matches),
        matched=matched,
        gt_boxes=len(matches),
    )
