"""Request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field

from ..boxes import BoundingBox, BoxSet


class BoxModel(BaseModel):
    x1: int
    y1: int
    x2: int
    y2: int
    token: str = ""


class BoxesPayload(BaseModel):
    image_width: int
    image_height: int
    boxes: list[BoxModel] = Field(default_factory=list)

    @classmethod
    def from_boxset(cls, boxes: BoxSet) -> "BoxesPayload":
        return cls(
            image_width=boxes.image_width,
            image_height=boxes.image_height,
            boxes=[
                BoxModel(x1=b.x1, y1=b.y1, x2=b.x2, y2=b.y2, token=b.token)
                for b in boxes
            ],
        )

    def to_boxset(self) -> BoxSet:
        return BoxSet(
            image_width=self.image_width,
            image_height=self.image_height,
            boxes=[
                BoundingBox(x1=b.x1, y1=b.y1, x2=b.x2, y2=b.y2, token=b.token)
                for b in self.boxes
            ],
        )


class ProvenanceCell(BaseModel):
    src: list[int]
    dst: list[int]


class CompactResponse(BaseModel):
    width: int
    height: int
    png_base64: str
    provenance: list[ProvenanceCell]
    degenerate: bool


class PipelineResponse(BaseModel):
    boxes: BoxesPayload
    compact: CompactResponse
    overlay_png_base64: str


class EvalRequest(BaseModel):
    pred: BoxesPayload
    gt: BoxesPayload
    iou_threshold: float = 0.5


class EvalResponse(BaseModel):
    recall: float
    mean_iou: float
    matched: int
    gt_boxes: int


class HealthResponse(BaseModel):
    status: str
    version: str
