"""Pixel-space bounding boxes and their JSON serialization.

All rectangles are half-open: a box (x1, y1, x2, y2) covers pixel columns
x1..x2-1 and rows y1..y2-1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import FormatError, ValidationError


@dataclass(frozen=True)
class BoundingBox:
    x1: int
    y1: int
    x2: int
    y2: int
    token: str = ""

    def __post_init__(self):
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValidationError(f"degenerate box {(self.x1, self.y1, self.x2, self.y2)}")
        if self.x1 < 0 or self.y1 < 0:
            raise ValidationError(f"box {(self.x1, self.y1, self.x2, self.y2)} has negative origin")

    @property
    def rect(self) -> tuple[int, int, int, int]:
        return (self.x1, self.y1, self.x2, self.y2)

    def area(self) -> int:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def center(self) -> tuple[float, float]:
        return ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)


@dataclass
class BoxSet:
    """Boxes grounded against a specific image geometry."""

    image_width: int
    image_height: int
    boxes: list[BoundingBox] = field(default_factory=list)

    def __post_init__(self):
        for b in self.boxes:
            if b.x2 > self.image_width or b.y2 > self.image_height:
                raise ValidationError(
                    f"box {b.rect} exceeds image bounds "
                    f"{self.image_width}x{self.image_height}"
                )

    def __len__(self) -> int:
        return len(self.boxes)

    def __iter__(self):
        return iter(self.boxes)


def write_boxes(boxes: BoxSet, path) -> None:
    payload = {
        "image_width": boxes.image_width,
        "image_height": boxes.image_height,
        "boxes": [
            {"x1": b.x1, "y1": b.y1, "x2": b.x2, "y2": b.y2, "token": b.token}
            for b in boxes.boxes
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, separators=(",", ":"))
        fh.write("\n")


def boxes_from_payload(payload: dict) -> BoxSet:
    """Build a BoxSet from the parsed JSON schema, validating bounds."""
    try:
        width = int(payload["image_width"])
        height = int(payload["image_height"])
        entries = payload["boxes"]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"boxes JSON missing required keys: {exc}") from exc
    parsed = []
    for entry in entries:
        try:
            parsed.append(
                BoundingBox(
                    x1=int(entry["x1"]),
                    y1=int(entry["y1"]),
                    x2=int(entry["x2"]),
                    y2=int(entry["y2"]),
                    token=str(entry.get("token", "")),
                )
            )
        except (KeyError, TypeError) as exc:
            raise FormatError(f"malformed box entry {entry!r}") from exc
    return BoxSet(image_width=width, image_height=height, boxes=parsed)


def read_boxes(path) -> BoxSet:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: malformed boxes JSON: {exc}") from exc
    try:
        return boxes_from_payload(payload)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from exc
