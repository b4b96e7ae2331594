"""Crop-box geometry: the (cx, cy, r) annotation model and box measures.

A crop annotation stores only its center and a size ratio ``r`` (box height
divided by frame height). The realized rectangle is always 9:16 portrait, so
its width is implied by ``r`` and the frame height. Coordinates are
continuous pixels; rounding to integer pixels happens only when frames are
actually cropped (render module).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidBox

# Width over height of every realized crop rectangle.
PORTRAIT_ASPECT = 9.0 / 16.0


@dataclass(frozen=True)
class FrameDims:
    """Pixel dimensions of a video frame."""

    width: int
    height: int

    def __post_init__(self):
        if self.width < 16 or self.height < 16:
            raise ValueError(f"frame dims must be at least 16x16, got {self.width}x{self.height}")


@dataclass(frozen=True)
class CropBox:
    """A portrait crop annotation: center plus height ratio.

    ``r`` is the realized box height divided by the frame height and must lie
    in (0, 1]. The center may sit anywhere, including outside the frame; it
    is pulled inside when the rectangle is realized.
    """

    cx: float
    cy: float
    r: float

    def __post_init__(self):
        if not (math.isfinite(self.cx) and math.isfinite(self.cy)):
            raise InvalidBox(f"crop center must be finite, got ({self.cx}, {self.cy})")
        if not (0.0 < self.r <= 1.0):
            raise InvalidBox(f"size ratio must be in (0, 1], got {self.r}")


@dataclass(frozen=True)
class RectBox:
    """An axis-aligned rectangle in continuous pixel coordinates."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise InvalidBox(f"degenerate rectangle ({self.x0}, {self.y0}, {self.x1}, {self.y1})")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))


def to_rect(box: CropBox, dims: FrameDims) -> RectBox:
    """Realize a crop box as a 9:16 rectangle clamped inside the frame.

    The rectangle keeps its exact size; if it overhangs an edge it is
    translated back inside, never scaled. Raises InvalidBox when the implied
    width cannot fit in the frame at all.
    """
    h = box.r * dims.height
    w = h * PORTRAIT_ASPECT
    if w > dims.width + 1e-9:
        raise InvalidBox(
            f"box of ratio {box.r} needs width {w:.3f}, frame is only {dims.width} wide"
        )
    x0 = box.cx - 0.5 * w
    if x0 < 0.0:
        x0, x1 = 0.0, w
    elif x0 + w > dims.width:
        x0, x1 = dims.width - w, float(dims.width)
    else:
        x1 = x0 + w
    y0 = box.cy - 0.5 * h
    if y0 < 0.0:
        y0, y1 = 0.0, h
    elif y0 + h > dims.height:
        y0, y1 = dims.height - h, float(dims.height)
    else:
        y1 = y0 + h
    return RectBox(x0, y0, x1, y1)


def iou(a: RectBox, b: RectBox) -> float:
    """Intersection over union of two rectangles, in [0, 1]."""
    ix = min(a.x1, b.x1) - max(a.x0, b.x0)
    iy = min(a.y1, b.y1) - max(a.y0, b.y0)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def center_distance(a: CropBox, b: CropBox) -> float:
    """Euclidean distance between two annotation centers, in pixels."""
    return math.hypot(a.cx - b.cx, a.cy - b.cy)


def normalized_area(box: CropBox, dims: FrameDims) -> float:
    """Area of the realized rectangle divided by the frame area."""
    rect = to_rect(box, dims)
    return rect.area / (dims.width * dims.height)
