"""Portrait rendering: crop extraction and Lanczos resampling.

Crops are realized from continuous rectangles by rounding to whole pixels
and shrinking at most one pixel per axis to even dimensions (friendly to
4:2:0 encoders). Resampling is separable Lanczos with 3 lobes, weights
renormalized per output pixel and edges clamped.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import CropflowError, DimsMismatch, InvalidBox
from .frames import FrameSequence, RGBFrame
from .geometry import PORTRAIT_ASPECT, CropBox, RectBox, to_rect

LANCZOS_LOBES = 3


def _kernel(x: np.ndarray) -> np.ndarray:
    """Lanczos-3 kernel: sinc(x) * sinc(x/3) inside |x| < 3, else 0."""
    return np.where(np.abs(x) < LANCZOS_LOBES, np.sinc(x) * np.sinc(x / LANCZOS_LOBES), 0.0)


def _axis_weights(in_len: int, out_len: int) -> tuple[np.ndarray, np.ndarray]:
    """Tap indices (clamped to the edge) and normalized weights for one axis."""
    scale = in_len / out_len
    src = (np.arange(out_len, dtype=np.float64) + 0.5) * scale - 0.5
    base = np.floor(src).astype(np.int64)
    offsets = np.arange(-(LANCZOS_LOBES - 1), LANCZOS_LOBES + 1)  # 6 taps
    idx = base[:, None] + offsets[None, :]
    w = _kernel(idx - src[:, None])
    w = w / w.sum(axis=1, keepdims=True)
    return np.clip(idx, 0, in_len - 1), w


def _resample_axis0(img: np.ndarray, idx: np.ndarray, w: np.ndarray) -> np.ndarray:
    out = np.zeros((idx.shape[0],) + img.shape[1:], dtype=np.float64)
    for t in range(idx.shape[1]):
        out += w[:, t].reshape((-1,) + (1,) * (img.ndim - 1)) * img[idx[:, t]]
    return out


def lanczos_resize(frame: RGBFrame, out_width: int, out_height: int) -> RGBFrame:
    """Resize a frame with separable Lanczos-3 resampling.

    Per-output-pixel weight renormalization makes a same-size resize the
    identity and keeps constant images constant. Output values are rounded
    and clipped to [0, 255].
    """
    if out_width < 1 or out_height < 1:
        raise ValueError(f"output dims must be positive, got {out_width}x{out_height}")
    img = frame.pixels.astype(np.float64)
    iy, wy = _axis_weights(frame.height, out_height)
    ix, wx = _axis_weights(frame.width, out_width)
    tmp = _resample_axis0(img, iy, wy)
    tmp = _resample_axis0(tmp.transpose(1, 0, 2), ix, wx).transpose(1, 0, 2)
    out = np.clip(np.rint(tmp), 0.0, 255.0).astype(np.uint8)
    return RGBFrame(out)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def extract_crop(frame: RGBFrame, rect: RectBox) -> RGBFrame:
    """Cut the rounded rectangle out of a frame.

    Edges are rounded to the nearest integer; each axis is then shrunk by at
    most one pixel to an even size. A rectangle that rounds to nothing
    raises InvalidBox.
    """
    x0 = max(_round_half_up(rect.x0), 0)
    y0 = max(_round_half_up(rect.y0), 0)
    x1 = min(_round_half_up(rect.x1), frame.width)
    y1 = min(_round_half_up(rect.y1), frame.height)
    if (x1 - x0) % 2 == 1:
        x1 -= 1
    if (y1 - y0) % 2 == 1:
        y1 -= 1
    if x1 - x0 <= 0 or y1 - y0 <= 0:
        raise InvalidBox(
            f"rectangle ({rect.x0:.3f}, {rect.y0:.3f}, {rect.x1:.3f}, {rect.y1:.3f}) "
            "rounds to an empty crop"
        )
    return RGBFrame(frame.pixels[y0:y1, x0:x1].copy())


def portrait_output_width(out_height: int) -> int:
    """Even output width closest to out_height * 9/16."""
    w = _round_half_up(out_height * PORTRAIT_ASPECT)
    return w - 1 if w % 2 == 1 else w


def render_portrait(frames: FrameSequence, track, out_height: int = 1080) -> FrameSequence:
    """Render a portrait video by cropping and resizing every frame.

    ``track`` is a DenseTrack or any sequence of CropBox with one box per
    frame. Output dimensions are constant across the video. Failures carry
    the frame index.
    """
    boxes = getattr(track, "boxes", track)
    if len(boxes) != len(frames):
        raise DimsMismatch(f"track has {len(boxes)} boxes for {len(frames)} frames")
    if out_height < 16:
        raise ValueError(f"output height must be at least 16, got {out_height}")
    out_w = portrait_output_width(out_height)
    dims = frames.dims
    rendered = []
    for i, (frame, box) in enumerate(zip(frames, boxes)):
        try:
            rect = to_rect(box, dims)
            crop = extract_crop(frame, rect)
            rendered.append(lanczos_resize(crop, out_w, out_height))
        except CropflowError as e:
            raise type(e)(f"frame {i}: {e}") from e
    return FrameSequence(rendered, frames.frame_rate)


def render_preview(frame: RGBFrame, box: CropBox, out_height: int = 1080) -> RGBFrame:
    """Portrait preview of one box on one frame."""
    rect = to_rect(box, frame.dims)
    return lanczos_resize(extract_crop(frame, rect), portrait_output_width(out_height), out_height)
