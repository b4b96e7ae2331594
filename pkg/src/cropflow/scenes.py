"""Scene cut detection and scene membership queries.

A cut at index i means frame i starts a new scene. Detection scores each
consecutive frame pair by the mean absolute difference of their HSV
channels (all three expressed on a [0, 255] scale) averaged over the three
channels; a score above the threshold opens a new scene, subject to a
minimum scene length between accepted cuts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frames import FrameSequence, RGBFrame

DEFAULT_THRESHOLD = 27.0
DEFAULT_MIN_SCENE_LEN = 15


@dataclass(frozen=True)
class SceneBoundaryList:
    """Sorted cut indices for one video of ``frame_count`` frames."""

    cut_indices: tuple[int, ...]
    frame_count: int

    def __post_init__(self):
        cuts = tuple(int(c) for c in self.cut_indices)
        object.__setattr__(self, "cut_indices", cuts)
        prev = 0
        for c in cuts:
            if not (0 < c < self.frame_count):
                raise ValueError(f"cut index {c} outside (0, {self.frame_count})")
            if c <= prev:
                raise ValueError(f"cut indices must be strictly increasing, got {cuts}")
            prev = c


def hsv_channels(frame: RGBFrame) -> np.ndarray:
    """HSV planes of a frame, each scaled to [0, 255].

    Hue is mapped so that a full turn (360 degrees) spans 255; differences
    are taken as plain absolute values, without wraparound.
    """
    p = frame.pixels.astype(np.float64)
    r, g, b = p[..., 0], p[..., 1], p[..., 2]
    v = np.max(p, axis=-1)
    c = v - np.min(p, axis=-1)
    s = np.where(v > 0.0, c / np.maximum(v, 1e-12) * 255.0, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        safe_c = np.maximum(c, 1e-12)
        hue = np.where(
            v == r,
            (g - b) / safe_c % 6.0,
            np.where(v == g, (b - r) / safe_c + 2.0, (r - g) / safe_c + 4.0),
        )
    hue = np.where(c > 0.0, hue * 60.0, 0.0)  # degrees in [0, 360)
    h = hue * (255.0 / 360.0)
    return np.stack([h, s, v], axis=0)


def frame_pair_score(a: RGBFrame, b: RGBFrame) -> float:
    """Mean absolute HSV difference between two frames, averaged over channels."""
    ha = hsv_channels(a)
    hb = hsv_channels(b)
    return float(np.abs(ha - hb).mean())


def detect_scenes(
    frames: FrameSequence,
    threshold: float = DEFAULT_THRESHOLD,
    min_scene_len: int = DEFAULT_MIN_SCENE_LEN,
) -> SceneBoundaryList:
    """Detect hard cuts in a frame sequence.

    A cut closer than ``min_scene_len`` frames to the previously accepted
    cut is suppressed; the first cut of a video is never suppressed.
    """
    if len(frames) < 1:
        raise ValueError("scene detection needs at least one frame")
    cuts: list[int] = []
    prev = hsv_channels(frames[0])
    for i in range(1, len(frames)):
        cur = hsv_channels(frames[i])
        score = float(np.abs(cur - prev).mean())
        prev = cur
        if score > threshold:
            if not cuts or i - cuts[-1] >= min_scene_len:
                cuts.append(i)
    return SceneBoundaryList(tuple(cuts), len(frames))


def same_scene(boundaries: SceneBoundaryList, i: int, j: int) -> bool:
    """Whether frames i and j belong to the same scene.

    True iff no cut falls in (min(i, j), max(i, j)]. Raises IndexError for
    out-of-range frame indices.
    """
    n = boundaries.frame_count
    for idx in (i, j):
        if not (0 <= idx < n):
            raise IndexError(f"frame index {idx} outside 0..{n - 1}")
    lo, hi = (i, j) if i <= j else (j, i)
    return not any(lo < c <= hi for c in boundaries.cut_indices)
