"""Shared builders for synthetic fixtures used across the test suite."""

from __future__ import annotations

import math

import numpy as np
import pytest

from cropflow import (
    Annotation,
    AnnotationTrack,
    CropBox,
    FrameDims,
    FrameSequence,
    RGBFrame,
)


def block_texture(rng: np.random.Generator, width: int, height: int, block: int = 4) -> np.ndarray:
    """Random blocky RGB texture; rich in corners, friendly to point tracking."""
    coarse = rng.integers(0, 256, (height // block, width // block, 3), dtype=np.uint8)
    return np.kron(coarse, np.ones((block, block, 1), dtype=np.uint8))


def textured_frame(seed: int, width: int, height: int, block: int = 4) -> RGBFrame:
    rng = np.random.default_rng(seed)
    return RGBFrame(block_texture(rng, width, height, block))


def static_video(frame: RGBFrame, count: int, rate: float = 30.0) -> FrameSequence:
    """A video repeating one frame object; caches make this cheap to track."""
    return FrameSequence([frame] * count, rate)


def solid_frame(width: int, height: int, color=(128, 128, 128)) -> RGBFrame:
    px = np.empty((height, width, 3), dtype=np.uint8)
    px[:] = np.asarray(color, dtype=np.uint8)
    return RGBFrame(px)


def sine_noise_track(
    seed: int,
    dims: FrameDims,
    count: int = 30,
    stride: int = 6,
    amp: float = 80.0,
    period: float = 24.0,
    noise: float = 60.0,
    r: float = 0.5,
    annotator: str = "synth",
    video_id: str = "v01",
) -> AnnotationTrack:
    """Smooth sinusoidal center trajectory plus iid Gaussian center noise."""
    rng = np.random.default_rng(seed)
    anns = []
    for k in range(1, count + 1):
        t = k - 1
        cx = dims.width / 2 + amp * math.sin(2 * math.pi * t / period)
        cy = dims.height / 2 + 0.6 * amp * math.cos(2 * math.pi * t / period)
        cx = float(np.clip(cx + rng.normal(0.0, noise), 40, dims.width - 40))
        cy = float(np.clip(cy + rng.normal(0.0, noise), 40, dims.height - 40))
        anns.append(
            Annotation(
                frame_index=(k - 1) * stride,
                box=CropBox(cx, cy, r),
                annotator_id=annotator,
                box_ordinal=k,
            )
        )
    return AnnotationTrack(video_id, dims, tuple(anns), stride=stride)


def simple_track(
    centers,
    dims: FrameDims = FrameDims(1920, 1080),
    stride: int = 1,
    r: float = 0.5,
    video_id: str = "vid",
    annotator: str = "a1",
) -> AnnotationTrack:
    """Track from a list of (cx, cy) pairs, one annotation per stride frames."""
    anns = tuple(
        Annotation(
            frame_index=(k - 1) * stride,
            box=CropBox(cx, cy, r),
            annotator_id=annotator,
            box_ordinal=k,
        )
        for k, (cx, cy) in enumerate(centers, start=1)
    )
    return AnnotationTrack(video_id, dims, anns, stride=stride)


@pytest.fixture(scope="session")
def hd_frame() -> RGBFrame:
    """One 1920x1080 textured frame shared by the heavier tracking tests."""
    return textured_frame(7, 1920, 1080)
