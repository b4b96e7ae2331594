"""Frame containers shared by the tracking, rendering, and ingestion code."""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator

import numpy as np

from .errors import DimsMismatch
from .geometry import FrameDims

# BT.601 luma weights for R, G, B.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class RGBFrame:
    """One decoded video frame, uint8 RGB, shape (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 3 or p.shape[2] != 3 or p.dtype != np.uint8:
            raise ValueError(f"expected (h, w, 3) uint8 pixels, got {p.shape} {p.dtype}")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def dims(self) -> FrameDims:
        return FrameDims(self.width, self.height)


@dataclass(frozen=True)
class GrayFrame:
    """A luma plane with values in [0, 1], shape (height, width)."""

    pixels: np.ndarray

    def __post_init__(self):
        if self.pixels.ndim != 2:
            raise ValueError(f"expected a 2-d luma plane, got shape {self.pixels.shape}")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def dims(self) -> FrameDims:
        return FrameDims(self.width, self.height)


def rgb_to_gray(frame: RGBFrame) -> GrayFrame:
    """BT.601 luma of an RGB frame, scaled to [0, 1]."""
    p = frame.pixels.astype(np.float32)
    wr, wg, wb = LUMA_WEIGHTS
    luma = (wr * p[..., 0] + wg * p[..., 1] + wb * p[..., 2]) * np.float32(1.0 / 255.0)
    return GrayFrame(luma)


class IdentityCache:
    """Small thread-safe LRU keyed by the identity of a source array.

    Entries hold a reference to the keyed object, which keeps its id() valid
    for the lifetime of the entry. Used to reuse per-frame derived data (luma
    planes, pyramids) without hashing pixel content; a video whose frames
    share one array pays for the derivation once.
    """

    def __init__(self, maxsize: int = 8):
        self._maxsize = maxsize
        self._data: OrderedDict = OrderedDict()
        self._lock = threading.Lock()

    def get(self, obj, key, build: Callable):
        k = (id(obj), key)
        with self._lock:
            if k in self._data:
                self._data.move_to_end(k)
                return self._data[k][1]
        # Built outside the lock; a racing duplicate build is harmless.
        value = build()
        with self._lock:
            self._data[k] = (obj, value)
            self._data.move_to_end(k)
            while len(self._data) > self._maxsize:
                self._data.popitem(last=False)
        return value


class FrameSequence:
    """Decoded frames of one video at native frame rate.

    All frames must share dimensions. Luma planes are derived lazily and
    cached; the cache is safe for concurrent readers.
    """

    def __init__(self, frames: Iterable[RGBFrame], frame_rate: float = 30.0):
        self.frames = list(frames)
        self.frame_rate = float(frame_rate)
        if self.frames:
            d0 = self.frames[0].dims
            for i, f in enumerate(self.frames):
                if f.dims != d0:
                    raise DimsMismatch(
                        f"frame {i} is {f.width}x{f.height}, expected {d0.width}x{d0.height}"
                    )
        self._gray_cache = IdentityCache(maxsize=8)

    @property
    def dims(self) -> FrameDims:
        if not self.frames:
            raise ValueError("empty frame sequence has no dims")
        return self.frames[0].dims

    def gray(self, index: int) -> GrayFrame:
        """Luma plane of frame ``index`` (cached)."""
        frame = self.frames[index]
        return self._gray_cache.get(frame.pixels, "gray", lambda: rgb_to_gray(frame))

    def __len__(self) -> int:
        return len(self.frames)

    def __getitem__(self, index: int) -> RGBFrame:
        return self.frames[index]

    def __iter__(self) -> Iterator[RGBFrame]:
        return iter(self.frames)
