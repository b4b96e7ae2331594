"""Temporal smoothing of sparse crop annotations.

Each annotation in a track is refined by a Hamming-weighted average of its
neighbors inside a fixed ordinal window. Neighbor centers are first carried
to the anchor's frame with the point tracker (hop by hop through every
native frame in between), then gated: samples outside a radius around the
anchor, across a scene cut, or with a failed track contribute weight zero.
The anchor itself always participates with weight one, so every output is
well defined. All anchors are smoothed from the original annotations; no
output feeds back into another anchor's window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import numpy as np

from .errors import DimsMismatch, EmptyTrack, ValidationError
from .frames import FrameSequence
from .geometry import PORTRAIT_ASPECT, CropBox, FrameDims
from .motion import PyramidCache, TrackConfig, _lk_batch
from .scenes import SceneBoundaryList, same_scene

DEFAULT_WINDOW = 15
DEFAULT_STRIDE = 6

# Exclusion reasons carried on weighted samples.
REASON_NONE = "none"
REASON_OUT_OF_RADIUS = "out-of-radius"
REASON_SCENE_CUT = "scene-cut"
REASON_TRACK_FAILURE = "track-failure"


@dataclass(frozen=True)
class Annotation:
    """One subjective crop annotation on one video frame.

    ``box_ordinal`` counts annotations from 1; for regularly sampled tracks
    ``frame_index`` equals (box_ordinal - 1) * stride.
    """

    frame_index: int
    box: CropBox
    annotator_id: str
    box_ordinal: int
    attempt_count: int | None = None

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValidationError(f"frame_index must be >= 0, got {self.frame_index}")
        if self.box_ordinal < 1:
            raise ValidationError(f"box_ordinal must be >= 1, got {self.box_ordinal}")


@dataclass(frozen=True)
class AnnotationTrack:
    """All annotations of one video, ordered by ordinal.

    Ordinals run 1..N without gaps. ``stride`` > 0 declares a regular
    sampling grid and ties every frame_index to its ordinal; stride 0 marks
    an irregular track with no such relation.
    """

    video_id: str
    dims: FrameDims
    annotations: tuple[Annotation, ...]
    stride: int = DEFAULT_STRIDE

    def __post_init__(self):
        anns = tuple(self.annotations)
        object.__setattr__(self, "annotations", anns)
        if not anns:
            raise ValidationError(f"video {self.video_id}: track has no annotations")
        for pos, a in enumerate(anns, start=1):
            if a.box_ordinal != pos:
                raise ValidationError(
                    f"video {self.video_id}: ordinals must run 1..{len(anns)} without "
                    f"gaps, found {a.box_ordinal} at position {pos}"
                )
        if self.stride > 0:
            for a in anns:
                expect = (a.box_ordinal - 1) * self.stride
                if a.frame_index != expect:
                    raise ValidationError(
                        f"video {self.video_id}: ordinal {a.box_ordinal} has frame_index "
                        f"{a.frame_index}, expected {expect} at stride {self.stride}"
                    )

    def __len__(self) -> int:
        return len(self.annotations)

    def by_ordinal(self) -> dict[int, Annotation]:
        return {a.box_ordinal: a for a in self.annotations}


@dataclass(frozen=True)
class FilterConfig:
    """Configuration of the temporal smoothing filter."""

    window_size: int = DEFAULT_WINDOW
    weight_floor: float = 0.0
    radius_factor: float = 0.5
    scene_gating: bool = True
    motion: TrackConfig = field(default_factory=TrackConfig)

    def __post_init__(self):
        if self.window_size < 1 or self.window_size % 2 == 0:
            raise ValueError(f"window_size must be a positive odd count, got {self.window_size}")
        if self.radius_factor <= 0.0:
            raise ValueError("radius_factor must be positive")

    @property
    def half_window(self) -> int:
        return self.window_size // 2


@dataclass(frozen=True)
class WeightedSample:
    """One candidate contribution to a smoothed annotation."""

    source_ordinal: int
    weight: float
    warped_center: tuple[float, float]
    size_ratio: float
    excluded: bool = False
    reason: str = REASON_NONE


def hamming_weight(i: int, k: int, window_size: int = DEFAULT_WINDOW) -> float:
    """Hamming window weight of neighbor ordinal i relative to anchor k.

    Defined for |i - k| <= floor(window_size / 2); the anchor itself gets
    weight exactly 1.
    """
    if window_size < 1 or window_size % 2 == 0:
        raise ValueError(f"window_size must be a positive odd count, got {window_size}")
    half = window_size // 2
    if abs(i - k) > half:
        raise ValueError(f"ordinal {i} outside the window of {k} (half-width {half})")
    return 0.54 + 0.46 * math.cos(2.0 * math.pi * (i - k) / window_size)


def _window_ordinals(ordinals: Iterable[int], k: int, half: int) -> list[int]:
    return [i for i in ordinals if abs(i - k) <= half]


class _WarpTable:
    """Warped neighbor centers for a set of anchors.

    For every annotation the tracker carries its center forward and backward
    through the native frames, recording the position each time it passes
    another annotation's frame inside the window. Chaining is Markovian, so
    one trajectory per annotation and direction serves every anchor it can
    reach; points crossing the same frame pair are tracked as one batch.
    """

    def __init__(self):
        self.entries: dict[tuple[int, int], tuple[tuple[float, float], bool]] = {}

    def get(self, i: int, k: int) -> tuple[tuple[float, float], bool]:
        return self.entries[(i, k)]


def _sweep(
    track: AnnotationTrack,
    frames: FrameSequence,
    targets: dict[int, list[int]],
    direction: int,
    cfg: FilterConfig,
    cache: PyramidCache,
    table: _WarpTable,
) -> None:
    """Advance annotation centers through native frames in one direction.

    ``targets`` maps each source ordinal to the anchor ordinals it must
    reach, all on the ``direction`` side of the source.
    """
    by_ordinal = track.by_ordinal()
    frame_of = {i: by_ordinal[i].frame_index for i in by_ordinal}
    # Remaining anchor frames per active source, sorted along the direction.
    pending: dict[int, list[int]] = {}
    starts: dict[int, list[int]] = {}
    for i, ks in targets.items():
        if not ks:
            continue
        ordered = sorted(ks, key=lambda k: direction * frame_of[k])
        pending[i] = ordered
        starts.setdefault(frame_of[i], []).append(i)
    if not pending:
        return

    first = min(frame_of[i] for i in pending) if direction > 0 else max(frame_of[i] for i in pending)
    last_needed = (
        max(frame_of[ks[-1]] for ks in pending.values())
        if direction > 0
        else min(frame_of[ks[-1]] for ks in pending.values())
    )

    active: dict[int, tuple[float, float]] = {}
    t = first
    while t != last_needed:
        for i in starts.get(t, ()):
            box = by_ordinal[i].box
            active[i] = (box.cx, box.cy)
        if active:
            ids = sorted(active)
            pts = np.array([active[i] for i in ids], dtype=np.float64)
            src = cache.get(frames.gray(t), cfg.motion)
            dst = cache.get(frames.gray(t + direction), cfg.motion)
            out, ok, _residual = _lk_batch(src, dst, pts, cfg.motion, want_residual=False)
            arrived = t + direction
            for row, i in enumerate(ids):
                if not ok[row]:
                    # Everything further along this chain fails too.
                    for k in pending[i]:
                        table.entries[(i, k)] = (active[i], False)
                    pending[i] = []
                    del active[i]
                    continue
                point = (float(out[row, 0]), float(out[row, 1]))
                active[i] = point
                while pending[i] and frame_of[pending[i][0]] == arrived:
                    k = pending[i].pop(0)
                    table.entries[(i, k)] = (point, True)
                if not pending[i]:
                    del active[i]
        t += direction


def _build_warp_table(
    track: AnnotationTrack,
    frames: FrameSequence,
    anchors: Iterable[int],
    cfg: FilterConfig,
    boundaries: SceneBoundaryList | None,
    cache: PyramidCache,
) -> _WarpTable:
    by_ordinal = track.by_ordinal()
    ordinals = sorted(by_ordinal)
    anchor_set = set(anchors)
    half = cfg.half_window
    table = _WarpTable()
    forward: dict[int, list[int]] = {i: [] for i in ordinals}
    backward: dict[int, list[int]] = {i: [] for i in ordinals}
    for k in anchor_set:
        fk = by_ordinal[k].frame_index
        for i in _window_ordinals(ordinals, k, half):
            if i == k:
                continue
            fi = by_ordinal[i].frame_index
            if cfg.scene_gating and boundaries is not None and not same_scene(boundaries, fi, fk):
                continue  # gated before any tracking happens
            if fi < fk:
                forward[i].append(k)
            elif fi > fk:
                backward[i].append(k)
            else:
                # Distinct ordinals sharing a frame: the center carries over as is.
                table.entries[(i, k)] = ((by_ordinal[i].box.cx, by_ordinal[i].box.cy), True)
    _sweep(track, frames, forward, +1, cfg, cache, table)
    _sweep(track, frames, backward, -1, cfg, cache, table)
    return table


def _samples_for_anchor(
    track: AnnotationTrack,
    k: int,
    cfg: FilterConfig,
    boundaries: SceneBoundaryList | None,
    table: _WarpTable,
) -> list[WeightedSample]:
    by_ordinal = track.by_ordinal()
    anchor = by_ordinal[k]
    samples: list[WeightedSample] = []
    for i in _window_ordinals(sorted(by_ordinal), k, cfg.half_window):
        ann = by_ordinal[i]
        if i == k:
            samples.append(
                WeightedSample(
                    source_ordinal=k,
                    weight=1.0,
                    warped_center=(anchor.box.cx, anchor.box.cy),
                    size_ratio=anchor.box.r,
                )
            )
            continue
        w = hamming_weight(i, k, cfg.window_size)
        if w < cfg.weight_floor:
            continue  # dropped entirely, not excluded
        if (
            cfg.scene_gating
            and boundaries is not None
            and not same_scene(boundaries, ann.frame_index, anchor.frame_index)
        ):
            samples.append(
                WeightedSample(
                    source_ordinal=i,
                    weight=0.0,
                    warped_center=(ann.box.cx, ann.box.cy),
                    size_ratio=ann.box.r,
                    excluded=True,
                    reason=REASON_SCENE_CUT,
                )
            )
            continue
        point, tracked = table.get(i, k)
        if not tracked:
            samples.append(
                WeightedSample(
                    source_ordinal=i,
                    weight=0.0,
                    warped_center=point,
                    size_ratio=ann.box.r,
                    excluded=True,
                    reason=REASON_TRACK_FAILURE,
                )
            )
            continue
        samples.append(
            WeightedSample(source_ordinal=i, weight=w, warped_center=point, size_ratio=ann.box.r)
        )
    return samples


def warp_neighbors(
    track: AnnotationTrack,
    frames: FrameSequence,
    k: int,
    cfg: FilterConfig = FilterConfig(),
    boundaries: SceneBoundaryList | None = None,
    cache: PyramidCache | None = None,
) -> list[WeightedSample]:
    """Candidate samples for anchor ordinal ``k``: warped neighbors plus anchor.

    Neighbor centers are chain-tracked from their own frame to the anchor
    frame. Samples across a scene cut (when gating is enabled and boundaries
    are given) and samples whose track failed come back excluded with
    weight 0. Radius gating is a separate step (gate_candidates).
    """
    _check_frames_cover(track, frames)
    by_ordinal = track.by_ordinal()
    if k not in by_ordinal:
        raise ValueError(f"track has no annotation with ordinal {k}")
    if cache is None:
        cache = PyramidCache()
    table = _build_warp_table(track, frames, [k], cfg, boundaries, cache)
    return _samples_for_anchor(track, k, cfg, boundaries, table)


def gate_candidates(
    samples: list[WeightedSample],
    anchor: Annotation,
    dims: FrameDims,
    cfg: FilterConfig = FilterConfig(),
) -> list[WeightedSample]:
    """Apply radius gating around the anchor center.

    The admission radius is ``radius_factor`` times the anchor's realized
    box width; the boundary itself is admitted (closed disk). The anchor
    sample is never excluded.
    """
    if not any(s.source_ordinal == anchor.box_ordinal and not s.excluded for s in samples):
        raise ValueError("anchor sample missing from candidate list")
    radius = cfg.radius_factor * anchor.box.r * dims.height * PORTRAIT_ASPECT
    out: list[WeightedSample] = []
    for s in samples:
        if s.source_ordinal == anchor.box_ordinal or s.excluded:
            out.append(s)
            continue
        d = math.hypot(s.warped_center[0] - anchor.box.cx, s.warped_center[1] - anchor.box.cy)
        if d > radius:
            out.append(replace(s, weight=0.0, excluded=True, reason=REASON_OUT_OF_RADIUS))
        else:
            out.append(s)
    return out


def aggregate(samples: list[WeightedSample], k: int) -> CropBox:
    """Weighted mean of the admitted samples.

    Excluded samples contribute nothing. The anchor's weight of 1 guarantees
    a nonzero total, so the result is always defined; the size ratio is
    clamped to 1 from above.
    """
    sw = 0.0
    sx = 0.0
    sy = 0.0
    sr = 0.0
    for s in samples:
        if s.excluded:
            continue
        sw += s.weight
        sx += s.weight * s.warped_center[0]
        sy += s.weight * s.warped_center[1]
        sr += s.weight * s.size_ratio
    if sw <= 0.0:
        raise ValueError(f"no admissible samples for anchor ordinal {k}")
    return CropBox(sx / sw, sy / sw, min(sr / sw, 1.0))


def _check_frames_cover(track: AnnotationTrack, frames: FrameSequence) -> None:
    if not track.annotations:
        raise EmptyTrack(f"video {track.video_id}: track has no annotations")
    last = max(a.frame_index for a in track.annotations)
    if last >= len(frames):
        raise DimsMismatch(
            f"video {track.video_id}: annotation at frame {last} but only "
            f"{len(frames)} frames supplied"
        )
    if frames.dims != track.dims:
        raise DimsMismatch(
            f"video {track.video_id}: track dims {track.dims.width}x{track.dims.height} "
            f"but frames are {frames.dims.width}x{frames.dims.height}"
        )


def smooth_track(
    track: AnnotationTrack,
    frames: FrameSequence,
    boundaries: SceneBoundaryList | None = None,
    cfg: FilterConfig = FilterConfig(),
) -> AnnotationTrack:
    """Smooth every annotation of a track against its windowed neighbors.

    All anchors are computed from the original annotations (parallel
    update); each ordinal appears as anchor exactly once and order, count,
    and frame indices are preserved.
    """
    _check_frames_cover(track, frames)
    cache = PyramidCache()
    ordinals = [a.box_ordinal for a in track.annotations]
    table = _build_warp_table(track, frames, ordinals, cfg, boundaries, cache)
    out: list[Annotation] = []
    for ann in track.annotations:
        k = ann.box_ordinal
        samples = _samples_for_anchor(track, k, cfg, boundaries, table)
        samples = gate_candidates(samples, ann, track.dims, cfg)
        box = aggregate(samples, k)
        out.append(replace(ann, box=box))
    return replace(track, annotations=tuple(out))


def interpolate_dense(track: AnnotationTrack, frame_count: int) -> list[CropBox]:
    """Per-frame crop boxes by linear interpolation between annotations.

    Each component (cx, cy, r) is interpolated independently; frames before
    the first and after the last annotation hold the boundary values.
    """
    if not track.annotations:
        raise EmptyTrack(f"video {track.video_id}: cannot interpolate an empty track")
    last = max(a.frame_index for a in track.annotations)
    if frame_count < last + 1:
        raise DimsMismatch(
            f"video {track.video_id}: frame_count {frame_count} does not cover "
            f"annotation at frame {last}"
        )
    anns = sorted(track.annotations, key=lambda a: a.frame_index)
    xs = np.array([a.frame_index for a in anns], dtype=np.float64)
    grid = np.arange(frame_count, dtype=np.float64)
    comps = []
    for getter in (lambda a: a.box.cx, lambda a: a.box.cy, lambda a: a.box.r):
        vals = np.array([getter(a) for a in anns], dtype=np.float64)
        comps.append(np.interp(grid, xs, vals))
    return [CropBox(float(cx), float(cy), float(r)) for cx, cy, r in zip(*comps)]
