"""Descriptive statistics over annotation sessions, tracks, and videos.

Covers annotator-behavior measures (center dispersion, mean box area),
per-track consistency (consecutive-frame IoU and center distance), two
outlier detectors (local outlier factor and the modified z-score), and the
content-diversity features colorfulness, spatial information, and temporal
information.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Mapping, Sequence

import numpy as np

from .errors import DimsMismatch, InsufficientData
from .frames import FrameSequence, GrayFrame, RGBFrame
from .geometry import FrameDims, center_distance, iou, normalized_area, to_rect
from .smoothing import Annotation, AnnotationTrack

LOF_DEFAULT_NEIGHBORS = 20
LOF_DEFAULT_THRESHOLD = 1.5
ZSCORE_DEFAULT_THRESHOLD = 3.5
# Share of highest-TI videos excluded from outlier screening by default.
TI_EXCLUDE_TOP_FRACTION = 0.13


@dataclass(frozen=True)
class SessionRecord:
    """All annotations one annotator produced, across many videos."""

    annotator_id: str
    entries: tuple[tuple[str, Annotation], ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))


@dataclass(frozen=True)
class OutlierReport:
    """Outcome of one outlier screen over a set of labeled points."""

    method: str
    flagged: frozenset
    scores: Mapping[Hashable, float]
    params: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class DiversityFeatures:
    """Content-diversity summary of one video."""

    colorfulness: float
    spatial_information: float
    temporal_information: float


def center_dispersion(session: SessionRecord) -> float:
    """RMS distance of a session's box centers from their centroid."""
    if len(session.entries) < 2:
        raise InsufficientData(
            f"session {session.annotator_id}: dispersion needs at least 2 annotations"
        )
    pts = np.array([(a.box.cx, a.box.cy) for _, a in session.entries], dtype=np.float64)
    d2 = ((pts - pts.mean(axis=0)) ** 2).sum(axis=1)
    return float(np.sqrt(d2.mean()))


def mean_box_area(session: SessionRecord, dims_by_video: Mapping[str, FrameDims]) -> float:
    """Mean normalized box area over a session's annotations."""
    if not session.entries:
        raise InsufficientData(f"session {session.annotator_id} has no annotations")
    areas = [normalized_area(a.box, dims_by_video[vid]) for vid, a in session.entries]
    return float(np.mean(areas))


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"expected (n, 2) points, got shape {pts.shape}")
    return pts


def lof_scores(points, k_neighbors: int = LOF_DEFAULT_NEIGHBORS) -> np.ndarray:
    """Local outlier factor of each point; about 1 inside uniform density.

    Neighborhoods include every point tied with the k-th nearest distance,
    which keeps duplicated points finite and symmetric.
    """
    pts = _as_points(points)
    n = len(pts)
    if k_neighbors < 1:
        raise ValueError("k_neighbors must be at least 1")
    if n <= k_neighbors:
        raise InsufficientData(f"LOF needs more than {k_neighbors} points, got {n}")
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    np.fill_diagonal(dist, np.inf)
    kdist = np.partition(dist, k_neighbors - 1, axis=1)[:, k_neighbors - 1]
    neigh = dist <= kdist[:, None]
    counts = neigh.sum(axis=1).astype(np.float64)
    reach = np.maximum(kdist[None, :], dist)  # reach[i, o] with o a neighbor of i
    reach_sum = np.where(neigh, reach, 0.0).sum(axis=1)  # masked: the diagonal is inf
    lrd = counts / np.maximum(reach_sum, 1e-12)
    lof = (lrd[None, :] * neigh).sum(axis=1) / (counts * lrd)
    return lof


def lof_outliers(
    points,
    k_neighbors: int = LOF_DEFAULT_NEIGHBORS,
    threshold: float = LOF_DEFAULT_THRESHOLD,
    labels: Sequence[Hashable] | None = None,
) -> OutlierReport:
    """LOF screen: points whose score strictly exceeds ``threshold`` are flagged."""
    scores = lof_scores(points, k_neighbors)
    if labels is None:
        labels = list(range(len(scores)))
    flagged = frozenset(lab for lab, s in zip(labels, scores) if s > threshold)
    return OutlierReport(
        method="lof",
        flagged=flagged,
        scores={lab: float(s) for lab, s in zip(labels, scores)},
        params={"k_neighbors": k_neighbors, "threshold": threshold},
    )


def zscore_outliers(
    points,
    threshold: float = ZSCORE_DEFAULT_THRESHOLD,
    labels: Sequence[Hashable] | None = None,
) -> OutlierReport:
    """Modified z-score screen over each coordinate separately.

    Scores are 0.6745 * (v - median) / MAD; when the MAD is zero the mean
    absolute deviation around the median stands in, scaled by 0.7979. If
    both are zero nothing is flagged. A point is flagged when either
    coordinate strictly exceeds ``threshold`` in absolute value.
    """
    pts = _as_points(points)
    n = len(pts)
    if n < 3:
        raise InsufficientData(f"modified z-score needs at least 3 points, got {n}")
    scores = np.zeros(n, dtype=np.float64)
    for c in range(2):
        v = pts[:, c]
        med = np.median(v)
        dev = np.abs(v - med)
        mad = np.median(dev)
        if mad > 0.0:
            z = 0.6745 * (v - med) / mad
        else:
            mean_ad = dev.mean()
            if mean_ad > 0.0:
                z = 0.7979 * (v - med) / mean_ad
            else:
                z = np.zeros(n)
        scores = np.maximum(scores, np.abs(z))
    if labels is None:
        labels = list(range(n))
    flagged = frozenset(lab for lab, s in zip(labels, scores) if s > threshold)
    return OutlierReport(
        method="modified-z-score",
        flagged=flagged,
        scores={lab: float(s) for lab, s in zip(labels, scores)},
        params={"threshold": threshold},
    )


def track_center_outliers(track: AnnotationTrack, method: str = "lof", **kwargs) -> OutlierReport:
    """Outlier screen over one track's centers, labeled (video_id, ordinal)."""
    pts = [(a.box.cx, a.box.cy) for a in track.annotations]
    labels = [(track.video_id, a.box_ordinal) for a in track.annotations]
    if method == "lof":
        return lof_outliers(pts, labels=labels, **kwargs)
    if method == "zscore":
        return zscore_outliers(pts, labels=labels, **kwargs)
    raise ValueError(f"unknown outlier method {method!r}")


def consecutive_iou(track: AnnotationTrack, dims: FrameDims | None = None) -> float:
    """Mean IoU between realized boxes of consecutive annotations."""
    if len(track.annotations) < 2:
        raise InsufficientData(f"video {track.video_id}: needs at least 2 annotations")
    d = dims or track.dims
    rects = [to_rect(a.box, d) for a in track.annotations]
    vals = [iou(a, b) for a, b in zip(rects, rects[1:])]
    return float(np.mean(vals))


def consecutive_center_distance(track: AnnotationTrack) -> float:
    """Mean center distance in pixels between consecutive annotations."""
    if len(track.annotations) < 2:
        raise InsufficientData(f"video {track.video_id}: needs at least 2 annotations")
    boxes = [a.box for a in track.annotations]
    vals = [center_distance(a, b) for a, b in zip(boxes, boxes[1:])]
    return float(np.mean(vals))


def colorfulness(frame: RGBFrame) -> float:
    """Hasler-Suesstrunk colorfulness of one frame."""
    p = frame.pixels.astype(np.float64)
    rg = p[..., 0] - p[..., 1]
    yb = 0.5 * (p[..., 0] + p[..., 1]) - p[..., 2]
    sigma = np.sqrt(rg.var() + yb.var())
    mu = np.sqrt(rg.mean() ** 2 + yb.mean() ** 2)
    return float(sigma + 0.3 * mu)


def _sobel_magnitude(luma: np.ndarray) -> np.ndarray:
    """Sobel gradient magnitude on the interior of a [0, 255] luma plane."""
    col = luma[:-2] + 2.0 * luma[1:-1] + luma[2:]
    gx = col[:, 2:] - col[:, :-2]
    row = luma[:, :-2] + 2.0 * luma[:, 1:-1] + luma[:, 2:]
    gy = row[2:, :] - row[:-2, :]
    return np.hypot(gx, gy)


def spatial_information(frame: GrayFrame) -> float:
    """Std of the Sobel gradient magnitude over the frame interior.

    Luma is taken on the [0, 255] scale; the one-pixel border where the
    Sobel kernel has no full support is excluded.
    """
    if frame.width < 3 or frame.height < 3:
        raise InsufficientData("spatial information needs at least a 3x3 frame")
    luma = frame.pixels.astype(np.float64) * 255.0
    return float(_sobel_magnitude(luma).std())


def temporal_information(prev: GrayFrame, cur: GrayFrame) -> float:
    """Std of the frame difference, on the [0, 255] luma scale."""
    if prev.dims != cur.dims:
        raise DimsMismatch(
            f"frames are {prev.width}x{prev.height} and {cur.width}x{cur.height}"
        )
    diff = (cur.pixels.astype(np.float64) - prev.pixels.astype(np.float64)) * 255.0
    return float(diff.std())


def video_diversity(frames: FrameSequence, use_max: bool = False) -> DiversityFeatures:
    """Colorfulness, SI, and TI of one video.

    The per-frame values are averaged over time by default; ``use_max``
    switches SI and TI to the max-over-time convention instead. A video with
    a single frame (or identical frames) has TI 0.
    """
    if len(frames) < 1:
        raise InsufficientData("diversity features need at least one frame")
    cf = float(np.mean([colorfulness(f) for f in frames]))
    si_vals = [spatial_information(frames.gray(i)) for i in range(len(frames))]
    ti_vals = [
        temporal_information(frames.gray(i - 1), frames.gray(i)) for i in range(1, len(frames))
    ]
    agg = np.max if use_max else np.mean
    si = float(agg(si_vals))
    ti = float(agg(ti_vals)) if ti_vals else 0.0
    return DiversityFeatures(colorfulness=cf, spatial_information=si, temporal_information=ti)


def ti_exclusion_cutoff(ti_values: Sequence[float], top_fraction: float = TI_EXCLUDE_TOP_FRACTION) -> float:
    """TI value above which videos are excluded from outlier screening.

    Implements the nearest-rank percentile at (1 - top_fraction); values
    strictly above the cutoff are excluded.
    """
    if not ti_values:
        raise InsufficientData("no TI values given")
    if not (0.0 < top_fraction < 1.0):
        raise ValueError("top_fraction must be in (0, 1)")
    ordered = sorted(ti_values)
    rank = int(np.ceil((1.0 - top_fraction) * len(ordered)))
    rank = min(max(rank, 1), len(ordered))
    return float(ordered[rank - 1])


def format_histogram(values: Sequence[float], bins: int = 10, width: int = 40, title: str = "") -> str:
    """Plain-text histogram, one bin per line."""
    vals = np.asarray(list(values), dtype=np.float64)
    lines = []
    if title:
        lines.append(title)
    if vals.size == 0:
        lines.append("  (no data)")
        return "\n".join(lines)
    counts, edges = np.histogram(vals, bins=bins)
    peak = max(int(counts.max()), 1)
    for c, lo, hi in zip(counts, edges, edges[1:]):
        bar = "#" * int(round(width * c / peak))
        lines.append(f"  [{lo:10.3f}, {hi:10.3f})  {c:5d}  {bar}")
    return "\n".join(lines)
