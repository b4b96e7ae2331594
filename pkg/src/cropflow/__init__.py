"""cropflow: temporal smoothing and evaluation for portrait crop tracks.

The package turns per-frame subjective 9:16 crop annotations on landscape
videos into temporally consistent crop tracks, and ships the surrounding
tooling: a point tracker, scene cut detection, annotator statistics,
benchmark metrics, portrait rendering, file formats, a CLI, and an
annotation-session HTTP service.
"""

from .analysis import (
    DiversityFeatures,
    OutlierReport,
    SessionRecord,
    center_dispersion,
    colorfulness,
    consecutive_center_distance,
    consecutive_iou,
    format_histogram,
    lof_outliers,
    lof_scores,
    mean_box_area,
    spatial_information,
    temporal_information,
    ti_exclusion_cutoff,
    track_center_outliers,
    video_diversity,
    zscore_outliers,
)
from .errors import (
    CropflowError,
    DimsMismatch,
    EmptyExport,
    EmptyTrack,
    InsufficientData,
    InvalidBox,
    LccUndefined,
    MissingFrame,
    NotFound,
    NothingToAccept,
    ParseError,
    PyramidError,
    SessionDone,
    SimUndefined,
    ValidationError,
)
from .frames import FrameSequence, GrayFrame, RGBFrame, rgb_to_gray
from .geometry import (
    PORTRAIT_ASPECT,
    CropBox,
    FrameDims,
    RectBox,
    center_distance,
    iou,
    normalized_area,
    to_rect,
)
from .metrics import DenseTrack, MetricsReport, SaliencyMap, evaluate_dataset
from .motion import TrackConfig, TrackResult, build_pyramid, chain_track, track_point
from .render import extract_crop, lanczos_resize, render_portrait, render_preview
from .scenes import SceneBoundaryList, detect_scenes, same_scene
from .smoothing import (
    Annotation,
    AnnotationTrack,
    FilterConfig,
    WeightedSample,
    aggregate,
    gate_candidates,
    hamming_weight,
    interpolate_dense,
    smooth_track,
    warp_neighbors,
)

__version__ = "0.1.0"

__all__ = [
    "Annotation",
    "AnnotationTrack",
    "CropBox",
    "CropflowError",
    "DenseTrack",
    "DimsMismatch",
    "DiversityFeatures",
    "EmptyExport",
    "EmptyTrack",
    "FilterConfig",
    "FrameDims",
    "FrameSequence",
    "GrayFrame",
    "InsufficientData",
    "InvalidBox",
    "LccUndefined",
    "MetricsReport",
    "MissingFrame",
    "NotFound",
    "NothingToAccept",
    "OutlierReport",
    "PORTRAIT_ASPECT",
    "ParseError",
    "PyramidError",
    "RGBFrame",
    "RectBox",
    "SaliencyMap",
    "SceneBoundaryList",
    "SessionDone",
    "SessionRecord",
    "SimUndefined",
    "TrackConfig",
    "TrackResult",
    "ValidationError",
    "WeightedSample",
    "aggregate",
    "build_pyramid",
    "center_dispersion",
    "center_distance",
    "chain_track",
    "colorfulness",
    "consecutive_center_distance",
    "consecutive_iou",
    "detect_scenes",
    "evaluate_dataset",
    "extract_crop",
    "format_histogram",
    "gate_candidates",
    "hamming_weight",
    "interpolate_dense",
    "iou",
    "lanczos_resize",
    "lof_outliers",
    "lof_scores",
    "mean_box_area",
    "normalized_area",
    "render_portrait",
    "render_preview",
    "rgb_to_gray",
    "same_scene",
    "smooth_track",
    "spatial_information",
    "temporal_information",
    "ti_exclusion_cutoff",
    "to_rect",
    "track_center_outliers",
    "track_point",
    "video_diversity",
    "warp_neighbors",
]
