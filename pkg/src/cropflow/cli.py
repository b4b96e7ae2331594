"""Command-line interface.

Subcommands cover the full pipeline: smoothing raw annotation files against
their videos, statistical analysis, prediction evaluation, portrait
rendering, scene detection, the annotation session server, and a synthetic
fixture generator for reproducible end-to-end runs.

Exit codes: 0 success, 1 usage error, 2 data/input error, 3 internal error.
All multi-video work is distributed over a thread pool but results are
assembled in sorted video order, so output bytes do not depend on the
thread count.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .analysis import (
    SessionRecord,
    center_dispersion,
    colorfulness,
    consecutive_center_distance,
    consecutive_iou,
    format_histogram,
    mean_box_area,
    ti_exclusion_cutoff,
    track_center_outliers,
    video_diversity,
)
from .errors import CropflowError, DimsMismatch, InsufficientData
from .fileio import (
    AnnotationFile,
    VideoSource,
    dumps_report,
    read_annotations,
    read_video,
    write_annotations,
    write_png_sequence,
    write_report,
    write_scene_lists,
    write_y4m,
)
from .frames import FrameSequence, RGBFrame
from .geometry import CropBox, FrameDims
from .metrics import DenseTrack, evaluate_dataset, preserve_height
from .render import render_portrait
from .scenes import SceneBoundaryList, detect_scenes
from .smoothing import (
    Annotation,
    AnnotationTrack,
    FilterConfig,
    interpolate_dense,
    smooth_track,
)

DEFAULT_SCENE_THRESHOLD = 27.0


class UsageError(Exception):
    """Bad command line; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _thresholds(text: str) -> list[float]:
    try:
        vals = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise UsageError(f"--iou-thresholds: expected comma-separated numbers, got {text!r}")
    if not vals:
        raise UsageError("--iou-thresholds: at least one threshold required")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cropflow", description="Portrait crop annotation pipeline")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")

    sm = sub.add_parser("smooth", help="smooth raw annotations against their videos")
    sm.add_argument("--input", required=True, help="raw annotation file")
    sm.add_argument("--video-dir", required=True, help="directory of video sources named by video_id")
    sm.add_argument("--output", required=True, help="smoothed annotation file to write")
    sm.add_argument("--window", type=int, default=15, help="ordinal window size (odd, default 15)")
    sm.add_argument("--threads", type=int, default=1, help="videos processed in parallel")
    sm.add_argument(
        "--scene-threshold",
        type=float,
        default=DEFAULT_SCENE_THRESHOLD,
        help="cut detection threshold for videos without stored scene cuts",
    )

    an = sub.add_parser("analyze", help="statistics and outlier report for an annotation file")
    an.add_argument("--input", required=True, help="annotation file")
    an.add_argument("--video-dir", help="optional video sources for content features")
    an.add_argument("--output", help="report file to write")
    an.add_argument("--threads", type=int, default=1)

    ev = sub.add_parser("evaluate", help="compare predicted annotations against ground truth")
    ev.add_argument("--input", required=True, help="predicted annotation file")
    ev.add_argument("--truth", required=True, help="ground-truth annotation file")
    ev.add_argument("--output", help="report file to write")
    ev.add_argument(
        "--iou-thresholds",
        type=_thresholds,
        default=[0.3, 0.5],
        help="comma-separated IoU thresholds (default 0.3,0.5)",
    )
    ev.add_argument(
        "--preserve-height",
        action="store_true",
        help="replace every predicted box with its full-height variant first",
    )
    ev.add_argument("--timing", action="store_true", help="measure per-video seconds (best of three)")
    ev.add_argument("--threads", type=int, default=1)

    rd = sub.add_parser("render", help="render one video's track as a portrait video")
    rd.add_argument("--input", required=True, help="annotation file")
    rd.add_argument("--video-dir", required=True)
    rd.add_argument("--output", required=True, help=".y4m file or directory for PNG frames")
    rd.add_argument("--video", help="video_id to render (required when the file has several)")
    rd.add_argument("--height", type=int, default=1080, help="output height (default 1080)")
    rd.add_argument(
        "--preserve-height",
        action="store_true",
        help="render full-height boxes keeping each horizontal center",
    )

    sc = sub.add_parser("scenes", help="detect scene cuts and write a scene list file")
    sc.add_argument("--video-dir", required=True)
    sc.add_argument("--output", required=True, help="scene list file to write")
    sc.add_argument("--video", help="restrict to one video_id")
    sc.add_argument("--scene-threshold", type=float, default=DEFAULT_SCENE_THRESHOLD)
    sc.add_argument("--threads", type=int, default=1)

    sv = sub.add_parser("serve", help="run the annotation session server")
    sv.add_argument("--video-dir", required=True)
    sv.add_argument("--store", required=True, help="directory for session event logs")
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=8000)
    sv.add_argument("--frontend", help="directory of static UI files to serve at /")
    sv.add_argument("--preview-height", type=int, default=1080)

    sy = sub.add_parser("synth", help="generate a synthetic fixture set (videos + raw annotations)")
    sy.add_argument("--output", required=True, help="directory to create")
    sy.add_argument("--seed", type=int, default=0)
    sy.add_argument("--videos", type=int, default=2)
    sy.add_argument("--boxes", type=int, default=10, help="annotations per video")
    sy.add_argument("--stride", type=int, default=6, help="native frames between annotations")
    return p


def _video_sources(video_dir: Path) -> dict[str, Path]:
    """Map video_id -> source path (a .y4m file or a frame directory)."""
    if not video_dir.is_dir():
        raise FileNotFoundError(f"video directory not found: {video_dir}")
    out: dict[str, Path] = {}
    for entry in sorted(video_dir.iterdir()):
        if entry.is_dir():
            out[entry.name] = entry
        elif entry.suffix == ".y4m":
            out[entry.stem] = entry
    return out


def _load_video(sources: dict[str, Path], video_id: str) -> FrameSequence:
    if video_id not in sources:
        raise FileNotFoundError(f"no video source for {video_id!r} in the video directory")
    return read_video(sources[video_id])


def _pool_map(fn, items, threads: int):
    """Order-preserving parallel map; falls back to serial for one thread."""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def cmd_smooth(args) -> int:
    if args.window < 1 or args.window % 2 == 0:
        raise UsageError(f"--window must be a positive odd count, got {args.window}")
    afile = read_annotations(args.input)
    sources = _video_sources(Path(args.video_dir))
    cfg = FilterConfig(window_size=args.window)
    tracks = sorted(afile.tracks, key=lambda t: t.video_id)

    def one(track: AnnotationTrack):
        frames = _load_video(sources, track.video_id)
        if track.video_id in afile.scene_cuts:
            boundaries = afile.scene_cuts[track.video_id]
        else:
            boundaries = detect_scenes(frames, threshold=args.scene_threshold)
        smoothed = smooth_track(track, frames, boundaries, cfg)
        stats = (
            consecutive_iou(track) if len(track) >= 2 else None,
            consecutive_iou(smoothed) if len(track) >= 2 else None,
            consecutive_center_distance(track) if len(track) >= 2 else None,
            consecutive_center_distance(smoothed) if len(track) >= 2 else None,
        )
        return smoothed, boundaries, stats

    results = _pool_map(one, tracks, args.threads)
    out_tracks = []
    out_cuts = dict(afile.scene_cuts)
    for track, (smoothed, boundaries, stats) in zip(tracks, results):
        out_tracks.append(smoothed)
        out_cuts[track.video_id] = boundaries
        iou_b, iou_a, dist_b, dist_a = stats
        if iou_b is None:
            print(f"video {track.video_id}: single annotation, nothing to compare")
        else:
            print(
                f"video {track.video_id}: consecutive IoU {iou_b:.4f} -> {iou_a:.4f}, "
                f"center distance {dist_b:.2f} -> {dist_a:.2f} px"
            )
    write_annotations(out_tracks, "smoothed", args.output, afile.frame_counts, out_cuts)
    print(f"wrote {args.output}")
    return 0


def _dense_tracks(afile: AnnotationFile) -> dict[str, DenseTrack]:
    out = {}
    for track in afile.tracks:
        count = afile.frame_counts.get(track.video_id)
        if count is None:
            count = max(a.frame_index for a in track.annotations) + 1
        out[track.video_id] = DenseTrack(tuple(interpolate_dense(track, count)), track.dims)
    return out


def cmd_evaluate(args) -> int:
    pred_file = read_annotations(args.input)
    gt_file = read_annotations(args.truth)
    preds = _dense_tracks(pred_file)
    gts = _dense_tracks(gt_file)
    if args.preserve_height:
        preds = {
            vid: DenseTrack(tuple(preserve_height(b, t.dims) for b in t.boxes), t.dims)
            for vid, t in preds.items()
        }
    report = evaluate_dataset(preds, gts, thresholds=args.iou_thresholds, timing=args.timing)
    print(f"m_IoU {report.m_iou:.1f}")
    for t in sorted(report.iou_at):
        print(f"IoU@{t:g} {report.iou_at[t]:.1f}")
    print(f"temporal smoothness {report.temporal_smoothness:.1f}")
    if report.seconds_per_video is not None:
        print(f"seconds per video {report.seconds_per_video:.3f}")
    if args.output:
        doc = {
            "format": "vc-report/1",
            "kind": "evaluation",
            "m_iou": report.m_iou,
            "iou_at": {f"{t:g}": v for t, v in report.iou_at.items()},
            "temporal_smoothness": report.temporal_smoothness,
            "per_video": report.per_video,
        }
        if report.saliency is not None:
            doc["saliency"] = report.saliency
        if report.seconds_per_video is not None:
            doc["seconds_per_video"] = report.seconds_per_video
        write_report(doc, args.output)
        print(f"wrote {args.output}")
    return 0


def cmd_analyze(args) -> int:
    afile = read_annotations(args.input)
    tracks = sorted(afile.tracks, key=lambda t: t.video_id)
    sources = _video_sources(Path(args.video_dir)) if args.video_dir else None

    def one(track: AnnotationTrack):
        entry: dict = {"annotations": len(track)}
        if len(track) >= 2:
            entry["consecutive_iou"] = consecutive_iou(track)
            entry["consecutive_center_distance"] = consecutive_center_distance(track)
        entry["mean_r"] = float(np.mean([a.box.r for a in track.annotations]))
        outliers: dict = {}
        try:
            rep = track_center_outliers(track, method="zscore")
            outliers["zscore"] = sorted(o for _, o in rep.flagged)
        except InsufficientData:
            pass
        try:
            rep = track_center_outliers(track, method="lof")
            outliers["lof"] = sorted(o for _, o in rep.flagged)
        except InsufficientData:
            pass
        if outliers:
            entry["outliers"] = outliers
        diversity = None
        if sources is not None:
            frames = _load_video(sources, track.video_id)
            feats = video_diversity(frames)
            diversity = {
                "spatial_information": feats.spatial_information,
                "temporal_information": feats.temporal_information,
                "colorfulness": float(np.mean([colorfulness(f) for f in frames])),
            }
        return entry, diversity

    results = _pool_map(one, tracks, args.threads)

    videos: dict = {}
    diversity_by_video: dict = {}
    for track, (entry, diversity) in zip(tracks, results):
        videos[track.video_id] = entry
        if diversity is not None:
            diversity_by_video[track.video_id] = diversity

    by_annotator: dict[str, list] = {}
    dims_by_video = {t.video_id: t.dims for t in tracks}
    for track in tracks:
        for a in track.annotations:
            by_annotator.setdefault(a.annotator_id, []).append((track.video_id, a))
    annotators: dict = {}
    for name in sorted(by_annotator):
        session = SessionRecord(annotator_id=name, entries=tuple(by_annotator[name]))
        info: dict = {"annotations": len(by_annotator[name])}
        try:
            info["center_dispersion"] = center_dispersion(session)
        except InsufficientData:
            pass
        info["mean_box_area"] = mean_box_area(session, dims_by_video)
        annotators[name] = info

    doc: dict = {
        "format": "vc-report/1",
        "kind": "analysis",
        "videos": videos,
        "annotators": annotators,
    }
    if diversity_by_video:
        doc["diversity"] = diversity_by_video
        ti_values = [d["temporal_information"] for d in diversity_by_video.values()]
        doc["ti_exclusion_cutoff"] = ti_exclusion_cutoff(ti_values)

    r_values = [a.box.r for t in tracks for a in t.annotations]
    print(format_histogram(r_values, title="box height ratio r"))
    iou_values = [videos[v]["consecutive_iou"] for v in sorted(videos) if "consecutive_iou" in videos[v]]
    if iou_values:
        print(format_histogram(iou_values, title="per-video consecutive IoU"))
    if args.output:
        write_report(doc, args.output)
        print(f"wrote {args.output}")
    return 0


def cmd_render(args) -> int:
    afile = read_annotations(args.input)
    by_id = {t.video_id: t for t in afile.tracks}
    if args.video:
        if args.video not in by_id:
            raise FileNotFoundError(f"video {args.video!r} not in the annotation file")
        track = by_id[args.video]
    elif len(by_id) == 1:
        track = next(iter(by_id.values()))
    else:
        raise UsageError("annotation file has several videos; pick one with --video")
    sources = _video_sources(Path(args.video_dir))
    frames = _load_video(sources, track.video_id)
    count = afile.frame_counts.get(track.video_id, len(frames))
    if count != len(frames):
        raise DimsMismatch(
            f"video {track.video_id}: annotation file declares {count} frames "
            f"but the video has {len(frames)}"
        )
    boxes = interpolate_dense(track, len(frames))
    if args.preserve_height:
        boxes = [preserve_height(b, track.dims) for b in boxes]
    dense = DenseTrack(tuple(boxes), track.dims)
    rendered = render_portrait(frames, dense, out_height=args.height)
    out = Path(args.output)
    if out.suffix == ".y4m":
        write_y4m(rendered, out)
    else:
        out.mkdir(parents=True, exist_ok=True)
        write_png_sequence(rendered, out)
    print(f"wrote {args.output} ({len(rendered)} frames at {rendered.dims.width}x{rendered.dims.height})")
    return 0


def cmd_scenes(args) -> int:
    sources = _video_sources(Path(args.video_dir))
    if args.video:
        if args.video not in sources:
            raise FileNotFoundError(f"no video source for {args.video!r} in the video directory")
        sources = {args.video: sources[args.video]}
    if not sources:
        raise FileNotFoundError(f"no video sources found in {args.video_dir}")
    ids = sorted(sources)

    def one(vid: str) -> SceneBoundaryList:
        return detect_scenes(read_video(sources[vid]), threshold=args.scene_threshold)

    results = _pool_map(one, ids, args.threads)
    scenes = dict(zip(ids, results))
    for vid in ids:
        cuts = scenes[vid].cut_indices
        text = ", ".join(str(c) for c in cuts) if cuts else "none"
        print(f"video {vid}: cuts at {text}")
    write_scene_lists(scenes, args.output)
    print(f"wrote {args.output}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    app = create_app(
        video_dir=args.video_dir,
        store_dir=args.store,
        frontend_dir=args.frontend,
        preview_height=args.preview_height,
    )
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def _synth_frame(rng: np.random.Generator, width: int, height: int) -> RGBFrame:
    """A block-textured frame with strong gradients everywhere."""
    cell = 4
    noise = rng.integers(0, 256, (height // cell, width // cell, 3), dtype=np.uint8)
    img = np.kron(noise, np.ones((cell, cell, 1), dtype=np.uint8))
    return RGBFrame(np.ascontiguousarray(img[:height, :width]))


def cmd_synth(args) -> int:
    if args.videos < 1:
        raise UsageError("--videos must be at least 1")
    if args.boxes < 1:
        raise UsageError("--boxes must be at least 1")
    if args.stride < 1:
        raise UsageError("--stride must be at least 1")
    out = Path(args.output)
    (out / "videos").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    width, height = 384, 216
    dims = FrameDims(width, height)
    noise_px = height / 18.0
    tracks = []
    frame_counts = {}
    for v in range(args.videos):
        vid = f"v{v + 1:02d}"
        n_frames = (args.boxes - 1) * args.stride + 1
        frame = _synth_frame(rng, width, height)
        seq = FrameSequence([frame] * n_frames)
        write_y4m(seq, out / "videos" / f"{vid}.y4m")
        anns = []
        for k in range(1, args.boxes + 1):
            t = k - 1
            cx = width / 2 + 0.08 * width * np.sin(2 * np.pi * t / 8.0)
            cy = height / 2 + 0.05 * height * np.cos(2 * np.pi * t / 8.0)
            cx = float(np.clip(cx + rng.normal(0.0, noise_px), 8, width - 8))
            cy = float(np.clip(cy + rng.normal(0.0, noise_px), 8, height - 8))
            anns.append(
                Annotation(
                    frame_index=(k - 1) * args.stride,
                    box=CropBox(cx, cy, 0.5),
                    annotator_id="synthetic",
                    box_ordinal=k,
                )
            )
        tracks.append(AnnotationTrack(vid, dims, tuple(anns), stride=args.stride))
        frame_counts[vid] = n_frames
    write_annotations(tracks, "raw", out / "raw.json", frame_counts)
    print(f"wrote {args.videos} videos and {out / 'raw.json'}")
    return 0


_COMMANDS = {
    "smooth": cmd_smooth,
    "analyze": cmd_analyze,
    "evaluate": cmd_evaluate,
    "render": cmd_render,
    "scenes": cmd_scenes,
    "serve": cmd_serve,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_usage(sys.stderr)
            return 1
        return _COMMANDS[args.command](args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except (CropflowError, FileNotFoundError, NotADirectoryError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        raise
    except Exception as e:  # pragma: no cover - defensive catch-all
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
