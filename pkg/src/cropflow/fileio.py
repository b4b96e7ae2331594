"""File formats: annotation files, scene lists, reports, and video sources.

The annotation file is versioned, human-readable JSON with a canonical
serialization: fixed key order, coordinates at exactly six decimals, one
annotation per line. Writing what was read reproduces the bytes exactly.
Validation rejects bad input outright (naming the offending field path)
rather than repairing it.

Video sources are either uncompressed Y4M streams (4:2:0, full-range BT.601)
or directories of numbered PNG/PPM frames.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from PIL import Image

from .errors import DimsMismatch, MissingFrame, ParseError, ValidationError
from .frames import FrameSequence, RGBFrame
from .geometry import CropBox, FrameDims
from .scenes import SceneBoundaryList
from .smoothing import Annotation, AnnotationTrack

ANNOTATION_FORMAT = "vc-annotations/1"
SCENES_FORMAT = "vc-scenes/1"
REPORT_FORMAT = "vc-report/1"
PROVENANCES = ("raw", "smoothed", "interpolated", "predicted")


@dataclass
class AnnotationFile:
    """Parsed contents of one annotation file."""

    provenance: str
    tracks: list[AnnotationTrack]
    frame_counts: dict[str, int] = field(default_factory=dict)
    scene_cuts: dict[str, SceneBoundaryList] = field(default_factory=dict)


@dataclass(frozen=True)
class VideoSource:
    """A video location: Y4M file or image directory, plus declared rate.

    For Y4M the header's rate wins; ``frame_rate`` applies to image
    directories (default 30 when unset).
    """

    path: Path
    frame_rate: float | None = None


def _f6(x: float) -> str:
    return f"{x:.6f}"


def _require(doc, key: str, kind, path: str):
    if not isinstance(doc, dict) or key not in doc:
        raise ValidationError(f"{path}.{key}: missing required field" if path else f"{key}: missing required field")
    val = doc[key]
    if kind is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ValidationError(f"{_join(path, key)}: expected a number, got {type(val).__name__}")
        return float(val)
    if kind is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ValidationError(f"{_join(path, key)}: expected an integer, got {type(val).__name__}")
        return val
    if not isinstance(val, kind):
        raise ValidationError(f"{_join(path, key)}: expected {kind.__name__}, got {type(val).__name__}")
    return val


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _parse_annotation(doc, path: str, width: int, height: int, frame_count: int) -> Annotation:
    ordinal = _require(doc, "ordinal", int, path)
    frame_index = _require(doc, "frame_index", int, path)
    annotator = _require(doc, "annotator_id", str, path)
    cx = _require(doc, "cx", float, path)
    cy = _require(doc, "cy", float, path)
    r = _require(doc, "r", float, path)
    if ordinal < 1:
        raise ValidationError(f"{_join(path, 'ordinal')}: must be >= 1, got {ordinal}")
    if not (0 <= frame_index < frame_count):
        raise ValidationError(
            f"{_join(path, 'frame_index')}: {frame_index} outside 0..{frame_count - 1}"
        )
    if not annotator:
        raise ValidationError(f"{_join(path, 'annotator_id')}: must not be empty")
    if not (0.0 <= cx <= width):
        raise ValidationError(f"{_join(path, 'cx')}: {cx} outside [0, {width}]")
    if not (0.0 <= cy <= height):
        raise ValidationError(f"{_join(path, 'cy')}: {cy} outside [0, {height}]")
    if not (0.0 < r <= 1.0):
        raise ValidationError(f"{_join(path, 'r')}: {r} outside (0, 1]")
    attempt = None
    if "attempt_count" in doc:
        attempt = _require(doc, "attempt_count", int, path)
        if attempt < 1:
            raise ValidationError(f"{_join(path, 'attempt_count')}: must be >= 1, got {attempt}")
    return Annotation(
        frame_index=frame_index,
        box=CropBox(cx, cy, r),
        annotator_id=annotator,
        box_ordinal=ordinal,
        attempt_count=attempt,
    )


def parse_annotations(text: str) -> AnnotationFile:
    """Parse and validate annotation-file text."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"not valid JSON: {e.msg}", offset=e.pos) from None
    if not isinstance(doc, dict):
        raise ValidationError("top level: expected an object")
    fmt = _require(doc, "format", str, "")
    if fmt != ANNOTATION_FORMAT:
        raise ValidationError(f"format: expected {ANNOTATION_FORMAT!r}, got {fmt!r}")
    provenance = _require(doc, "provenance", str, "")
    if provenance not in PROVENANCES:
        raise ValidationError(
            f"provenance: {provenance!r} not one of {', '.join(PROVENANCES)}"
        )
    videos = _require(doc, "videos", list, "")
    out = AnnotationFile(provenance=provenance, tracks=[])
    seen_ids = set()
    for vi, vdoc in enumerate(videos):
        vpath = f"videos[{vi}]"
        if not isinstance(vdoc, dict):
            raise ValidationError(f"{vpath}: expected an object")
        video_id = _require(vdoc, "video_id", str, vpath)
        if not video_id:
            raise ValidationError(f"{vpath}.video_id: must not be empty")
        if video_id in seen_ids:
            raise ValidationError(f"{vpath}.video_id: duplicate video {video_id!r}")
        seen_ids.add(video_id)
        width = _require(vdoc, "width", int, vpath)
        height = _require(vdoc, "height", int, vpath)
        if width < 16 or height < 16:
            raise ValidationError(f"{vpath}: dims {width}x{height} below the 16-pixel minimum")
        frame_count = _require(vdoc, "frame_count", int, vpath)
        if frame_count < 1:
            raise ValidationError(f"{vpath}.frame_count: must be >= 1, got {frame_count}")
        stride = _require(vdoc, "stride", int, vpath)
        if stride < 0:
            raise ValidationError(f"{vpath}.stride: must be >= 0, got {stride}")
        anns = _require(vdoc, "annotations", list, vpath)
        if not anns:
            raise ValidationError(f"{vpath}.annotations: must not be empty")
        parsed = []
        for ai, adoc in enumerate(anns):
            apath = f"{vpath}.annotations[{ai}]"
            if not isinstance(adoc, dict):
                raise ValidationError(f"{apath}: expected an object")
            ann = _parse_annotation(adoc, apath, width, height, frame_count)
            if ann.box_ordinal != ai + 1:
                raise ValidationError(
                    f"{apath}.ordinal: expected {ai + 1} (ordinals run 1..N without "
                    f"gaps), got {ann.box_ordinal}"
                )
            if stride > 0 and ann.frame_index != (ann.box_ordinal - 1) * stride:
                raise ValidationError(
                    f"{apath}.frame_index: {ann.frame_index} does not match ordinal "
                    f"{ann.box_ordinal} at stride {stride}"
                )
            parsed.append(ann)
        dims = FrameDims(width, height)
        try:
            track = AnnotationTrack(
                video_id=video_id, dims=dims, annotations=tuple(parsed), stride=stride
            )
        except ValidationError as e:
            raise ValidationError(f"{vpath}: {e}") from None
        out.tracks.append(track)
        out.frame_counts[video_id] = frame_count
        if "scene_cuts" in vdoc:
            cuts = _require(vdoc, "scene_cuts", list, vpath)
            for ci, c in enumerate(cuts):
                if isinstance(c, bool) or not isinstance(c, int):
                    raise ValidationError(f"{vpath}.scene_cuts[{ci}]: expected an integer")
            try:
                out.scene_cuts[video_id] = SceneBoundaryList(tuple(cuts), frame_count)
            except ValueError as e:
                raise ValidationError(f"{vpath}.scene_cuts: {e}") from None
    return out


def dumps_annotations(
    tracks: Sequence[AnnotationTrack],
    provenance: str,
    frame_counts: Mapping[str, int] | None = None,
    scene_cuts: Mapping[str, SceneBoundaryList] | None = None,
) -> str:
    """Serialize tracks to canonical annotation-file text.

    Key order, float precision (six decimals), and layout are fixed so a
    parse-serialize round trip is byte-stable. The result is validated
    before being returned; invalid inputs raise ValidationError.
    """
    if provenance not in PROVENANCES:
        raise ValidationError(f"provenance: {provenance!r} not one of {', '.join(PROVENANCES)}")
    frame_counts = dict(frame_counts or {})
    scene_cuts = dict(scene_cuts or {})
    tracks = sorted(tracks, key=lambda t: t.video_id)  # canonical order
    lines = ["{", f'  "format": {json.dumps(ANNOTATION_FORMAT)},']
    lines.append(f'  "provenance": {json.dumps(provenance)},')
    lines.append('  "videos": [')
    for ti, track in enumerate(tracks):
        count = frame_counts.get(track.video_id)
        if count is None:
            count = max(a.frame_index for a in track.annotations) + 1 if track.annotations else 1
        lines.append("    {")
        lines.append(f'      "video_id": {json.dumps(track.video_id)},')
        lines.append(f'      "width": {track.dims.width},')
        lines.append(f'      "height": {track.dims.height},')
        lines.append(f'      "frame_count": {count},')
        lines.append(f'      "stride": {track.stride},')
        cuts = scene_cuts.get(track.video_id)
        if cuts is not None:
            cut_text = ", ".join(str(c) for c in cuts.cut_indices)
            lines.append(f'      "scene_cuts": [{cut_text}],')
        lines.append('      "annotations": [')
        for ai, a in enumerate(track.annotations):
            parts = [
                f'"ordinal": {a.box_ordinal}',
                f'"frame_index": {a.frame_index}',
                f'"annotator_id": {json.dumps(a.annotator_id)}',
                f'"cx": {_f6(a.box.cx)}',
                f'"cy": {_f6(a.box.cy)}',
                f'"r": {_f6(a.box.r)}',
            ]
            if a.attempt_count is not None:
                parts.append(f'"attempt_count": {a.attempt_count}')
            tail = "," if ai < len(track.annotations) - 1 else ""
            lines.append("        {" + ", ".join(parts) + "}" + tail)
        lines.append("      ]")
        lines.append("    }" + ("," if ti < len(tracks) - 1 else ""))
    lines.append("  ]")
    lines.append("}")
    text = "\n".join(lines) + "\n"
    parse_annotations(text)  # writer output must satisfy the same schema
    return text


def read_annotations(path: str | Path) -> AnnotationFile:
    """Read and validate an annotation file."""
    return parse_annotations(Path(path).read_text(encoding="utf-8"))


def write_annotations(
    tracks: Sequence[AnnotationTrack],
    provenance: str,
    path: str | Path,
    frame_counts: Mapping[str, int] | None = None,
    scene_cuts: Mapping[str, SceneBoundaryList] | None = None,
) -> None:
    """Write tracks as a canonical annotation file."""
    text = dumps_annotations(tracks, provenance, frame_counts, scene_cuts)
    Path(path).write_text(text, encoding="utf-8")


def write_annotation_file(afile: AnnotationFile, path: str | Path) -> None:
    write_annotations(afile.tracks, afile.provenance, path, afile.frame_counts, afile.scene_cuts)


# --- scene list files -------------------------------------------------------


def dumps_scene_lists(scenes: Mapping[str, SceneBoundaryList]) -> str:
    lines = ["{", f'  "format": {json.dumps(SCENES_FORMAT)},', '  "videos": [']
    items = sorted(scenes.items())
    for i, (vid, sb) in enumerate(items):
        cut_text = ", ".join(str(c) for c in sb.cut_indices)
        tail = "," if i < len(items) - 1 else ""
        lines.append(
            f'    {{"video_id": {json.dumps(vid)}, "frame_count": {sb.frame_count}, '
            f'"cuts": [{cut_text}]}}{tail}'
        )
    lines.append("  ]")
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_scene_lists(scenes: Mapping[str, SceneBoundaryList], path: str | Path) -> None:
    Path(path).write_text(dumps_scene_lists(scenes), encoding="utf-8")


def read_scene_lists(path: str | Path) -> dict[str, SceneBoundaryList]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ParseError(f"not valid JSON: {e.msg}", offset=e.pos) from None
    fmt = _require(doc, "format", str, "")
    if fmt != SCENES_FORMAT:
        raise ValidationError(f"format: expected {SCENES_FORMAT!r}, got {fmt!r}")
    out = {}
    for vi, vdoc in enumerate(_require(doc, "videos", list, "")):
        vpath = f"videos[{vi}]"
        vid = _require(vdoc, "video_id", str, vpath)
        count = _require(vdoc, "frame_count", int, vpath)
        cuts = _require(vdoc, "cuts", list, vpath)
        try:
            out[vid] = SceneBoundaryList(tuple(cuts), count)
        except ValueError as e:
            raise ValidationError(f"{vpath}.cuts: {e}") from None
    return out


# --- reports ----------------------------------------------------------------


def _round_floats(obj, digits: int = 6):
    if isinstance(obj, float):
        return round(obj, digits)
    if isinstance(obj, dict):
        return {k: _round_floats(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v, digits) for v in obj]
    return obj


def dumps_report(report: Mapping) -> str:
    doc = {"format": REPORT_FORMAT}
    doc.update(_round_floats(dict(report)))
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_report(report: Mapping, path: str | Path) -> None:
    Path(path).write_text(dumps_report(report), encoding="utf-8")


# --- Y4M --------------------------------------------------------------------

_RGB_TO_YCBCR = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.168736, -0.331264, 0.5],
        [0.5, -0.418688, -0.081312],
    ]
)


def _rate_token(rate: float) -> str:
    frac = Fraction(rate).limit_denominator(1001)
    return f"F{frac.numerator}:{frac.denominator}"


def write_y4m(seq: FrameSequence, path: str | Path) -> None:
    """Write frames as uncompressed 4:2:0 Y4M (full-range BT.601)."""
    dims = seq.dims
    if dims.width % 2 or dims.height % 2:
        raise ValidationError(f"4:2:0 output needs even dims, got {dims.width}x{dims.height}")
    header = f"YUV4MPEG2 W{dims.width} H{dims.height} {_rate_token(seq.frame_rate)} Ip A1:1 C420jpeg\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        for frame in seq:
            rgb = frame.pixels.astype(np.float64)
            ycc = rgb @ _RGB_TO_YCBCR.T
            ycc[..., 1:] += 128.0
            y = np.clip(np.rint(ycc[..., 0]), 0, 255).astype(np.uint8)
            cb = ycc[..., 1].reshape(dims.height // 2, 2, dims.width // 2, 2).mean(axis=(1, 3))
            cr = ycc[..., 2].reshape(dims.height // 2, 2, dims.width // 2, 2).mean(axis=(1, 3))
            cb = np.clip(np.rint(cb), 0, 255).astype(np.uint8)
            cr = np.clip(np.rint(cr), 0, 255).astype(np.uint8)
            fh.write(b"FRAME\n")
            fh.write(y.tobytes())
            fh.write(cb.tobytes())
            fh.write(cr.tobytes())


def read_y4m(path: str | Path) -> FrameSequence:
    """Read an uncompressed 4:2:0 Y4M stream.

    Chroma is upsampled by replication and converted with full-range BT.601
    coefficients. Parse errors carry the byte offset of the problem.
    """
    data = Path(path).read_bytes()
    nl = data.find(b"\n")
    if nl < 0:
        raise ParseError("missing stream-header newline", offset=0)
    header = data[:nl].decode("ascii", errors="replace")
    tokens = header.split(" ")
    if tokens[0] != "YUV4MPEG2":
        raise ParseError(f"bad magic {tokens[0]!r}", offset=0)
    width = height = None
    rate = 30.0
    subsampling = "420"
    for tok in tokens[1:]:
        if not tok:
            continue
        tag, val = tok[0], tok[1:]
        if tag == "W":
            width = int(val)
        elif tag == "H":
            height = int(val)
        elif tag == "F":
            num, den = val.split(":")
            rate = int(num) / int(den)
        elif tag == "C":
            subsampling = val
    if width is None or height is None:
        raise ParseError("header missing W or H", offset=0)
    if not subsampling.startswith("420"):
        raise ParseError(f"unsupported chroma mode C{subsampling}; only 4:2:0 is readable", offset=0)
    if width % 2 or height % 2:
        raise ParseError(f"4:2:0 needs even dims, got {width}x{height}", offset=0)

    ysize = width * height
    csize = (width // 2) * (height // 2)
    frames = []
    pos = nl + 1
    while pos < len(data):
        marker_end = data.find(b"\n", pos)
        if marker_end < 0 or not data[pos:marker_end].startswith(b"FRAME"):
            raise ParseError("expected FRAME marker", offset=pos)
        pos = marker_end + 1
        end = pos + ysize + 2 * csize
        if end > len(data):
            raise ParseError(
                f"truncated frame {len(frames)}: needs {ysize + 2 * csize} bytes", offset=pos
            )
        y = np.frombuffer(data, np.uint8, ysize, pos).reshape(height, width).astype(np.float64)
        cb = (
            np.frombuffer(data, np.uint8, csize, pos + ysize)
            .reshape(height // 2, width // 2)
            .astype(np.float64)
        )
        cr = (
            np.frombuffer(data, np.uint8, csize, pos + ysize + csize)
            .reshape(height // 2, width // 2)
            .astype(np.float64)
        )
        cb = cb.repeat(2, axis=0).repeat(2, axis=1) - 128.0
        cr = cr.repeat(2, axis=0).repeat(2, axis=1) - 128.0
        r = y + 1.402 * cr
        g = y - 0.344136 * cb - 0.714136 * cr
        b = y + 1.772 * cb
        rgb = np.clip(np.rint(np.stack([r, g, b], axis=-1)), 0, 255).astype(np.uint8)
        frames.append(RGBFrame(rgb))
        pos = end
    if not frames:
        raise ParseError("stream has no frames", offset=nl + 1)
    return FrameSequence(frames, rate)


# --- image directories ------------------------------------------------------

_FRAME_NAME = re.compile(r"^\D*0*(\d+)\.(png|ppm)$", re.IGNORECASE)


def read_image_dir(path: str | Path, frame_rate: float = 30.0) -> FrameSequence:
    """Read a directory of numbered PNG or PPM frames.

    Frame numbers must be contiguous from 0; a gap raises an error naming
    the first missing index.
    """
    directory = Path(path)
    found: dict[int, Path] = {}
    for entry in sorted(directory.iterdir()):
        m = _FRAME_NAME.match(entry.name)
        if not m:
            continue
        idx = int(m.group(1))
        if idx in found:
            raise ParseError(f"duplicate frame index {idx}: {found[idx].name} and {entry.name}")
        found[idx] = entry
    if not found:
        raise ParseError(f"no numbered .png/.ppm frames in {directory}")
    count = max(found) + 1
    for i in range(count):
        if i not in found:
            raise MissingFrame(f"missing frame index {i} in {directory}")
    frames = []
    dims = None
    for i in range(count):
        with Image.open(found[i]) as img:
            arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
        if dims is None:
            dims = arr.shape
        elif arr.shape != dims:
            raise DimsMismatch(
                f"frame {i} is {arr.shape[1]}x{arr.shape[0]}, expected {dims[1]}x{dims[0]}"
            )
        frames.append(RGBFrame(arr))
    return FrameSequence(frames, frame_rate)


def write_png_sequence(seq: FrameSequence, path: str | Path) -> None:
    """Write frames as numbered PNG files (frame_000000.png, ...)."""
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(seq):
        Image.fromarray(frame.pixels).save(directory / f"frame_{i:06d}.png")


def read_video(source: VideoSource | str | Path) -> FrameSequence:
    """Read a video from a Y4M file or an image directory."""
    if not isinstance(source, VideoSource):
        source = VideoSource(Path(source))
    p = Path(source.path)
    if p.is_dir():
        return read_image_dir(p, source.frame_rate or 30.0)
    if p.suffix.lower() == ".y4m":
        seq = read_y4m(p)
        return seq
    raise ParseError(f"cannot read {p}: expected a .y4m file or a frame directory")
