"""Annotation session service.

Serves frames to a browser client, records drawn crop boxes with a
three-attempt limit per item (the third attempt is accepted automatically),
renders portrait previews, and exports all accepted annotations as a
canonical annotation file.

Every state change is appended to a per-session JSONL event log before the
response is sent, and the same application code replays those logs on
startup, so a crashed or restarted server resumes with nothing lost. A
partial trailing line (interrupted write) is tolerated on replay.
"""

from __future__ import annotations

import io
import json
import os
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI
from fastapi.responses import JSONResponse, Response
from PIL import Image
from pydantic import BaseModel

from .errors import (
    EmptyExport,
    InvalidBox,
    NotFound,
    NothingToAccept,
    SessionDone,
    SessionError,
    ValidationError,
)
from .fileio import dumps_annotations, read_video
from .frames import FrameSequence, RGBFrame
from .geometry import PORTRAIT_ASPECT, CropBox, to_rect
from .render import render_preview
from .smoothing import Annotation, AnnotationTrack

MAX_ATTEMPTS = 3


class VideoLibrary:
    """Lazy-loading video collection keyed by video_id.

    A video source is either ``<id>.y4m`` or a directory ``<id>/`` of
    numbered frames inside the library directory.
    """

    def __init__(self, video_dir: str | Path):
        self.video_dir = Path(video_dir)
        if not self.video_dir.is_dir():
            raise FileNotFoundError(f"video directory not found: {self.video_dir}")
        self._sources: dict[str, Path] = {}
        for entry in sorted(self.video_dir.iterdir()):
            if entry.is_dir():
                self._sources[entry.name] = entry
            elif entry.suffix == ".y4m":
                self._sources[entry.stem] = entry
        self._cache: dict[str, FrameSequence] = {}
        self._lock = threading.Lock()

    def ids(self) -> list[str]:
        return sorted(self._sources)

    def __contains__(self, video_id: str) -> bool:
        return video_id in self._sources

    def frames(self, video_id: str) -> FrameSequence:
        if video_id not in self._sources:
            raise NotFound(f"unknown video {video_id!r}")
        with self._lock:
            seq = self._cache.get(video_id)
        if seq is None:
            loaded = read_video(self._sources[video_id])
            with self._lock:
                seq = self._cache.setdefault(video_id, loaded)
        return seq


@dataclass
class Session:
    """One annotator's queue of frames and everything recorded on them."""

    session_id: str
    annotator_id: str
    items: tuple[tuple[str, int], ...]
    attempts: list[list[CropBox]] = field(default_factory=list)
    accepted: list[CropBox | None] = field(default_factory=list)
    attempt_counts: list[int | None] = field(default_factory=list)
    cursor: int = 0

    def __post_init__(self):
        if not self.attempts:
            self.attempts = [[] for _ in self.items]
        if not self.accepted:
            self.accepted = [None] * len(self.items)
        if not self.attempt_counts:
            self.attempt_counts = [None] * len(self.items)

    @property
    def completed(self) -> bool:
        return self.cursor >= len(self.items)

    @property
    def accepted_count(self) -> int:
        return sum(1 for b in self.accepted if b is not None)


class SessionStore:
    """All sessions, persisted as append-only JSONL event logs.

    State changes go through ``_apply`` exactly once whether they arrive
    over HTTP or from a log replay at startup, so a resumed server is in
    the same state as one that never stopped.
    """

    def __init__(self, store_dir: str | Path, library: VideoLibrary):
        self.store_dir = Path(store_dir)
        self.store_dir.mkdir(parents=True, exist_ok=True)
        self.library = library
        self.sessions: dict[str, Session] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._global = threading.Lock()
        for path in sorted(self.store_dir.glob("*.jsonl")):
            self._replay(path)

    def lock(self, session_id: str) -> threading.Lock:
        with self._global:
            return self._locks.setdefault(session_id, threading.Lock())

    def get(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise NotFound(f"unknown session {session_id!r}")
        return session

    # -- event handling ------------------------------------------------

    def _replay(self, path: Path) -> None:
        lines = path.read_text(encoding="utf-8").split("\n")
        for number, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                event = json.loads(line)
            except json.JSONDecodeError:
                if number == len(lines):  # interrupted final write
                    break
                raise SessionError(f"corrupt event log {path.name}: line {number}")
            self._apply(event)

    def _log(self, event: dict) -> None:
        path = self.store_dir / f"{event['session_id']}.jsonl"
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def _apply(self, event: dict):
        kind = event["event"]
        if kind == "created":
            session = Session(
                session_id=event["session_id"],
                annotator_id=event["annotator_id"],
                items=tuple((vid, int(fi)) for vid, fi in event["items"]),
            )
            self.sessions[session.session_id] = session
            return session
        session = self.get(event["session_id"])
        if kind == "attempt":
            if session.completed:
                raise SessionDone(f"session {session.session_id} is completed")
            if event["item"] != session.cursor:
                raise SessionError(
                    f"session {session.session_id}: event for item {event['item']} "
                    f"but cursor is at {session.cursor}"
                )
            box = CropBox(event["cx"], event["cy"], event["r"])
            current = session.attempts[session.cursor]
            current.append(box)
            if len(current) >= MAX_ATTEMPTS:
                self._accept_current(session)
            return session
        if kind == "accept":
            if session.completed:
                raise SessionDone(f"session {session.session_id} is completed")
            if not session.attempts[session.cursor]:
                raise NothingToAccept(
                    f"session {session.session_id}: no attempt recorded for the current item"
                )
            self._accept_current(session)
            return session
        raise SessionError(f"unknown event kind {kind!r}")

    @staticmethod
    def _accept_current(session: Session) -> None:
        i = session.cursor
        session.accepted[i] = session.attempts[i][-1]
        session.attempt_counts[i] = len(session.attempts[i])
        session.cursor += 1

    # -- operations ----------------------------------------------------

    def create_session(self, annotator_id: str, items: list[tuple[str, int]]) -> Session:
        if not annotator_id:
            raise ValidationError("annotator_id must not be empty")
        for vid, frame_index in items:
            frames = self.library.frames(vid)  # NotFound for unknown videos
            if not (0 <= frame_index < len(frames)):
                raise ValidationError(
                    f"frame_index {frame_index} outside 0..{len(frames) - 1} for video {vid!r}"
                )
        event = {
            "event": "created",
            "session_id": uuid.uuid4().hex[:12],
            "annotator_id": annotator_id,
            "items": [[vid, fi] for vid, fi in items],
        }
        session = self._apply(event)
        self._log(event)
        return session

    def submit_attempt(self, session_id: str, box: CropBox) -> tuple[Session, int, int]:
        """Record one attempt; returns (session, item index, attempt number)."""
        with self.lock(session_id):
            session = self.get(session_id)
            if session.completed:
                raise SessionDone(f"session {session_id} is completed")
            item = session.cursor
            vid, _ = session.items[item]
            self._validate_box(box, vid)
            event = {
                "event": "attempt",
                "session_id": session_id,
                "item": item,
                "cx": box.cx,
                "cy": box.cy,
                "r": box.r,
            }
            self._apply(event)
            self._log(event)
            return session, item, len(session.attempts[item])

    def accept_current(self, session_id: str) -> Session:
        with self.lock(session_id):
            session = self.get(session_id)
            if session.completed:
                raise SessionDone(f"session {session_id} is completed")
            if not session.attempts[session.cursor]:
                raise NothingToAccept(
                    f"session {session_id}: no attempt recorded for the current item"
                )
            event = {"event": "accept", "session_id": session_id, "item": session.cursor}
            self._apply(event)
            self._log(event)
            return session

    def _validate_box(self, box: CropBox, video_id: str) -> None:
        dims = self.library.frames(video_id).dims
        if not (0.0 <= box.cx <= dims.width and 0.0 <= box.cy <= dims.height):
            raise ValidationError(
                f"box center ({box.cx:.1f}, {box.cy:.1f}) outside frame "
                f"{dims.width}x{dims.height}"
            )
        to_rect(box, dims)  # InvalidBox when the realized rect cannot fit

    # -- export --------------------------------------------------------

    def export(self, session_id: str | None = None, annotator_id: str | None = None) -> str:
        rows = []
        for sid in sorted(self.sessions):
            session = self.sessions[sid]
            if session_id is not None and sid != session_id:
                continue
            if annotator_id is not None and session.annotator_id != annotator_id:
                continue
            for idx, box in enumerate(session.accepted):
                if box is None:
                    continue
                vid, frame_index = session.items[idx]
                rows.append(
                    (vid, frame_index, session.annotator_id, sid, idx, box,
                     session.attempt_counts[idx])
                )
        if not rows:
            raise EmptyExport("no accepted annotations to export")
        by_video: dict[str, list] = {}
        for row in rows:
            by_video.setdefault(row[0], []).append(row)
        tracks = []
        frame_counts = {}
        for vid in sorted(by_video):
            entries = sorted(by_video[vid], key=lambda r: (r[1], r[2], r[3], r[4]))
            frames = self.library.frames(vid)
            indices = [r[1] for r in entries]
            stride = _infer_stride(indices)
            annotations = tuple(
                Annotation(
                    frame_index=frame_index,
                    box=box,
                    annotator_id=who,
                    box_ordinal=ordinal,
                    attempt_count=attempts,
                )
                for ordinal, (vid_, frame_index, who, _sid, _idx, box, attempts) in enumerate(
                    entries, start=1
                )
            )
            tracks.append(AnnotationTrack(vid, frames.dims, annotations, stride=stride))
            frame_counts[vid] = len(frames)
        return dumps_annotations(tracks, "raw", frame_counts)


def _infer_stride(frame_indices: list[int]) -> int:
    """The regular sampling stride of the indices, or 0 when irregular."""
    if len(frame_indices) < 2 or frame_indices[0] != 0:
        return 0
    deltas = {b - a for a, b in zip(frame_indices, frame_indices[1:])}
    if len(deltas) == 1:
        step = deltas.pop()
        if step > 0:
            return step
    return 0


# -- HTTP layer --------------------------------------------------------


class ItemRef(BaseModel):
    video_id: str
    frame_index: int


class CreateSessionRequest(BaseModel):
    annotator_id: str
    items: list[ItemRef]


class AttemptRequest(BaseModel):
    """Either a crop box (cx, cy, r) or a drawn rectangle (x0, y0, x1, y1)."""

    cx: float | None = None
    cy: float | None = None
    r: float | None = None
    x0: float | None = None
    y0: float | None = None
    x1: float | None = None
    y1: float | None = None


def _box_from_request(req: AttemptRequest, dims) -> CropBox:
    if req.r is not None:
        if req.cx is None or req.cy is None:
            raise ValidationError("a box needs cx, cy and r")
        return CropBox(req.cx, req.cy, req.r)
    corners = (req.x0, req.y0, req.x1, req.y1)
    if any(c is None for c in corners):
        raise ValidationError("send either (cx, cy, r) or all of (x0, y0, x1, y1)")
    x0, y0, x1, y1 = corners
    if not (x1 > x0 and y1 > y0):
        raise ValidationError("rectangle corners must satisfy x0 < x1 and y0 < y1")
    height = y1 - y0
    expected_width = height * PORTRAIT_ASPECT
    if abs((x1 - x0) - expected_width) > 1.0:
        raise ValidationError(
            f"drawn rectangle is {x1 - x0:.1f}x{height:.1f}, not 9:16 "
            f"(expected width {expected_width:.1f} within 1 px)"
        )
    return CropBox((x0 + x1) / 2.0, (y0 + y1) / 2.0, height / dims.height)


def _png(frame: RGBFrame) -> Response:
    buf = io.BytesIO()
    Image.fromarray(frame.pixels).save(buf, format="PNG")
    return Response(content=buf.getvalue(), media_type="image/png")


def _session_state(store: SessionStore, session: Session) -> dict:
    state: dict = {
        "session_id": session.session_id,
        "annotator_id": session.annotator_id,
        "total": len(session.items),
        "cursor": session.cursor,
        "accepted_count": session.accepted_count,
        "completed": session.completed,
        "item": None,
        "attempts_used": 0,
        "max_attempts": MAX_ATTEMPTS,
    }
    if not session.completed:
        vid, frame_index = session.items[session.cursor]
        frames = store.library.frames(vid)
        state["item"] = {
            "video_id": vid,
            "frame_index": frame_index,
            "width": frames.dims.width,
            "height": frames.dims.height,
            "frame_count": len(frames),
        }
        state["attempts_used"] = len(session.attempts[session.cursor])
    return state


def create_app(
    video_dir: str | Path,
    store_dir: str | Path,
    frontend_dir: str | Path | None = None,
    preview_height: int = 1080,
) -> FastAPI:
    """Build the service around a video directory and a session store."""
    library = VideoLibrary(video_dir)
    store = SessionStore(store_dir, library)
    app = FastAPI(title="cropflow annotation service")
    app.state.store = store
    app.state.library = library

    def handler(status: int):
        def respond(request, exc):
            return JSONResponse({"error": str(exc)}, status_code=status)

        return respond

    app.add_exception_handler(NotFound, handler(404))
    app.add_exception_handler(SessionError, handler(409))
    app.add_exception_handler(ValidationError, handler(422))
    app.add_exception_handler(InvalidBox, handler(422))

    @app.get("/api/videos")
    def list_videos():
        out = []
        for vid in library.ids():
            frames = library.frames(vid)
            out.append(
                {
                    "video_id": vid,
                    "width": frames.dims.width,
                    "height": frames.dims.height,
                    "frame_count": len(frames),
                }
            )
        return out

    @app.post("/api/sessions", status_code=201)
    def create_session(req: CreateSessionRequest):
        items = [(item.video_id, item.frame_index) for item in req.items]
        session = store.create_session(req.annotator_id, items)
        return _session_state(store, session)

    @app.get("/api/sessions/{session_id}")
    @app.get("/api/sessions/{session_id}/current")
    def current(session_id: str):
        return _session_state(store, store.get(session_id))

    @app.get("/api/sessions/{session_id}/current/image")
    def current_image(session_id: str):
        session = store.get(session_id)
        if session.completed:
            raise SessionDone(f"session {session_id} is completed")
        vid, frame_index = session.items[session.cursor]
        return _png(store.library.frames(vid)[frame_index])

    @app.post("/api/sessions/{session_id}/attempts")
    def submit_attempt(session_id: str, req: AttemptRequest):
        session = store.get(session_id)
        if session.completed:
            raise SessionDone(f"session {session_id} is completed")
        vid, _ = session.items[session.cursor]
        box = _box_from_request(req, store.library.frames(vid).dims)
        session, item, attempt_number = store.submit_attempt(session_id, box)
        accepted = session.accepted[item] is not None
        state = _session_state(store, session)
        state.update(
            {
                "attempt_number": attempt_number,
                "accepted": accepted,
                "preview_url": (
                    f"/api/sessions/{session_id}/items/{item}/attempts/{attempt_number}/preview"
                ),
            }
        )
        return state

    @app.post("/api/sessions/{session_id}/accept")
    def accept(session_id: str):
        session = store.accept_current(session_id)
        return _session_state(store, session)

    @app.get("/api/sessions/{session_id}/items/{item}/attempts/{attempt}/preview")
    def preview(session_id: str, item: int, attempt: int):
        session = store.get(session_id)
        if not (0 <= item < len(session.items)):
            raise NotFound(f"session {session_id} has no item {item}")
        tries = session.attempts[item]
        if not (1 <= attempt <= len(tries)):
            raise NotFound(f"item {item} has no attempt {attempt}")
        vid, frame_index = session.items[item]
        frame = store.library.frames(vid)[frame_index]
        return _png(render_preview(frame, tries[attempt - 1], out_height=preview_height))

    @app.get("/api/export")
    def export(session_id: str | None = None, annotator_id: str | None = None):
        text = store.export(session_id=session_id, annotator_id=annotator_id)
        return Response(content=text, media_type="application/json")

    if frontend_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="ui")

    return app
