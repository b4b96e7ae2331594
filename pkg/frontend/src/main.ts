/** DOM wiring: canvas labeling view, preview review view, keyboard. */

import { ApiClient, type VideoInfo } from "./api.js";
import { SessionController, type Snapshot } from "./controller.js";
import {
  aspectLockedRect,
  clampToFrame,
  displayToNative,
  finalizeDrag,
  fitToViewport,
  nativeRectToDisplay,
  type Point,
  type Rect,
  type Size,
  type ViewTransform,
} from "./transform.js";

const BASE_VIEWPORT: Size = { width: 832, height: 468 };

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

const api = new ApiClient("");

const startPanel = el<HTMLElement>("start-panel");
const annotatorInput = el<HTMLInputElement>("annotator-id");
const videoSelect = el<HTMLSelectElement>("video-select");
const strideInput = el<HTMLInputElement>("stride");
const startButton = el<HTMLButtonElement>("start-button");

const workPanel = el<HTMLElement>("work-panel");
const progressLabel = el<HTMLElement>("progress");
const attemptBadge = el<HTMLElement>("attempt-badge");
const itemLabel = el<HTMLElement>("item-label");
const zoomSelect = el<HTMLSelectElement>("zoom");

const labelingView = el<HTMLElement>("labeling-view");
const canvas = el<HTMLCanvasElement>("frame-canvas");
const hint = el<HTMLElement>("hint");

const reviewView = el<HTMLElement>("review-view");
const previewImage = el<HTMLImageElement>("preview-image");
const tryAgainButton = el<HTMLButtonElement>("try-again");
const acceptButton = el<HTMLButtonElement>("accept");
const autoNotice = el<HTMLElement>("auto-notice");

const donePanel = el<HTMLElement>("done-panel");
const doneSummary = el<HTMLElement>("done-summary");
const exportLink = el<HTMLAnchorElement>("export-link");

const errorBanner = el<HTMLElement>("error-banner");
const errorText = el<HTMLElement>("error-text");
const retryButton = el<HTMLButtonElement>("retry");

let videos: VideoInfo[] = [];
let latest: Snapshot | null = null;

let frameImage: HTMLImageElement | null = null;
let loadedFrameUrl: string | null = null;
let transform: ViewTransform | null = null;
let dragAnchor: Point | null = null;
let dragRect: Rect | null = null;

const controller = new SessionController(api, render);

function zoom(): number {
  return Number(zoomSelect.value) || 1;
}

function viewportSize(): Size {
  const z = zoom();
  return { width: BASE_VIEWPORT.width * z, height: BASE_VIEWPORT.height * z };
}

function resizeCanvas(): void {
  const viewport = viewportSize();
  canvas.width = viewport.width;
  canvas.height = viewport.height;
  canvas.style.width = `${viewport.width}px`;
  canvas.style.height = `${viewport.height}px`;
}

function paint(): void {
  const ctx = canvas.getContext("2d");
  if (ctx === null) {
    return;
  }
  ctx.fillStyle = "#10151c";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  if (latest === null || transform === null || frameImage === null) {
    return;
  }
  const t = transform;
  ctx.drawImage(
    frameImage,
    t.offsetX,
    t.offsetY,
    t.native.width * t.scale,
    t.native.height * t.scale,
  );
  if (dragRect !== null) {
    const r = nativeRectToDisplay(t, dragRect);
    ctx.save();
    ctx.strokeStyle = "#53b1fd";
    ctx.lineWidth = 2;
    ctx.setLineDash([6, 4]);
    ctx.strokeRect(r.x0, r.y0, r.x1 - r.x0, r.y1 - r.y0);
    ctx.fillStyle = "rgba(83, 177, 253, 0.15)";
    ctx.fillRect(r.x0, r.y0, r.x1 - r.x0, r.y1 - r.y0);
    ctx.restore();
  }
}

function loadFrame(url: string, native: Size): void {
  resizeCanvas();
  transform = fitToViewport(native, { width: canvas.width, height: canvas.height });
  if (loadedFrameUrl === url && frameImage !== null) {
    paint();
    return;
  }
  const image = new Image();
  image.onload = () => {
    frameImage = image;
    loadedFrameUrl = url;
    paint();
  };
  image.src = url;
  paint();
}

function canvasPoint(ev: PointerEvent): Point {
  const bounds = canvas.getBoundingClientRect();
  return {
    x: ((ev.clientX - bounds.left) / bounds.width) * canvas.width,
    y: ((ev.clientY - bounds.top) / bounds.height) * canvas.height,
  };
}

canvas.addEventListener("pointerdown", (ev) => {
  if (latest === null || latest.mode !== "labeling" || transform === null) {
    return;
  }
  canvas.setPointerCapture(ev.pointerId);
  dragAnchor = clampToFrame(transform.native, displayToNative(transform, canvasPoint(ev)));
  dragRect = null;
  paint();
});

canvas.addEventListener("pointermove", (ev) => {
  if (dragAnchor === null || transform === null) {
    return;
  }
  const pointer = displayToNative(transform, canvasPoint(ev));
  dragRect = aspectLockedRect(transform.native, dragAnchor, pointer);
  paint();
});

canvas.addEventListener("pointerup", (ev) => {
  if (dragAnchor === null || transform === null) {
    return;
  }
  const pointer = displayToNative(transform, canvasPoint(ev));
  const rect = finalizeDrag(transform.native, dragAnchor, pointer);
  dragAnchor = null;
  dragRect = null;
  paint();
  void controller.submitDrag(rect);
});

canvas.addEventListener("pointercancel", () => {
  dragAnchor = null;
  dragRect = null;
  paint();
});

zoomSelect.addEventListener("change", () => {
  if (latest !== null) {
    render(latest);
  }
});

startButton.addEventListener("click", () => {
  const video = videos.find((v) => v.video_id === videoSelect.value);
  if (video === undefined) {
    return;
  }
  const stride = Math.max(1, Math.floor(Number(strideInput.value) || 1));
  const items = [];
  for (let f = 0; f < video.frame_count; f += stride) {
    items.push({ video_id: video.video_id, frame_index: f });
  }
  const annotator = annotatorInput.value.trim() || "anonymous";
  void controller.start(annotator, items);
});

tryAgainButton.addEventListener("click", () => controller.tryAgain());
acceptButton.addEventListener("click", () => void controller.acceptCurrent());
retryButton.addEventListener("click", () => void controller.resync());

document.addEventListener("keydown", (ev) => {
  if (latest === null || latest.mode !== "visualization") {
    return;
  }
  if (ev.key === "Enter") {
    ev.preventDefault();
    void controller.acceptCurrent();
  } else if (ev.key === "r" || ev.key === "R") {
    ev.preventDefault();
    controller.tryAgain();
  }
});

function show(node: HTMLElement, visible: boolean): void {
  node.classList.toggle("hidden", !visible);
}

function render(snapshot: Snapshot): void {
  latest = snapshot;
  const state = snapshot.state;

  show(errorBanner, snapshot.error !== null);
  errorText.textContent = snapshot.error ?? "";

  show(startPanel, snapshot.mode === "start");
  show(workPanel, snapshot.mode === "labeling" || snapshot.mode === "visualization");
  show(donePanel, snapshot.mode === "completed");
  show(labelingView, snapshot.mode === "labeling");
  show(reviewView, snapshot.mode === "visualization");

  if (state !== null) {
    const current = Math.min(state.cursor + 1, state.total);
    progressLabel.textContent = state.completed
      ? `${state.accepted_count} of ${state.total} accepted`
      : `frame ${current} of ${state.total}`;
    const used = snapshot.mode === "visualization" ? snapshot.reviewAttempt : state.attempts_used;
    attemptBadge.textContent = `attempt ${Math.min(used + (snapshot.mode === "labeling" ? 1 : 0), state.max_attempts)}/${state.max_attempts}`;
    const item = state.item;
    itemLabel.textContent =
      item === null ? "" : `${item.video_id} · frame ${item.frame_index} · ${item.width}x${item.height}`;
  }

  if (snapshot.mode === "labeling" && snapshot.frameUrl !== null && state?.item != null) {
    loadFrame(snapshot.frameUrl, { width: state.item.width, height: state.item.height });
    hint.textContent = "drag a 9:16 box over the subject";
  }

  if (snapshot.mode === "visualization") {
    previewImage.src = snapshot.previewUrl ?? "";
    tryAgainButton.disabled = snapshot.autoAccepted || snapshot.busy;
    acceptButton.disabled = snapshot.busy;
    acceptButton.textContent = snapshot.autoAccepted ? "Continue (Enter)" : "Accept (Enter)";
    show(autoNotice, snapshot.autoAccepted);
  }

  if (snapshot.mode === "completed" && state !== null) {
    doneSummary.textContent = `${state.accepted_count} of ${state.total} frames annotated.`;
    exportLink.href = api.exportUrl(state.session_id);
  }
}

async function init(): Promise<void> {
  try {
    videos = await api.listVideos();
  } catch (e) {
    errorText.textContent = e instanceof Error ? e.message : String(e);
    show(errorBanner, true);
    return;
  }
  videoSelect.replaceChildren(
    ...videos.map((v) => {
      const option = document.createElement("option");
      option.value = v.video_id;
      option.textContent = `${v.video_id} (${v.width}x${v.height}, ${v.frame_count} frames)`;
      return option;
    }),
  );
  startButton.disabled = videos.length === 0;
  render(controller.snapshot());
}

void init();

// surface the pure helpers for console poking during development
declare global {
  interface Window {
    cropflowUi?: unknown;
  }
}
window.cropflowUi = { fitToViewport, displayToNative, aspectLockedRect };
