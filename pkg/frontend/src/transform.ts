/**
 * The single coordinate utility for the annotation UI.
 *
 * Every conversion between display (CSS pixel) space and native video
 * pixel space goes through a `ViewTransform` built by `fitToViewport`,
 * so letterboxing, zooming and drag geometry all share one code path.
 */

export interface Size {
  width: number;
  height: number;
}

export interface Point {
  x: number;
  y: number;
}

/** Axis-aligned rectangle with x0 < x1 and y0 < y1. */
export interface Rect {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

/** Width ÷ height of the portrait crop rectangle. */
export const PORTRAIT_ASPECT = 9 / 16;

/** Drags shorter than this many native pixels of height are noise. */
export const MIN_DRAG_HEIGHT = 32;

/**
 * Letterbox fit of a native frame inside a display viewport: uniform
 * scale, centered, aspect preserved.
 */
export interface ViewTransform {
  /** Display pixels per native pixel. */
  scale: number;
  /** Display-space position of native (0, 0). */
  offsetX: number;
  offsetY: number;
  native: Size;
}

export function fitToViewport(native: Size, viewport: Size): ViewTransform {
  if (native.width <= 0 || native.height <= 0) {
    throw new Error(`native size must be positive, got ${native.width}x${native.height}`);
  }
  if (viewport.width <= 0 || viewport.height <= 0) {
    throw new Error(`viewport must be positive, got ${viewport.width}x${viewport.height}`);
  }
  const scale = Math.min(viewport.width / native.width, viewport.height / native.height);
  return {
    scale,
    offsetX: (viewport.width - native.width * scale) / 2,
    offsetY: (viewport.height - native.height * scale) / 2,
    native,
  };
}

export function displayToNative(t: ViewTransform, p: Point): Point {
  return { x: (p.x - t.offsetX) / t.scale, y: (p.y - t.offsetY) / t.scale };
}

export function nativeToDisplay(t: ViewTransform, p: Point): Point {
  return { x: p.x * t.scale + t.offsetX, y: p.y * t.scale + t.offsetY };
}

export function nativeRectToDisplay(t: ViewTransform, r: Rect): Rect {
  const a = nativeToDisplay(t, { x: r.x0, y: r.y0 });
  const b = nativeToDisplay(t, { x: r.x1, y: r.y1 });
  return { x0: a.x, y0: a.y, x1: b.x, y1: b.y };
}

function clamp(v: number, lo: number, hi: number): number {
  return Math.min(Math.max(v, lo), hi);
}

/** Clamp a native-space point onto the frame. */
export function clampToFrame(native: Size, p: Point): Point {
  return {
    x: clamp(p.x, 0, native.width),
    y: clamp(p.y, 0, native.height),
  };
}

/**
 * The 9:16-locked rectangle for a drag from `anchor` toward `pointer`,
 * both in native coordinates.
 *
 * The rectangle grows from the anchor in the pointer's direction; its
 * height follows whichever axis the pointer has moved furthest along,
 * and its width is exactly height x 9/16. When the pointer leaves the
 * frame the rectangle stops at the frame edge without losing the lock.
 */
export function aspectLockedRect(native: Size, anchor: Point, pointer: Point): Rect {
  const a = clampToFrame(native, anchor);
  const p = clampToFrame(native, pointer);
  const sx = p.x >= a.x ? 1 : -1;
  const sy = p.y >= a.y ? 1 : -1;
  const roomX = sx > 0 ? native.width - a.x : a.x;
  const roomY = sy > 0 ? native.height - a.y : a.y;
  let h = Math.max(Math.abs(p.y - a.y), Math.abs(p.x - a.x) / PORTRAIT_ASPECT);
  h = Math.min(h, roomY, roomX / PORTRAIT_ASPECT);
  const w = h * PORTRAIT_ASPECT;
  const bx = a.x + sx * w;
  const by = a.y + sy * h;
  return {
    x0: Math.min(a.x, bx),
    y0: Math.min(a.y, by),
    x1: Math.max(a.x, bx),
    y1: Math.max(a.y, by),
  };
}

/**
 * The rectangle a finished drag submits, or null when the drag is too
 * small to mean anything (under MIN_DRAG_HEIGHT native pixels tall).
 */
export function finalizeDrag(native: Size, anchor: Point, pointer: Point): Rect | null {
  const rect = aspectLockedRect(native, anchor, pointer);
  if (rect.y1 - rect.y0 < MIN_DRAG_HEIGHT) {
    return null;
  }
  return rect;
}

export function rectWidth(r: Rect): number {
  return r.x1 - r.x0;
}

export function rectHeight(r: Rect): number {
  return r.y1 - r.y0;
}
