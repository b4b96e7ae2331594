/**
 * End-to-end: a scripted session against the real service annotates a
 * 3-frame fixture through the UI's own gesture pipeline, exports, and
 * the export smooths cleanly through the command-line tool.
 */

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdirSync, mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import {
  clampToFrame,
  displayToNative,
  finalizeDrag,
  fitToViewport,
  type Point,
  type Rect,
  type Size,
} from "../src/transform.js";

const FRONTEND_ROOT = fileURLToPath(new URL("..", import.meta.url));
const DIST = join(FRONTEND_ROOT, "dist");

const MAKE_FIXTURE = `
import sys
import numpy as np
from cropflow.fileio import write_y4m
from cropflow.frames import FrameSequence, RGBFrame

out = sys.argv[1]
rng = np.random.default_rng(33)
coarse = rng.integers(0, 256, (27, 48, 3), dtype=np.uint8)
pixels = np.kron(coarse, np.ones((4, 4, 1), dtype=np.uint8))
frame = RGBFrame(pixels)
write_y4m(FrameSequence([frame] * 3, 30.0), out)
`;

let workDir: string;
let server: ChildProcess;
let serverLog = "";
let base: string;
let api: ApiClient;

async function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      if (address === null || typeof address === "string") {
        reject(new Error("no port assigned"));
        return;
      }
      probe.close(() => resolve(address.port));
    });
  });
}

async function waitForServer(url: string, timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  let lastError = "";
  while (Date.now() < deadline) {
    if (server.exitCode !== null) {
      throw new Error(`server exited early (code ${server.exitCode}):\n${serverLog}`);
    }
    try {
      const res = await fetch(url);
      if (res.ok) {
        return;
      }
      lastError = `${res.status} ${res.statusText}`;
    } catch (e) {
      lastError = e instanceof Error ? e.message : String(e);
    }
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
  throw new Error(`server never came up: ${lastError}\n${serverLog}`);
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "cropflow-ui-e2e-"));
  const videoDir = join(workDir, "videos");
  const storeDir = join(workDir, "store");
  mkdirSync(videoDir);
  mkdirSync(storeDir);
  execFileSync("python3", ["-c", MAKE_FIXTURE, join(videoDir, "fixture.y4m")]);

  const port = await freePort();
  base = `http://127.0.0.1:${port}`;
  server = spawn(
    "cropflow",
    [
      "serve",
      "--video-dir",
      videoDir,
      "--store",
      storeDir,
      "--host",
      "127.0.0.1",
      "--port",
      String(port),
      "--frontend",
      DIST,
      "--preview-height",
      "108",
    ],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  server.stdout?.on("data", (chunk: Buffer) => (serverLog += chunk.toString()));
  server.stderr?.on("data", (chunk: Buffer) => (serverLog += chunk.toString()));
  await waitForServer(`${base}/api/videos`, 60_000);
  api = new ApiClient(base);
});

afterAll(async () => {
  if (server !== undefined && server.exitCode === null) {
    server.kill("SIGTERM");
    await new Promise((resolve) => {
      server.once("exit", resolve);
      setTimeout(resolve, 5_000);
    });
  }
  rmSync(workDir, { recursive: true, force: true });
});

/**
 * Run a pointer drag exactly the way the canvas layer does: display
 * coordinates into the shared transform, aspect lock, minimum size.
 */
function gesture(native: Size, zoom: number, from: Point, to: Point): Rect {
  const viewport: Size = { width: 832 * zoom, height: 468 * zoom };
  const t = fitToViewport(native, viewport);
  const anchor = clampToFrame(native, displayToNative(t, from));
  const rect = finalizeDrag(native, anchor, displayToNative(t, to));
  if (rect === null) {
    throw new Error("scripted drag was below the minimum size");
  }
  return rect;
}

describe("annotation service end to end", () => {
  it("serves the built frontend next to the API", async () => {
    const page = await fetch(`${base}/`);
    expect(page.ok).toBe(true);
    const html = await page.text();
    expect(html).toContain('id="frame-canvas"');
    expect(html).toContain('src="./main.js"');

    const script = await fetch(`${base}/main.js`);
    expect(script.ok).toBe(true);
    expect(await script.text()).toContain("cropflowUi");

    const css = await fetch(`${base}/style.css`);
    expect(css.ok).toBe(true);
  });

  it("annotates the 3-frame fixture, exports, and smooths cleanly", async () => {
    const videos = await api.listVideos();
    expect(videos).toHaveLength(1);
    const video = videos[0];
    expect(video.video_id).toBe("fixture");
    expect(video.width).toBe(192);
    expect(video.height).toBe(108);
    expect(video.frame_count).toBe(3);

    const native: Size = { width: video.width, height: video.height };
    let state = await api.createSession("scripted", [
      { video_id: "fixture", frame_index: 0 },
      { video_id: "fixture", frame_index: 1 },
      { video_id: "fixture", frame_index: 2 },
    ]);
    const sessionId = state.session_id;
    expect(state.total).toBe(3);
    expect(state.cursor).toBe(0);
    expect(state.item?.frame_index).toBe(0);

    // the labeling view can fetch the current frame image
    const frame = await fetch(api.currentImageUrl(sessionId, state.cursor));
    expect(frame.ok).toBe(true);
    const framePng = Buffer.from(await frame.arrayBuffer());
    expect(framePng.subarray(0, 4)).toEqual(Buffer.from([0x89, 0x50, 0x4e, 0x47]));

    // first item: burn all three attempts, one per zoom level; the
    // third is accepted automatically by the service
    const zooms = [0.5, 1, 2];
    for (let attempt = 1; attempt <= 3; attempt++) {
      const zoom = zooms[attempt - 1];
      const rect = gesture(
        native,
        zoom,
        { x: (100 + attempt * 10) * zoom, y: 40 * zoom },
        { x: (120 + attempt * 10) * zoom, y: 420 * zoom },
      );
      const result = await api.submitRect(sessionId, rect);
      expect(result.attempt_number).toBe(attempt);
      expect(result.accepted).toBe(attempt === 3);
      // the n/3 badge always shows the server's own numbers
      const truth = await api.getState(sessionId);
      expect(result.attempts_used).toBe(truth.attempts_used);
      expect(result.cursor).toBe(truth.cursor);
      if (attempt < 3) {
        expect(truth.attempts_used).toBe(attempt);
        const preview = await fetch(api.previewUrl(result.preview_url));
        expect(preview.ok).toBe(true);
        const bytes = Buffer.from(await preview.arrayBuffer());
        expect(bytes.subarray(0, 4)).toEqual(Buffer.from([0x89, 0x50, 0x4e, 0x47]));
      } else {
        expect(truth.cursor).toBe(1);
      }
    }

    // remaining items: one attempt each, accepted by hand
    for (let item = 1; item < 3; item++) {
      const zoom = zooms[item];
      const rect = gesture(
        native,
        zoom,
        { x: (300 + item * 40) * zoom, y: 60 * zoom },
        { x: (280 + item * 40) * zoom, y: 400 * zoom },
      );
      const result = await api.submitRect(sessionId, rect);
      expect(result.attempt_number).toBe(1);
      expect(result.accepted).toBe(false);
      state = await api.accept(sessionId);
      expect(state.cursor).toBe(item + 1);
    }
    expect(state.completed).toBe(true);
    expect(state.accepted_count).toBe(3);

    // export parses, covers all three frames, and remembers the tries
    const exported = await api.fetchExport(sessionId);
    const doc = JSON.parse(exported) as {
      format: string;
      videos: {
        video_id: string;
        width: number;
        height: number;
        stride: number;
        annotations: {
          frame_index: number;
          attempt_count?: number;
          cx: number;
          cy: number;
          r: number;
        }[];
      }[];
    };
    expect(doc.format).toBe("vc-annotations/1");
    expect(doc.videos).toHaveLength(1);
    const track = doc.videos[0];
    expect(track.video_id).toBe("fixture");
    expect(track.stride).toBe(1);
    expect(track.annotations.map((a) => a.frame_index)).toEqual([0, 1, 2]);
    expect(track.annotations.map((a) => a.attempt_count)).toEqual([3, 1, 1]);
    for (const a of track.annotations) {
      expect(a.r).toBeGreaterThan(0);
      expect(a.r).toBeLessThanOrEqual(1);
      expect(a.cx).toBeGreaterThanOrEqual(0);
      expect(a.cx).toBeLessThanOrEqual(192);
    }

    // the exported file smooths without validation errors
    const rawPath = join(workDir, "raw.json");
    const smoothedPath = join(workDir, "smoothed.json");
    writeFileSync(rawPath, exported);
    const stdout = execFileSync(
      "cropflow",
      [
        "smooth",
        "--input",
        rawPath,
        "--video-dir",
        join(workDir, "videos"),
        "--output",
        smoothedPath,
      ],
      { encoding: "utf8" },
    );
    expect(stdout).toContain("video fixture:");
    expect(stdout).toContain(`wrote ${smoothedPath}`);

    const smoothed = JSON.parse(readFileSync(smoothedPath, "utf8")) as typeof doc;
    expect(smoothed.format).toBe("vc-annotations/1");
    expect(smoothed.videos[0].annotations).toHaveLength(3);
  });

  it("rejects a rectangle that breaks the aspect lock", async () => {
    const state = await api.createSession("aspect-check", [
      { video_id: "fixture", frame_index: 0 },
    ]);
    const bad: Rect = { x0: 10, y0: 10, x1: 110, y1: 110 };
    const error = await api.submitRect(state.session_id, bad).catch((e: unknown) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect((error as ApiError).status).toBe(422);
    expect((error as ApiError).message).toContain("9:16");
  });
});
