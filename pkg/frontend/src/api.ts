/** Typed client for the annotation session HTTP API. */

import type { Rect } from "./transform.js";

export interface VideoInfo {
  video_id: string;
  width: number;
  height: number;
  frame_count: number;
}

export interface SessionItem {
  video_id: string;
  frame_index: number;
  width: number;
  height: number;
  frame_count: number;
}

export interface SessionState {
  session_id: string;
  annotator_id: string;
  total: number;
  cursor: number;
  accepted_count: number;
  completed: boolean;
  item: SessionItem | null;
  attempts_used: number;
  max_attempts: number;
}

export interface AttemptResult extends SessionState {
  attempt_number: number;
  accepted: boolean;
  preview_url: string;
}

export interface ItemRef {
  video_id: string;
  frame_index: number;
}

/** An error response from the service, carrying its HTTP status. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function parseError(res: Response): Promise<never> {
  let message = `${res.status} ${res.statusText}`;
  try {
    const body = (await res.json()) as { error?: unknown; detail?: unknown };
    if (typeof body.error === "string") {
      message = body.error;
    } else if (body.detail !== undefined) {
      message = JSON.stringify(body.detail);
    }
  } catch {
    // non-JSON error body; keep the status line
  }
  throw new ApiError(res.status, message);
}

export class ApiClient {
  constructor(private readonly base: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await fetch(this.base + path, init);
    if (!res.ok) {
      await parseError(res);
    }
    return (await res.json()) as T;
  }

  private post<T>(path: string, body?: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: body === undefined ? "{}" : JSON.stringify(body),
    });
  }

  listVideos(): Promise<VideoInfo[]> {
    return this.request<VideoInfo[]>("/api/videos");
  }

  createSession(annotatorId: string, items: ItemRef[]): Promise<SessionState> {
    return this.post<SessionState>("/api/sessions", {
      annotator_id: annotatorId,
      items,
    });
  }

  getState(sessionId: string): Promise<SessionState> {
    return this.request<SessionState>(`/api/sessions/${encodeURIComponent(sessionId)}`);
  }

  /** Submit a drawn rectangle in native video pixels. */
  submitRect(sessionId: string, rect: Rect): Promise<AttemptResult> {
    return this.post<AttemptResult>(`/api/sessions/${encodeURIComponent(sessionId)}/attempts`, {
      x0: rect.x0,
      y0: rect.y0,
      x1: rect.x1,
      y1: rect.y1,
    });
  }

  accept(sessionId: string): Promise<SessionState> {
    return this.post<SessionState>(`/api/sessions/${encodeURIComponent(sessionId)}/accept`);
  }

  /** URL of the current item's frame image (cache-busted per cursor). */
  currentImageUrl(sessionId: string, cursor: number): string {
    return `${this.base}/api/sessions/${encodeURIComponent(sessionId)}/current/image?cursor=${cursor}`;
  }

  previewUrl(path: string): string {
    return this.base + path;
  }

  exportUrl(sessionId?: string, annotatorId?: string): string {
    const params = new URLSearchParams();
    if (sessionId !== undefined) params.set("session_id", sessionId);
    if (annotatorId !== undefined) params.set("annotator_id", annotatorId);
    const q = params.toString();
    return `${this.base}/api/export${q ? `?${q}` : ""}`;
  }

  async fetchExport(sessionId?: string, annotatorId?: string): Promise<string> {
    const res = await fetch(this.exportUrl(sessionId, annotatorId));
    if (!res.ok) {
      await parseError(res);
    }
    return res.text();
  }
}
