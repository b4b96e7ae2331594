/**
 * DOM-free session controller: the state machine behind the UI.
 *
 * The server is the source of truth. Every response replaces the local
 * session state wholesale, and any failure triggers a resync, so the
 * attempt badge and progress counter can never drift from the service.
 */

import type { AttemptResult, ItemRef, SessionState } from "./api.js";
import type { Rect } from "./transform.js";

export type Mode = "start" | "labeling" | "visualization" | "completed";

/** The slice of the HTTP client the controller needs (fakeable in tests). */
export interface SessionApi {
  createSession(annotatorId: string, items: ItemRef[]): Promise<SessionState>;
  getState(sessionId: string): Promise<SessionState>;
  submitRect(sessionId: string, rect: Rect): Promise<AttemptResult>;
  accept(sessionId: string): Promise<SessionState>;
  currentImageUrl(sessionId: string, cursor: number): string;
  previewUrl(path: string): string;
}

export interface Snapshot {
  mode: Mode;
  state: SessionState | null;
  /** Preview image URL of the attempt under review (visualization mode). */
  previewUrl: string | null;
  /** Attempt number of the preview under review. */
  reviewAttempt: number;
  /** True when the reviewed attempt was the last allowed and got auto-accepted. */
  autoAccepted: boolean;
  /** Frame image URL for labeling mode. */
  frameUrl: string | null;
  error: string | null;
  busy: boolean;
}

export class SessionController {
  private mode: Mode = "start";
  private state: SessionState | null = null;
  private preview: string | null = null;
  private reviewAttempt = 0;
  private autoAccepted = false;
  private error: string | null = null;
  private busy = false;

  constructor(
    private readonly api: SessionApi,
    private readonly onChange: (snapshot: Snapshot) => void = () => {},
  ) {}

  snapshot(): Snapshot {
    const labeling = this.mode === "labeling" && this.state !== null;
    return {
      mode: this.mode,
      state: this.state,
      previewUrl: this.preview,
      reviewAttempt: this.reviewAttempt,
      autoAccepted: this.autoAccepted,
      frameUrl: labeling
        ? this.api.currentImageUrl(this.state!.session_id, this.state!.cursor)
        : null,
      error: this.error,
      busy: this.busy,
    };
  }

  private emit(): void {
    this.onChange(this.snapshot());
  }

  private applyState(state: SessionState): void {
    this.state = state;
    this.mode = state.completed ? "completed" : this.mode;
  }

  private async guarded(action: () => Promise<void>): Promise<void> {
    if (this.busy) {
      return;
    }
    this.busy = true;
    this.emit();
    try {
      await action();
      this.error = null;
    } catch (e) {
      this.error = e instanceof Error ? e.message : String(e);
      await this.recover();
    } finally {
      this.busy = false;
      this.emit();
    }
  }

  /** Pull fresh state from the server after a failure. */
  private async recover(): Promise<void> {
    if (this.state === null) {
      return;
    }
    try {
      const state = await this.api.getState(this.state.session_id);
      this.state = state;
      this.preview = null;
      this.autoAccepted = false;
      this.mode = state.completed ? "completed" : "labeling";
    } catch {
      // still unreachable; keep the error banner, let the user retry
    }
  }

  async start(annotatorId: string, items: ItemRef[]): Promise<void> {
    await this.guarded(async () => {
      const state = await this.api.createSession(annotatorId, items);
      this.state = state;
      this.mode = state.completed ? "completed" : "labeling";
      this.preview = null;
      this.autoAccepted = false;
      this.reviewAttempt = 0;
    });
  }

  /** Submit a finished drag; a null rect (too-small drag) is ignored. */
  async submitDrag(rect: Rect | null): Promise<void> {
    if (this.mode !== "labeling" || this.state === null || rect === null) {
      return;
    }
    await this.guarded(async () => {
      const result = await this.api.submitRect(this.state!.session_id, rect);
      this.state = result;
      this.preview = this.api.previewUrl(result.preview_url);
      this.reviewAttempt = result.attempt_number;
      this.autoAccepted = result.accepted;
      // Even when this attempt auto-accepted the final item, show the
      // preview first; acceptCurrent() then lands on the completion screen.
      this.mode = "visualization";
    });
  }

  /** Back to labeling for another try (no server call; nothing was kept). */
  tryAgain(): void {
    if (this.mode !== "visualization" || this.autoAccepted || this.busy) {
      return;
    }
    this.preview = null;
    this.mode = "labeling";
    this.emit();
  }

  /**
   * Accept the reviewed attempt and advance. After an auto-accept the
   * server has already advanced, so this just moves the UI along.
   */
  async acceptCurrent(): Promise<void> {
    if (this.mode !== "visualization" || this.state === null) {
      return;
    }
    if (this.autoAccepted) {
      if (this.busy) {
        return;
      }
      this.preview = null;
      this.autoAccepted = false;
      this.mode = this.state.completed ? "completed" : "labeling";
      this.emit();
      return;
    }
    await this.guarded(async () => {
      const state = await this.api.accept(this.state!.session_id);
      this.applyState(state);
      this.preview = null;
      if (!state.completed) {
        this.mode = "labeling";
      }
    });
  }

  /** Re-pull server state; the recovery path behind the retry banner. */
  async resync(): Promise<void> {
    if (this.state === null) {
      return;
    }
    await this.guarded(async () => {
      const state = await this.api.getState(this.state!.session_id);
      this.state = state;
      this.preview = null;
      this.autoAccepted = false;
      this.mode = state.completed ? "completed" : "labeling";
    });
  }
}
