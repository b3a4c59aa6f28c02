// Try-on UI state machine, deliberately DOM-free so the contract tests
// (debounce bound, stale-response rejection, error surfacing) run in plain
// node with a stubbed API client and fake timers.

import { ApiClient, ApiError, CatalogEntry, FitParams } from "./api";

export const DEBOUNCE_MS = 250;

export const SLIDER_BOUNDS = {
  forward_offset_mm: { min: 0, max: 30 },
  vertical_offset_mm: { min: -15, max: 15 },
  scale_override: { min: 0.5, max: 2.0 },
} as const;

export type Status =
  | { kind: "idle" }
  | { kind: "loading"; what: "catalog" | "subject" | "tryon" }
  | { kind: "error"; message: string; retryable: boolean };

export interface ViewerState {
  subjectId?: string;
  selectedFrameId?: string;
  fitParams: FitParams;
  currentGlbUrl?: string;
  status: Status;
  catalog: CatalogEntry[];
  detectorConfigured: boolean;
  toasts: string[];
  uploadError?: string;
}

interface TryonApi {
  health: ApiClient["health"];
  catalog: ApiClient["catalog"];
  createSubjectFromLandmarks: ApiClient["createSubjectFromLandmarks"];
  createSubjectFromImage: ApiClient["createSubjectFromImage"];
  tryon: ApiClient["tryon"];
}

function clamp(value: number, bounds: { min: number; max: number }): number {
  return Math.min(bounds.max, Math.max(bounds.min, value));
}

export class TryOnStore {
  state: ViewerState = {
    fitParams: { forward_offset_mm: 10, vertical_offset_mm: 0 },
    status: { kind: "idle" },
    catalog: [],
    detectorConfigured: false,
    toasts: [],
  };

  /** Count of tryon HTTP requests actually issued (observable for tests). */
  tryonRequestCount = 0;

  private listeners = new Set<(s: ViewerState) => void>();
  private debounceTimer: ReturnType<typeof setTimeout> | null = null;
  private requestCounter = 0;

  constructor(private api: TryonApi) {}

  subscribe(listener: (s: ViewerState) => void): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  private emit() {
    for (const listener of this.listeners) listener(this.state);
  }

  private patch(partial: Partial<ViewerState>) {
    this.state = { ...this.state, ...partial };
    this.emit();
  }

  toast(message: string) {
    this.patch({ toasts: [...this.state.toasts, message] });
  }

  dismissToasts() {
    this.patch({ toasts: [] });
  }

  async init(): Promise<void> {
    try {
      const health = await this.api.health();
      this.patch({ detectorConfigured: health.detector_configured });
    } catch {
      // health is advisory; catalog load reports real connectivity problems
    }
    await this.loadCatalog();
  }

  async loadCatalog(): Promise<void> {
    this.patch({ status: { kind: "loading", what: "catalog" } });
    try {
      const catalog = await this.api.catalog();
      this.patch({ catalog, status: { kind: "idle" } });
    } catch (err) {
      this.patch({
        status: { kind: "error", message: `catalog unavailable: ${describe(err)}`, retryable: true },
      });
    }
  }

  /** Upload a landmarks JSON file (the primary path) or a photo. */
  async submitSubject(content: string | Blob, filename = "upload"): Promise<void> {
    this.patch({ status: { kind: "loading", what: "subject" }, uploadError: undefined });
    try {
      let subjectId: string;
      if (typeof content === "string" || filename.endsWith(".json")) {
        const text = typeof content === "string" ? content : await content.text();
        subjectId = await this.api.createSubjectFromLandmarks(text);
      } else {
        if (!this.state.detectorConfigured) {
          this.patch({
            status: { kind: "idle" },
            uploadError: "photo upload unavailable, use a landmarks file",
          });
          return;
        }
        subjectId = await this.api.createSubjectFromImage(content, filename);
      }
      this.patch({ subjectId, status: { kind: "idle" }, uploadError: undefined });
      this.requestTryonNow();
    } catch (err) {
      if (err instanceof ApiError && err.status === 422) {
        this.patch({ status: { kind: "idle" }, uploadError: err.message });
      } else if (err instanceof ApiError && err.status === 503) {
        this.patch({
          status: { kind: "idle" },
          uploadError: "photo upload unavailable, use a landmarks file",
        });
      } else {
        this.patch({
          status: { kind: "error", message: `upload failed: ${describe(err)}`, retryable: false },
        });
      }
    }
  }

  selectFrame(frameId: string) {
    if (this.state.selectedFrameId === frameId) return;
    this.patch({ selectedFrameId: frameId });
    this.requestTryonNow();
  }

  /** Slider updates: clamped to bounds, re-rendered after a 250 ms debounce. */
  updateFitParams(partial: Partial<FitParams>) {
    const next: FitParams = { ...this.state.fitParams };
    if (partial.forward_offset_mm !== undefined) {
      next.forward_offset_mm = clamp(partial.forward_offset_mm, SLIDER_BOUNDS.forward_offset_mm);
    }
    if (partial.vertical_offset_mm !== undefined) {
      next.vertical_offset_mm = clamp(partial.vertical_offset_mm, SLIDER_BOUNDS.vertical_offset_mm);
    }
    if ("scale_override" in partial) {
      next.scale_override =
        partial.scale_override === undefined
          ? undefined
          : clamp(partial.scale_override, SLIDER_BOUNDS.scale_override);
    }
    this.patch({ fitParams: next });
    this.scheduleTryon();
  }

  private scheduleTryon() {
    if (!this.state.subjectId || !this.state.selectedFrameId) return;
    if (this.debounceTimer !== null) clearTimeout(this.debounceTimer);
    this.debounceTimer = setTimeout(() => {
      this.debounceTimer = null;
      void this.issueTryon();
    }, DEBOUNCE_MS);
  }

  private requestTryonNow() {
    if (!this.state.subjectId || !this.state.selectedFrameId) return;
    if (this.debounceTimer !== null) {
      clearTimeout(this.debounceTimer);
      this.debounceTimer = null;
    }
    void this.issueTryon();
  }

  private async issueTryon(): Promise<void> {
    const subjectId = this.state.subjectId;
    const frameId = this.state.selectedFrameId;
    if (!subjectId || !frameId) return;
    const requested: FitParams = { ...this.state.fitParams };
    const seq = ++this.requestCounter;
    this.tryonRequestCount += 1;
    this.patch({ status: { kind: "loading", what: "tryon" } });
    try {
      const response = await this.api.tryon(subjectId, frameId, requested);
      if (this.isStale(seq, subjectId, frameId, requested)) return;
      this.patch({ currentGlbUrl: response.glb_url, status: { kind: "idle" } });
    } catch (err) {
      if (this.isStale(seq, subjectId, frameId, requested)) return;
      if (err instanceof ApiError && err.status === 422) {
        // cannot-fit: keep the previous model, surface a non-blocking toast
        this.patch({ status: { kind: "idle" } });
        this.toast(`cannot fit: ${err.message}`);
      } else {
        this.patch({
          status: { kind: "error", message: `try-on failed: ${describe(err)}`, retryable: true },
        });
      }
    }
  }

  /** A response is stale when a newer request was issued or the state moved on. */
  private isStale(seq: number, subjectId: string, frameId: string, requested: FitParams): boolean {
    if (seq !== this.requestCounter) return true;
    if (this.state.subjectId !== subjectId || this.state.selectedFrameId !== frameId) return true;
    const now = this.state.fitParams;
    return (
      now.forward_offset_mm !== requested.forward_offset_mm ||
      now.vertical_offset_mm !== requested.vertical_offset_mm ||
      now.scale_override !== requested.scale_override
    );
  }
}

function describe(err: unknown): string {
  if (err instanceof Error) return err.message;
  return String(err);
}
