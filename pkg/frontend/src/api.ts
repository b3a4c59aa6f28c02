// Thin client for the try-on service HTTP API. The base URL is configurable
// so the bundle can be served from the service itself or any static host.

export interface CatalogEntry {
  id: string;
  display_name: string;
}

export interface HealthInfo {
  status: string;
  model_asset_hash: string;
  detector_configured: boolean;
}

export interface FitParams {
  forward_offset_mm: number;
  vertical_offset_mm: number;
  scale_override?: number;
}

export interface TryonResponse {
  glb_url: string;
  key: string;
  cached: boolean;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function errorDetail(response: Response): Promise<string> {
  try {
    const body = await response.json();
    if (typeof body?.detail === "string") return body.detail;
    return JSON.stringify(body);
  } catch {
    return response.statusText || `HTTP ${response.status}`;
  }
}

export class ApiClient {
  constructor(readonly baseUrl: string = "") {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await fetch(this.baseUrl + path, init);
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    return response;
  }

  async health(): Promise<HealthInfo> {
    return (await this.request("/api/health")).json();
  }

  async catalog(): Promise<CatalogEntry[]> {
    const body = await (await this.request("/api/catalog")).json();
    return body.entries ?? [];
  }

  /** Upload a landmarks JSON document (string or pre-parsed object). */
  async createSubjectFromLandmarks(landmarksJson: string): Promise<string> {
    const response = await this.request("/api/subjects", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: landmarksJson,
    });
    return (await response.json()).subject_id;
  }

  /** Upload a photo; only meaningful when the service reports a detector. */
  async createSubjectFromImage(image: Blob, filename: string): Promise<string> {
    const form = new FormData();
    form.append("image", image, filename);
    const response = await this.request("/api/subjects", { method: "POST", body: form });
    return (await response.json()).subject_id;
  }

  async tryon(subjectId: string, frameId: string, fit: FitParams): Promise<TryonResponse> {
    const body: Record<string, unknown> = {
      subject_id: subjectId,
      frame_id: frameId,
      forward_offset_mm: fit.forward_offset_mm,
      vertical_offset_mm: fit.vertical_offset_mm,
    };
    if (fit.scale_override !== undefined) body.scale_override = fit.scale_override;
    const response = await this.request("/api/tryon", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return response.json();
  }

  assetUrl(glbUrl: string): string {
    return this.baseUrl + glbUrl;
  }
}
