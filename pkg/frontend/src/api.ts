/**
 * Typed client for the session service. The UI never computes labels:
 * everything rendered comes verbatim from these responses.
 */

export interface LabelSpaceDto {
  base_classes: string[];
  unknown_name: string;
  novel_classes: string[];
}

export interface MetricsDto {
  miou_b: number;
  miou_n: number | null;
  miou_a: number;
  hm: number | null;
}

export interface SessionSummary {
  session_id: string;
  scene_id: string;
  iteration: number;
  n: number;
  num_prototypes: number;
  clicks_total: number;
  label_space: LabelSpaceDto;
  metrics: MetricsDto | null;
}

export interface SessionStateDto {
  session_id: string;
  iteration: number;
  n: number;
  stride: number;
  chunk: number;
  num_chunks: number;
  indices: number[];
  positions: number[][];
  point_labels: number[];
  point_label_names: string[];
  gt_labels: number[] | null;
  prototype_labels: number[];
  prototype_probs: number[][];
  correspondence: number[];
  label_space: LabelSpaceDto;
  metrics: MetricsDto | null;
}

export interface SceneInfo {
  scene_id: string;
  n: number;
  base_classes: string[];
  has_gt: boolean;
}

export interface ClickPayload {
  point: number;
  label_name: string;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const res = await fetch(`${base}${path}`, init);
  if (!res.ok) {
    let detail = `HTTP ${res.status}`;
    try {
      const body = await res.json();
      if (body && typeof body.detail === "string") detail = body.detail;
    } catch {
      // non-JSON error body; keep the status line
    }
    throw new ApiError(res.status, detail);
  }
  if (res.status === 204) return undefined as T;
  return res.json() as Promise<T>;
}

export class SessionApi {
  constructor(private base: string) {}

  health(): Promise<{ status: string }> {
    return request(this.base, "/healthz");
  }

  uploadScene(container: Uint8Array): Promise<SceneInfo> {
    return request(this.base, "/scenes", {
      method: "POST",
      headers: { "Content-Type": "application/octet-stream" },
      body: container as unknown as BodyInit,
    });
  }

  createSession(sceneId: string, config?: Record<string, unknown>): Promise<SessionSummary> {
    return request(this.base, "/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ scene_id: sceneId, config }),
    });
  }

  getState(sessionId: string, opts?: { full?: boolean; chunk?: number }): Promise<SessionStateDto> {
    const params = new URLSearchParams();
    if (opts?.full) params.set("full", "1");
    if (opts?.chunk !== undefined) params.set("chunk", String(opts.chunk));
    const query = params.size > 0 ? `?${params.toString()}` : "";
    return request(this.base, `/sessions/${sessionId}/state${query}`);
  }

  annotate(sessionId: string, clicks: ClickPayload[]): Promise<SessionSummary> {
    return request(this.base, `/sessions/${sessionId}/annotations`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ clicks }),
    });
  }

  simulate(sessionId: string, strategy: string, budget: number): Promise<SessionSummary> {
    return request(this.base, `/sessions/${sessionId}/simulate`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ strategy, budget }),
    });
  }

  deleteSession(sessionId: string): Promise<void> {
    return request(this.base, `/sessions/${sessionId}`, { method: "DELETE" });
  }
}
