/** Thin typed client for the review-service HTTP API. */

import type {
  CalibrationResponse,
  EntityCandidate,
  EntityVerdict,
  HealthResponse,
  LabelIn,
  LabelRecord,
  LeakHit,
  LeakVerdict,
  QueueItem,
  QueueTask,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: unknown,
    message?: string,
  ) {
    super(message ?? `request failed with status ${status}`);
    this.name = "ApiError";
  }
}

async function parseBody(response: Response): Promise<unknown> {
  const text = await response.text();
  try {
    return JSON.parse(text);
  } catch {
    return text;
  }
}

export class Api {
  constructor(
    private readonly base: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.base + path, init);
    if (!response.ok) {
      throw new ApiError(response.status, await parseBody(response));
    }
    return (await response.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  health(): Promise<HealthResponse> {
    return this.request("/api/health");
  }

  queue<T = QueueItem>(
    task: QueueTask,
    limit = 20,
  ): Promise<{ task: QueueTask; items: T[]; remaining: number }> {
    return this.request(`/api/queue?task=${task}&limit=${limit}`);
  }

  postLabel(label: LabelIn): Promise<LabelRecord> {
    return this.post("/api/labels", label);
  }

  async labelsExport(): Promise<string> {
    const response = await this.fetchFn(this.base + "/api/labels/export");
    if (!response.ok) {
      throw new ApiError(response.status, await parseBody(response));
    }
    return response.text();
  }

  leaks(): Promise<{ hits: LeakHit[] }> {
    return this.request("/api/leaks");
  }

  leakVerdict(hitId: string, verdict: LeakVerdict): Promise<{ id: string; verdict: LeakVerdict }> {
    return this.post(`/api/leaks/${encodeURIComponent(hitId)}/verdict`, { verdict });
  }

  entityCandidates(): Promise<{ candidates: EntityCandidate[] }> {
    return this.request("/api/entities/candidates");
  }

  entityVerdict(
    surface: string,
    verdict: EntityVerdict,
  ): Promise<{ surface: string; verdict: EntityVerdict }> {
    return this.post(`/api/entities/${encodeURIComponent(surface)}/verdict`, { verdict });
  }

  calibration(): Promise<CalibrationResponse> {
    return this.request("/api/calibration");
  }

  stats(): Promise<Record<string, unknown>> {
    return this.request("/api/stats");
  }
}
