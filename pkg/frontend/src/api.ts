// Typed client for the biasbench HTTP API.

export interface Biases {
  diff_on: number;
  diff_off: number;
  fo: number;
  hpf: number;
  refr: number;
}

export interface Observation {
  session_id: string;
  biases: Biases;
  frame_url: string;
  event_rate: number;
  window_us: number;
  window_events: number;
  cached_metrics: Record<string, number | boolean>;
  demo_count: number;
}

export interface SceneInfo {
  grid: Record<string, number[]>;
  entries: number;
}

export interface SessionMetrics {
  biases: Biases;
  event_rate: number;
  cached_metrics: Record<string, number | boolean>;
  history_length: number;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const res = await fetch(url, init);
  if (!res.ok) {
    const body = await res.text().catch(() => "");
    throw new ApiError(res.status, `${res.status} ${res.statusText}: ${body}`);
  }
  return (await res.json()) as T;
}

export class BiasBenchClient {
  constructor(public baseUrl: string = "") {}

  scenes(): Promise<Record<string, SceneInfo>> {
    return request(`${this.baseUrl}/api/scenes`);
  }

  createSession(sceneId: string, start: Partial<Biases>, seed = 0): Promise<Observation> {
    return request(`${this.baseUrl}/api/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ scene_id: sceneId, start, seed }),
    });
  }

  adjust(sessionId: string, deltaOff: number, deltaOn: number): Promise<Observation> {
    return request(`${this.baseUrl}/api/sessions/${sessionId}/adjust`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ delta_off: deltaOff, delta_on: deltaOn }),
    });
  }

  metrics(sessionId: string): Promise<SessionMetrics> {
    return request(`${this.baseUrl}/api/sessions/${sessionId}/metrics`);
  }

  recordDemo(
    sessionId: string,
    payload: { action?: number[]; mark_optimal?: boolean; annotator?: string },
  ): Promise<{ demo_count: number }> {
    return request(`${this.baseUrl}/api/sessions/${sessionId}/demos`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  exportDemos(): Promise<string> {
    return fetch(`${this.baseUrl}/api/demos/export`).then((r) => {
      if (!r.ok) throw new ApiError(r.status, r.statusText);
      return r.text();
    });
  }

  frameUrl(frameUrl: string): string {
    // cache-bust so every refresh actually refetches the PNG
    return `${this.baseUrl}${frameUrl}?t=${Date.now()}`;
  }
}
