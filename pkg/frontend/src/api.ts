/** Typed client for the evolution service's JSON API. */

export interface Mobility {
  mobile: boolean;
  period: number;
  displacement: [number, number];
}

export interface Clip {
  candidate: string;
  width: number;
  height: number;
  stride: number;
  steps: number;
  frames: string[];
  rewards: Record<string, number[]>;
  total_reward: number;
  mobility: Mobility;
}

export interface SessionSummary {
  id: string;
  generation: number;
  status: string;
  population: number;
  candidates: string[];
  votes_cast: number;
  steps: number;
  rule: string;
  obs_h: number;
  obs_w: number;
}

export interface Gallery extends SessionSummary {
  clips: Clip[];
}

export class ApiError extends Error {
  constructor(public status: number, public error: string, detail: string) {
    super(detail || error);
  }
}

async function request<T>(url: string, body?: unknown): Promise<T> {
  const resp = await fetch(url, body === undefined ? {} : {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  const payload = await resp.json();
  if (!resp.ok) {
    throw new ApiError(resp.status, payload.error ?? "unknown",
      payload.detail ?? "");
  }
  return payload as T;
}

export class Client {
  constructor(public base: string) {}

  createSession(config: Record<string, unknown>): Promise<Gallery> {
    return request<Gallery>(`${this.base}/sessions`, config);
  }

  getSession(id: string): Promise<SessionSummary> {
    return request<SessionSummary>(`${this.base}/sessions/${id}`);
  }

  getClip(id: string, candidate: string): Promise<Clip> {
    return request<Clip>(`${this.base}/sessions/${id}/candidates/${candidate}`);
  }

  /** Ranking is best-first; returns the next generation's gallery. */
  submitVotes(id: string, ranking: string[]): Promise<Gallery> {
    return request<Gallery>(`${this.base}/sessions/${id}/votes`, { ranking });
  }

  healthz(): Promise<{ ok: boolean }> {
    return request<{ ok: boolean }>(`${this.base}/healthz`);
  }
}
