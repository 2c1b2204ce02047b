/** Thin typed client for the training service's session endpoints. */

import type { FeedbackToken, LearnerConfig, ScenarioConfig, ServiceErrorBody, SessionDescriptor } from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
    public readonly violations?: string[],
  ) {
    super(message);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class SessionApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<SessionDescriptor> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (!response.ok) {
      let body: ServiceErrorBody | null = null;
      try {
        body = (await response.json()) as ServiceErrorBody;
      } catch {
        // non-JSON error body; fall through to the generic message
      }
      throw new ApiError(
        response.status,
        body?.code ?? "http_error",
        body?.message ?? `request failed with status ${response.status}`,
        body?.violations,
      );
    }
    return (await response.json()) as SessionDescriptor;
  }

  private post(path: string, payload?: unknown): Promise<SessionDescriptor> {
    return this.request(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: payload === undefined ? "{}" : JSON.stringify(payload),
    });
  }

  createSession(scenario: ScenarioConfig, learner: LearnerConfig, seed?: number): Promise<SessionDescriptor> {
    const body: Record<string, unknown> = { scenario, learner };
    if (seed !== undefined) body["seed"] = seed;
    return this.post("/sessions", body);
  }

  getSession(sessionId: string): Promise<SessionDescriptor> {
    return this.request(`/sessions/${sessionId}`);
  }

  postFeedback(sessionId: string, f: FeedbackToken): Promise<SessionDescriptor> {
    return this.post(`/sessions/${sessionId}/feedback`, { f });
  }

  postSelection(sessionId: string, a: number): Promise<SessionDescriptor> {
    return this.post(`/sessions/${sessionId}/selection`, { a });
  }

  postDone(sessionId: string): Promise<SessionDescriptor> {
    return this.post(`/sessions/${sessionId}/done`);
  }
}
