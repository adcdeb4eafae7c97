// Thin typed client over the service HTTP API. The console talks to the
// service and nothing else; model backends are never reached directly.

import type {
  AskEnvelope,
  ClipInfo,
  HealthResponse,
  SessionInfo,
  TraceResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    message: string,
    public readonly status: number,
    public readonly role: string | null = null,
    public readonly branch: string | null = null,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class NetworkError extends Error {
  readonly retryable = true;
  constructor(message: string) {
    super(message);
    this.name = "NetworkError";
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, {
        headers: { "Content-Type": "application/json" },
        ...init,
      });
    } catch (cause) {
      throw new NetworkError(`service unreachable: ${String(cause)}`);
    }
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      const detail = (body as { detail?: Record<string, unknown> }).detail ?? {};
      throw new ApiError(
        String(detail["error"] ?? `HTTP ${response.status}`),
        response.status,
        (detail["role"] as string | null) ?? null,
        (detail["branch"] as string | null) ?? null,
      );
    }
    return body as T;
  }

  health(): Promise<HealthResponse> {
    return this.request<HealthResponse>("/healthz");
  }

  listClips(): Promise<ClipInfo[]> {
    return this.request<{ clips: ClipInfo[] }>("/clips").then((body) => body.clips);
  }

  createSession(clipId: string): Promise<SessionInfo> {
    return this.request<SessionInfo>("/sessions", {
      method: "POST",
      body: JSON.stringify({ clip_id: clipId }),
    });
  }

  createSessionFromManifest(manifest: Record<string, unknown>): Promise<SessionInfo> {
    return this.request<SessionInfo>("/sessions", {
      method: "POST",
      body: JSON.stringify({ manifest }),
    });
  }

  ask(sessionId: string, question: string, overrides?: Record<string, unknown>): Promise<AskEnvelope> {
    return this.request<AskEnvelope>(`/sessions/${sessionId}/ask`, {
      method: "POST",
      body: JSON.stringify(overrides ? { question, overrides } : { question }),
    });
  }

  fetchTrace(sessionId: string): Promise<TraceResponse> {
    return this.request<TraceResponse>(`/sessions/${sessionId}/trace`);
  }
}
