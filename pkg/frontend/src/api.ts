import type { ChatResponse, ChatSettings, HealthStatus } from "./types";

export class ApiError extends Error {
  constructor(
    message: string,
    public readonly kind: "validation" | "server",
    public readonly retryable: boolean,
  ) {
    super(message);
  }
}

/** Thin client for the backend's /v1 endpoints. */
export class ApiClient {
  constructor(private readonly baseUrl: string) {}

  async chat(query: string, settings: ChatSettings): Promise<ChatResponse> {
    let res: Response;
    try {
      res = await fetch(`${this.baseUrl}/v1/chat`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({
          query,
          top_k: settings.topK,
          threshold: settings.threshold,
        }),
      });
    } catch (err) {
      throw new ApiError(`network error: ${String(err)}`, "server", true);
    }
    if (res.status === 400) {
      const body = await res.json().catch(() => ({ message: "invalid request" }));
      throw new ApiError(body.message ?? "invalid request", "validation", false);
    }
    if (!res.ok) {
      throw new ApiError(`server error ${res.status}`, "server", true);
    }
    return (await res.json()) as ChatResponse;
  }

  async health(): Promise<HealthStatus> {
    const res = await fetch(`${this.baseUrl}/v1/health`);
    if (!res.ok) {
      throw new ApiError(`health check failed (${res.status})`, "server", true);
    }
    return (await res.json()) as HealthStatus;
  }

  async corpusStats(): Promise<Record<string, unknown>> {
    const res = await fetch(`${this.baseUrl}/v1/corpus/stats`);
    if (!res.ok) {
      throw new ApiError(`stats unavailable (${res.status})`, "server", true);
    }
    return (await res.json()) as Record<string, unknown>;
  }
}
