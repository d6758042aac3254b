import type { CompressRequest, CompressResponse, Pattern } from "./types.js";

export class ApiError extends Error {
  constructor(public readonly status: number,
              public readonly code: string,
              message: string) {
    super(message);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/**
 * Thin JSON client for the simulation service. A fetch implementation is
 * injected so tests can replay recorded responses or talk to a live server.
 */
export class ApiClient {
  constructor(private readonly baseUrl: string,
              private readonly fetchImpl: FetchLike = (u, i) => fetch(u, i)) {}

  private async post<T>(path: string, payload: unknown,
                        signal?: AbortSignal): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
      signal,
    });
    const body = await response.json();
    if (!response.ok) {
      throw new ApiError(response.status, body.error ?? "unknown",
                         body.message ?? "request failed");
    }
    return body as T;
  }

  compress(request: CompressRequest, signal?: AbortSignal): Promise<CompressResponse> {
    return this.post<CompressResponse>("/api/v1/compress", request, signal);
  }

  discretize(pattern: Pattern, resolution: [number, number],
             signal?: AbortSignal): Promise<{ dispensed: number[][] }> {
    return this.post("/api/v1/discretize", { pattern, resolution }, signal);
  }

  async health(): Promise<{ status: string; model_loaded: boolean; version: string }> {
    const response = await this.fetchImpl(`${this.baseUrl}/api/v1/health`, {});
    return response.json();
  }
}
