import type {
  PolicyDetail,
  QueuePage,
  RankingsIndex,
  ReviewAck,
  ReviewBody,
  ScoreTable,
  Stats,
  TripDetail,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export interface QueueQuery {
  page?: number;
  pageSize?: number;
  minScore?: number;
  unreviewedOnly?: boolean;
}

export interface ApiOptions {
  baseUrl?: string;
  fetchImpl?: typeof fetch;
}

export class ApiClient {
  private baseUrl: string;
  private fetchImpl: typeof fetch;

  constructor(options: ApiOptions = {}) {
    this.baseUrl = options.baseUrl ?? "";
    this.fetchImpl =
      options.fetchImpl ?? ((input, init) => globalThis.fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(0, "network_error", String(err));
    }
    const body = await response.json().catch(() => null);
    if (!response.ok) {
      const code = body?.code ?? "error";
      const message = body?.message ?? `request failed (${response.status})`;
      throw new ApiError(response.status, code, message);
    }
    return body as T;
  }

  rankings(): Promise<RankingsIndex> {
    return this.request("/api/rankings");
  }

  queue(date: string, query: QueueQuery = {}): Promise<QueuePage> {
    const params = new URLSearchParams();
    if (query.page !== undefined) params.set("page", String(query.page));
    if (query.pageSize !== undefined)
      params.set("page_size", String(query.pageSize));
    if (query.minScore !== undefined)
      params.set("min_score", String(query.minScore));
    if (query.unreviewedOnly) params.set("unreviewed_only", "true");
    const qs = params.toString();
    return this.request(
      `/api/rankings/${encodeURIComponent(date)}${qs ? "?" + qs : ""}`,
    );
  }

  policy(policyId: string, date?: string): Promise<PolicyDetail> {
    const qs = date ? `?date=${encodeURIComponent(date)}` : "";
    return this.request(`/api/policies/${encodeURIComponent(policyId)}${qs}`);
  }

  trip(policyId: string, tripId: string): Promise<TripDetail> {
    return this.request(
      `/api/policies/${encodeURIComponent(policyId)}/trips/` +
        encodeURIComponent(tripId),
    );
  }

  review(policyId: string, body: ReviewBody): Promise<ReviewAck> {
    return this.request(
      `/api/policies/${encodeURIComponent(policyId)}/review`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      },
    );
  }

  stats(): Promise<Stats> {
    return this.request("/api/stats");
  }

  scoreTable(): Promise<ScoreTable> {
    return this.request("/api/score-table");
  }
}
