import type {
  WireCriterion,
  WireError,
  WireExplanation,
  WireRanked,
  WireSchema,
  WireSelection,
  WireSpeciesView,
} from "./types";

/** A domain error reported by the service ({code, message, detail}). */
export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly detail: string | null = null,
    readonly status = 400,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = typeof fetch;

/**
 * Thin typed client over the service's JSON API. The UI never computes
 * match results itself; everything it shows comes back from here.
 */
export class ApiClient {
  private token: string | null = null;

  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private async request<T>(path: string, init: RequestInit = {}): Promise<T> {
    const headers: Record<string, string> = {
      "Content-Type": "application/json",
      ...(init.headers as Record<string, string> | undefined),
    };
    if (this.token) headers["X-Session-Token"] = this.token;
    const response = await this.fetchImpl(this.baseUrl + path, { ...init, headers });
    const body = await response.json();
    if (!response.ok) {
      const err = body as WireError;
      throw new ApiError(err.code ?? "Error", err.message ?? "request failed", err.detail ?? null, response.status);
    }
    return body as T;
  }

  async openSession(userId: string): Promise<string> {
    const body = await this.request<{ token: string }>("/sessions", {
      method: "POST",
      body: JSON.stringify({ user_id: userId }),
    });
    this.token = body.token;
    return body.token;
  }

  getSchema(): Promise<WireSchema> {
    return this.request("/schema");
  }

  listSpecies(filter?: string): Promise<{ species: WireSpeciesView[] }> {
    const qs = filter ? `?filter=${encodeURIComponent(filter)}` : "";
    return this.request(`/species${qs}`);
  }

  select(criteria: WireCriterion[], label?: string): Promise<WireSelection> {
    return this.request("/select", {
      method: "POST",
      body: JSON.stringify({ criteria, label: label ?? null }),
    });
  }

  why(selectionId: string, species: string): Promise<WireExplanation> {
    return this.request(
      `/selections/${encodeURIComponent(selectionId)}/why/${encodeURIComponent(species)}`,
    );
  }

  suggestCriteria(k = 5): Promise<{ criteria: WireCriterion[] }> {
    return this.request(`/suggest/criteria?k=${k}`);
  }

  suggestSpecies(k = 5): Promise<{ species: string[] }> {
    return this.request(`/suggest/species?k=${k}`);
  }

  mostReferenced(k = 10): Promise<{ species: WireRanked[] }> {
    return this.request(`/species/most-referenced?k=${k}`);
  }

  postNote(author: string, target: string, body: string): Promise<unknown> {
    return this.request("/notes", {
      method: "POST",
      body: JSON.stringify({ author, target, body }),
    });
  }
}
