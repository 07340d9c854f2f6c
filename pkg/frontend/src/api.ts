/**
 * Typed client for the catalog service JSON API.
 *
 * Every view in the client is a rendering of one of these responses; nothing
 * is synthesized on the client side.
 */

export interface FactSource {
  kind: "fact";
  subject: string;
  predicate: string;
  object: string;
}

export interface ChunkSource {
  kind: "chunk";
  chunk_id: string;
}

export type Source = FactSource | ChunkSource;

export interface QueryResponse {
  answer: string;
  sources: Source[];
  intent: { kind: string; [key: string]: unknown };
  empty_result: boolean;
}

export interface SessionMessage {
  role: "user" | "system";
  text: string;
  sources: Source[];
}

export interface SessionLog {
  session_id: string;
  created_at: string;
  messages: SessionMessage[];
}

export interface DatasetCard {
  doi: string;
  title: string;
}

export interface ProfileGroup {
  edge_type: string;
  entities: string[];
}

export interface DatasetProfile {
  doi: string;
  title: string;
  properties: Record<string, string | number | boolean>;
  groups: ProfileGroup[];
}

export interface ComparisonRow {
  facet: string;
  cells: Record<string, string[]>;
  same: boolean;
}

export interface ComparisonTable {
  dois: string[];
  facets: string[];
  rows: ComparisonRow[];
}

export interface ManifestEntry {
  path: string;
  size: number | null;
  url: string;
  checksum: string;
}

export interface Manifest {
  doi: string;
  generated_at: string;
  entries: ManifestEntry[];
}

export interface FairCheck {
  principle: "F" | "A" | "I" | "R";
  name: string;
  passed: boolean;
  detail: string;
}

export interface FairAudit {
  doi: string;
  passed: boolean;
  checks: FairCheck[];
}

export interface ChunkDetail {
  id: string;
  source_doi: string;
  source_kind: string;
  section: string;
  text: string;
}

export interface ErrorBody {
  error_code: string;
  message: string;
  details: Record<string, unknown>;
}

/** Service-reported error (4xx/5xx with the documented error shape). */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
    public readonly details: Record<string, unknown> = {},
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** Transport-level failure: the server never answered; nothing was logged. */
export class NetworkFailure extends Error {
  constructor(cause: unknown) {
    super(`service unreachable: ${String(cause)}`);
    this.name = "NetworkFailure";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class CatalogApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (cause) {
      throw new NetworkFailure(cause);
    }
    if (!response.ok) {
      let body: Partial<ErrorBody> = {};
      try {
        body = (await response.json()) as ErrorBody;
      } catch {
        // non-JSON error body: keep the status only
      }
      throw new ApiError(
        response.status,
        body.error_code ?? "Unknown",
        body.message ?? response.statusText,
        body.details ?? {},
      );
    }
    return (await response.json()) as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  createSession(): Promise<{ session_id: string }> {
    return this.post("/sessions", {});
  }

  getSession(sessionId: string): Promise<SessionLog> {
    return this.request(`/sessions/${encodeURIComponent(sessionId)}`);
  }

  sendQuery(sessionId: string, text: string, mode: "Grounded" | "LLM" = "Grounded"): Promise<QueryResponse> {
    return this.post(`/sessions/${encodeURIComponent(sessionId)}/query`, { text, mode });
  }

  listDatasets(): Promise<DatasetCard[]> {
    return this.request("/datasets");
  }

  getProfile(doi: string): Promise<DatasetProfile> {
    return this.request(`/datasets/${doi}`);
  }

  listFiles(doi: string, filters: Record<string, string> = {}): Promise<Record<string, unknown>[]> {
    return this.request(`/datasets/${doi}/files${toQuery(filters)}`);
  }

  compare(dois: string[], facets?: string[]): Promise<ComparisonTable> {
    return this.post("/compare", facets ? { dois, facets } : { dois });
  }

  getManifest(doi: string, filters: Record<string, string> = {}): Promise<Manifest> {
    return this.request(`/datasets/${doi}/manifest${toQuery(filters)}`);
  }

  /** URL for the shell-script rendering; offered as a download link. */
  manifestScriptUrl(doi: string, filters: Record<string, string> = {}): string {
    return `${this.baseUrl}/datasets/${doi}/manifest${toQuery({ ...filters, format: "script" })}`;
  }

  getAudit(doi: string): Promise<FairAudit> {
    return this.request(`/audit/${doi}`);
  }

  getChunk(chunkId: string): Promise<ChunkDetail> {
    return this.request(`/chunks/${chunkId}`);
  }
}

function toQuery(filters: Record<string, string>): string {
  const entries = Object.entries(filters).filter(([, value]) => value !== "");
  if (entries.length === 0) {
    return "";
  }
  const params = new URLSearchParams(entries);
  return `?${params.toString()}`;
}
