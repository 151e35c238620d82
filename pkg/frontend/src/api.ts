/**
 * Typed client for the screenloop service API (schema version 1).
 *
 * The UI never computes or caches model scores; every call here maps onto
 * exactly one server-side operation, so replaying the requests of a session
 * against a fresh server reproduces the same event log.
 */

export interface UploadSummary {
  n_records: number;
  n_rejected: number;
  format: string;
}

export interface SearchHit {
  row_id: number;
  title: string;
  abstract_snippet: string;
  labeled?: boolean;
}

export interface NextRecord {
  row_id: number;
  title: string;
  abstract: string;
  model_version: number;
}

export interface ProgressInfo {
  project_id: string;
  name: string;
  n_labeled: number;
  n_relevant: number;
  n_irrelevant: number;
  n_total: number;
  last_model_version: number;
  recall_proxy: number[];
  busy: boolean;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly errorCode: string,
    message: string,
    readonly detail?: unknown,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

interface ErrorBody {
  error_code?: string;
  message?: string;
  detail?: unknown;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    rawBody?: BodyInit,
  ): Promise<T | null> {
    const init: RequestInit = { method };
    if (rawBody !== undefined) {
      init.body = rawBody;
      init.headers = { "Content-Type": "application/octet-stream" };
    } else if (body !== undefined) {
      init.body = JSON.stringify(body);
      init.headers = { "Content-Type": "application/json" };
    }
    const response = await this.fetchImpl(this.baseUrl + path, init);
    if (response.status === 204) {
      return null;
    }
    const text = await response.text();
    const parsed = text ? (JSON.parse(text) as T & ErrorBody) : ({} as T & ErrorBody);
    if (!response.ok) {
      throw new ApiError(
        response.status,
        parsed.error_code ?? "unknown_error",
        parsed.message ?? `request failed with status ${response.status}`,
        parsed.detail,
      );
    }
    return parsed;
  }

  async health(): Promise<boolean> {
    try {
      await this.request<{ status: string }>("GET", "/api/health");
      return true;
    } catch {
      return false;
    }
  }

  async createProject(name: string): Promise<string> {
    const created = await this.request<{ project_id: string }>(
      "POST",
      "/api/projects",
      { name },
    );
    return created!.project_id;
  }

  async uploadDataset(
    projectId: string,
    data: BodyInit,
    format?: "csv" | "ris",
  ): Promise<UploadSummary> {
    const query = format ? `?format=${format}` : "";
    const summary = await this.request<UploadSummary>(
      "POST",
      `/api/projects/${projectId}/dataset${query}`,
      undefined,
      data,
    );
    return summary!;
  }

  async search(projectId: string, q: string, k = 10): Promise<SearchHit[]> {
    const body = await this.request<{ results: SearchHit[] }>(
      "GET",
      `/api/projects/${projectId}/search?q=${encodeURIComponent(q)}&k=${k}`,
    );
    return body!.results;
  }

  async suggest(projectId: string, k = 5): Promise<SearchHit[]> {
    const body = await this.request<{ results: SearchHit[] }>(
      "GET",
      `/api/projects/${projectId}/suggest?k=${k}`,
    );
    return body!.results;
  }

  async setPriors(
    projectId: string,
    included: number[],
    excluded: number[],
  ): Promise<ProgressInfo> {
    const progress = await this.request<ProgressInfo>(
      "POST",
      `/api/projects/${projectId}/priors`,
      { included, excluded },
    );
    return progress!;
  }

  /** Returns null when the pool is exhausted or a stopping rule fired. */
  async next(projectId: string): Promise<NextRecord | null> {
    return this.request<NextRecord>("GET", `/api/projects/${projectId}/next`);
  }

  async label(
    projectId: string,
    rowId: number,
    label: 0 | 1,
  ): Promise<ProgressInfo> {
    const progress = await this.request<ProgressInfo>(
      "POST",
      `/api/projects/${projectId}/labels`,
      { row_id: rowId, label },
    );
    return progress!;
  }

  async progress(projectId: string): Promise<ProgressInfo> {
    const progress = await this.request<ProgressInfo>(
      "GET",
      `/api/projects/${projectId}/progress`,
    );
    return progress!;
  }

  exportUrl(projectId: string, format: "csv" | "ris"): string {
    return `${this.baseUrl}/api/projects/${projectId}/export?format=${format}`;
  }
}
