// Thin typed client over fetch. Every UI mutation maps onto exactly one
// call here, so replaying the call log against a fresh server reproduces
// the same store state.

import {
  ApiError,
  ApiErrorBody,
  CategoryInfo,
  DocumentRecord,
  DocumentSummary,
  Finding,
  FindingsPayload,
  RetrainResponse,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function parseError(res: Response): Promise<never> {
  let body: ApiErrorBody;
  try {
    body = (await res.json()) as ApiErrorBody;
  } catch {
    body = { code: "http_error", message: `HTTP ${res.status}` };
  }
  throw new ApiError(res.status, body);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async requestJson<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!res.ok) await parseError(res);
    return (await res.json()) as T;
  }

  private postJson<T>(path: string, body: unknown): Promise<T> {
    return this.requestJson<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  listDocuments(): Promise<{ documents: DocumentSummary[] }> {
    return this.requestJson("/v1/documents");
  }

  getDocument(docId: string): Promise<DocumentRecord> {
    return this.requestJson(`/v1/documents/${encodeURIComponent(docId)}`);
  }

  uploadDocument(text: string, title: string): Promise<DocumentRecord> {
    return this.postJson("/v1/documents", { text, title });
  }

  listCategories(): Promise<{ categories: CategoryInfo[] }> {
    return this.requestJson("/v1/categories");
  }

  analyze(
    docId: string,
    categories: string[] | null,
    threshold: number,
  ): Promise<FindingsPayload> {
    return this.postJson(`/v1/documents/${encodeURIComponent(docId)}/analyze`, {
      categories,
      threshold,
    });
  }

  getFindings(docId: string): Promise<FindingsPayload> {
    return this.requestJson(`/v1/documents/${encodeURIComponent(docId)}/findings`);
  }

  review(findingId: string, verdict: "accept" | "reject", comment: string): Promise<Finding> {
    return this.postJson(`/v1/findings/${encodeURIComponent(findingId)}/review`, {
      verdict,
      comment,
    });
  }

  retrain(category: string, seed?: number): Promise<RetrainResponse> {
    return this.postJson(
      `/v1/categories/${encodeURIComponent(category)}/retrain`,
      seed === undefined ? {} : { seed },
    );
  }

  async exportReport(docId: string, format: "csv" | "text"): Promise<string> {
    const res = await this.fetchFn(
      `${this.baseUrl}/v1/documents/${encodeURIComponent(docId)}/export?format=${format}`,
    );
    if (!res.ok) await parseError(res);
    return res.text();
  }
}
