// Wire types for the /v1 API. Field names mirror the server payloads
// exactly; the UI never invents state the server cannot reproduce.

export type FindingStatus = "pending" | "accepted" | "rejected";

export interface Finding {
  finding_id: string;
  paragraph_id: string;
  doc_id: string;
  category: string;
  probability: number;
  status: FindingStatus;
  comment: string;
  model_version: string;
  text: string;
}

export interface FindingsPayload {
  doc_id: string;
  findings: Record<string, Finding[]>;
  warnings: { paragraph_id: string; category: string; reason: string }[];
  model_versions: Record<string, string | null>;
}

export interface DocumentSummary {
  doc_id: string;
  title: string;
  uploaded_at: number;
  paragraph_count: number;
  analysis_status: string;
}

export interface DocumentRecord {
  doc_id: string;
  title: string;
  uploaded_at: number;
  text: string;
  paragraphs: { paragraph_id: string; text: string }[];
  analysis_status: string;
}

export interface CategoryInfo {
  name: string;
  model_version: string | null;
}

export interface RetrainResponse {
  category: string;
  version: number;
  model_version: string;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  detail?: unknown;
}

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(status: number, body: ApiErrorBody) {
    super(body.message);
    this.code = body.code;
    this.status = status;
  }
}
