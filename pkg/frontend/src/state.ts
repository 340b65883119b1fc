// View-model for the review console. All state here is reconstructible from
// server responses: the store caches the latest payloads, tracks in-flight
// optimistic review updates and reverts them when the server declines.

import { ApiClient } from "./api.js";
import {
  ApiError,
  CategoryInfo,
  DocumentRecord,
  DocumentSummary,
  Finding,
  FindingsPayload,
} from "./types.js";

export interface GroupedFindings {
  category: string;
  modelVersion: string | null;
  findings: Finding[];
}

export function groupAndSort(payload: FindingsPayload): GroupedFindings[] {
  const categories = Object.keys(payload.findings).sort();
  return categories.map((category) => ({
    category,
    modelVersion: payload.model_versions[category] ?? null,
    findings: [...payload.findings[category]].sort(
      (a, b) => b.probability - a.probability,
    ),
  }));
}

export interface ReviewState {
  documents: DocumentSummary[];
  categories: CategoryInfo[];
  selectedDoc: DocumentRecord | null;
  groups: GroupedFindings[];
  warnings: FindingsPayload["warnings"];
  // finding_id -> in-flight verdict; controls lock while present and stay
  // locked once the finding leaves "pending".
  inFlight: Record<string, "accept" | "reject">;
  banner: string | null;
  busy: boolean;
}

type Listener = (state: ReviewState) => void;

export class ReviewStore {
  private state: ReviewState = {
    documents: [],
    categories: [],
    selectedDoc: null,
    groups: [],
    warnings: [],
    inFlight: {},
    banner: null,
    busy: false,
  };
  private listeners: Listener[] = [];

  constructor(private readonly api: ApiClient) {}

  getState(): ReviewState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private update(patch: Partial<ReviewState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state);
  }

  private fail(error: unknown): void {
    const message =
      error instanceof ApiError ? `${error.code}: ${error.message}` : String(error);
    this.update({ banner: message, busy: false });
  }

  dismissBanner(): void {
    this.update({ banner: null });
  }

  async refreshDocuments(): Promise<void> {
    try {
      const [docs, cats] = await Promise.all([
        this.api.listDocuments(),
        this.api.listCategories(),
      ]);
      this.update({ documents: docs.documents, categories: cats.categories });
    } catch (error) {
      this.fail(error);
    }
  }

  async openDocument(docId: string): Promise<void> {
    this.update({ busy: true });
    try {
      const doc = await this.api.getDocument(docId);
      const payload = await this.api.getFindings(docId);
      this.update({
        selectedDoc: doc,
        groups: groupAndSort(payload),
        warnings: payload.warnings,
        inFlight: {},
        banner: null,
        busy: false,
      });
    } catch (error) {
      this.fail(error);
    }
  }

  async upload(text: string, title: string): Promise<void> {
    this.update({ busy: true });
    try {
      const doc = await this.api.uploadDocument(text, title);
      await this.refreshDocuments();
      await this.openDocument(doc.doc_id);
    } catch (error) {
      this.fail(error);
    }
  }

  async analyze(categories: string[] | null, threshold: number): Promise<void> {
    const doc = this.state.selectedDoc;
    if (!doc) return;
    this.update({ busy: true });
    try {
      const payload = await this.api.analyze(doc.doc_id, categories, threshold);
      this.update({
        groups: groupAndSort(payload),
        warnings: payload.warnings,
        banner: null,
        busy: false,
      });
      await this.refreshDocuments();
    } catch (error) {
      this.fail(error);
    }
  }

  private findFinding(findingId: string): Finding | null {
    for (const group of this.state.groups) {
      for (const finding of group.findings) {
        if (finding.finding_id === findingId) return finding;
      }
    }
    return null;
  }

  private replaceFinding(findingId: string, next: Finding): void {
    this.update({
      groups: this.state.groups.map((group) => ({
        ...group,
        findings: group.findings.map((f) =>
          f.finding_id === findingId ? next : f,
        ),
      })),
    });
  }

  /** One verdict, one API call; optimistic flip with revert on error. */
  async submitReview(
    findingId: string,
    verdict: "accept" | "reject",
    comment: string,
  ): Promise<boolean> {
    const current = this.findFinding(findingId);
    if (!current || current.status !== "pending" || this.state.inFlight[findingId]) {
      return false; // locked: reviewed findings cannot be re-reviewed via the UI
    }
    const optimistic: Finding = {
      ...current,
      status: verdict === "accept" ? "accepted" : "rejected",
      comment,
    };
    this.update({ inFlight: { ...this.state.inFlight, [findingId]: verdict } });
    this.replaceFinding(findingId, optimistic);
    try {
      const confirmed = await this.api.review(findingId, verdict, comment);
      this.replaceFinding(findingId, { ...confirmed, text: current.text });
      return true;
    } catch (error) {
      this.replaceFinding(findingId, current); // revert
      this.fail(error);
      return false;
    } finally {
      const { [findingId]: _, ...rest } = this.state.inFlight;
      this.update({ inFlight: rest });
    }
  }

  async triggerRetrain(category: string, seed?: number): Promise<void> {
    this.update({ busy: true });
    try {
      const result = await this.api.retrain(category, seed);
      this.update({
        categories: this.state.categories.map((c) =>
          c.name === category ? { ...c, model_version: result.model_version } : c,
        ),
        groups: this.state.groups.map((g) =>
          g.category === category ? { ...g, modelVersion: result.model_version } : g,
        ),
        banner: null,
        busy: false,
      });
    } catch (error) {
      this.fail(error);
    }
  }

  async downloadExport(format: "csv" | "text"): Promise<string | null> {
    const doc = this.state.selectedDoc;
    if (!doc) return null;
    try {
      return await this.api.exportReport(doc.doc_id, format);
    } catch (error) {
      this.fail(error);
      return null;
    }
  }
}
