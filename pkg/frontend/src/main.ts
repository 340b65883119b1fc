// DOM wiring: binds the store to the page and delegates events. The page is
// a single console: repository on the left, findings + original text on the
// right, upload/analyze/export controls on top.

import { ApiClient } from "./api.js";
import { ReviewStore } from "./state.js";
import {
  renderBanner,
  renderDocumentList,
  renderFindings,
  renderOriginalText,
} from "./render.js";

const API_BASE = (window as { RISKVEC_API?: string }).RISKVEC_API ?? "http://127.0.0.1:8000";

const store = new ReviewStore(new ApiClient(API_BASE));

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function render(): void {
  const state = store.getState();
  el("banner").innerHTML = renderBanner(state.banner);
  el("documents").innerHTML = renderDocumentList(
    state.documents,
    state.selectedDoc?.doc_id ?? null,
  );
  el("findings").innerHTML = renderFindings(state);
  el("original").innerHTML = state.selectedDoc
    ? renderOriginalText(state.selectedDoc.text)
    : "";
  const busy = state.busy;
  el<HTMLButtonElement>("analyze-btn").disabled = busy || !state.selectedDoc;
  el<HTMLButtonElement>("export-csv-btn").disabled = busy || !state.selectedDoc;
}

function download(name: string, content: string, mime: string): void {
  const blob = new Blob([content], { type: mime });
  const url = URL.createObjectURL(blob);
  const a = document.createElement("a");
  a.href = url;
  a.download = name;
  a.click();
  URL.revokeObjectURL(url);
}

async function init(): Promise<void> {
  store.subscribe(render);

  el("documents").addEventListener("click", (event) => {
    const row = (event.target as HTMLElement).closest<HTMLElement>("[data-doc-id]");
    if (row) void store.openDocument(row.dataset.docId as string);
  });

  el("banner").addEventListener("click", (event) => {
    const button = (event.target as HTMLElement).closest("[data-action=dismiss]");
    if (button) store.dismissBanner();
  });

  el("findings").addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const retrain = target.closest<HTMLElement>("[data-action=retrain]");
    if (retrain) {
      void store.triggerRetrain(retrain.dataset.category as string);
      return;
    }
    const button = target.closest<HTMLButtonElement>("button[data-action]");
    if (!button || button.disabled) return;
    const item = button.closest<HTMLElement>("[data-finding-id]");
    if (!item) return;
    const comment =
      item.querySelector<HTMLInputElement>(".comment-box")?.value ?? "";
    const verdict = button.dataset.action as "accept" | "reject";
    void store.submitReview(item.dataset.findingId as string, verdict, comment);
  });

  el("upload-btn").addEventListener("click", () => {
    const text = el<HTMLTextAreaElement>("upload-text").value;
    const title = el<HTMLInputElement>("upload-title").value;
    if (text.trim()) void store.upload(text, title);
  });

  el("analyze-btn").addEventListener("click", () => {
    const threshold = Number(el<HTMLInputElement>("threshold").value) || 0.5;
    void store.analyze(null, threshold);
  });

  el("export-csv-btn").addEventListener("click", async () => {
    const content = await store.downloadExport("csv");
    const doc = store.getState().selectedDoc;
    if (content !== null && doc) {
      download(`${doc.doc_id}-findings.csv`, content, "text/csv");
    }
  });

  await store.refreshDocuments();
  render();
}

void init();
