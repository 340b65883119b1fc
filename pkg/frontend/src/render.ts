// Pure HTML-string renderers. Keeping these free of DOM state makes the
// view a function of the store and keeps them testable without a browser.

import { DocumentSummary, Finding } from "./types.js";
import { GroupedFindings, ReviewState } from "./state.js";

export function escapeHtml(raw: string): string {
  return raw
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

/** Probability shown to 2 decimals; the exact value rides on a data attribute. */
export function probabilityBar(probability: number): string {
  const percent = Math.max(0, Math.min(100, probability * 100));
  return (
    `<span class="prob-bar" data-probability="${probability}">` +
    `<span class="prob-fill" style="width:${percent.toFixed(1)}%"></span>` +
    `<span class="prob-label">${probability.toFixed(2)}</span>` +
    `</span>`
  );
}

export function statusBadge(finding: Finding, locked: boolean): string {
  const label = locked && finding.status === "pending" ? "saving" : finding.status;
  return `<span class="badge badge-${escapeHtml(label)}">${escapeHtml(label)}</span>`;
}

export function renderFinding(finding: Finding, locked: boolean): string {
  const disabled = finding.status !== "pending" || locked ? " disabled" : "";
  const comment = finding.comment
    ? `<p class="comment">${escapeHtml(finding.comment)}</p>`
    : "";
  return (
    `<li class="finding" data-finding-id="${escapeHtml(finding.finding_id)}">` +
    `<div class="finding-head">${probabilityBar(finding.probability)}` +
    `${statusBadge(finding, locked)}` +
    `<span class="model-version">${escapeHtml(finding.model_version)}</span></div>` +
    `<p class="paragraph">${escapeHtml(finding.text)}</p>` +
    comment +
    `<div class="controls">` +
    `<button class="accept"${disabled} data-action="accept">Accept</button>` +
    `<button class="reject"${disabled} data-action="reject">Reject</button>` +
    `<input class="comment-box" type="text" placeholder="comment"${disabled}>` +
    `</div>` +
    `</li>`
  );
}

export function renderGroup(group: GroupedFindings, inFlight: Record<string, string>): string {
  const version = group.modelVersion
    ? `<span class="model-version">model ${escapeHtml(group.modelVersion)}</span>`
    : "";
  const items = group.findings
    .map((f) => renderFinding(f, Boolean(inFlight[f.finding_id])))
    .join("");
  return (
    `<section class="category" data-category="${escapeHtml(group.category)}">` +
    `<h2>${escapeHtml(group.category)} ${version} ` +
    `<button data-action="retrain" data-category="${escapeHtml(group.category)}">Retrain</button></h2>` +
    `<ul class="findings">${items}</ul>` +
    `</section>`
  );
}

export function renderFindings(state: ReviewState): string {
  const total = state.groups.reduce((n, g) => n + g.findings.length, 0);
  if (total === 0) {
    return `<p class="empty">No risk paragraphs found.</p>`;
  }
  const warnings = state.warnings.length
    ? `<p class="warnings">${state.warnings.length} paragraph(s) skipped: ` +
      state.warnings.map((w) => escapeHtml(w.paragraph_id)).join(", ") +
      `</p>`
    : "";
  return warnings + state.groups.map((g) => renderGroup(g, state.inFlight)).join("");
}

export function renderDocumentList(documents: DocumentSummary[], selected: string | null): string {
  if (documents.length === 0) {
    return `<p class="empty">No documents uploaded yet.</p>`;
  }
  const rows = documents
    .map((d) => {
      const active = d.doc_id === selected ? " active" : "";
      return (
        `<li class="doc${active}" data-doc-id="${escapeHtml(d.doc_id)}">` +
        `<span class="title">${escapeHtml(d.title || d.doc_id)}</span>` +
        `<span class="meta">${d.paragraph_count} paragraphs, ${escapeHtml(d.analysis_status)}</span>` +
        `</li>`
      );
    })
    .join("");
  return `<ul class="documents">${rows}</ul>`;
}

export function renderBanner(banner: string | null): string {
  if (!banner) return "";
  return `<div class="banner" role="alert">${escapeHtml(banner)} <button data-action="dismiss">x</button></div>`;
}

export function renderOriginalText(text: string): string {
  return `<pre class="original">${escapeHtml(text)}</pre>`;
}
