/** Pure payload -> HTML-string renderers.
 *
 * Every *text node* these functions emit is taken from the response payload
 * (escaped, split, or number-formatted) — nothing is synthesized. What-if
 * marks are carried as classes/attributes, never as text, so the component
 * tests can assert payload origin for the entire rendered text.
 */

import type { Evidence, RecommendResponse, RecommendedDrug } from "./types.js";
import type { TopKDiff } from "./diff.js";

export function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export const fmtScore = (x: number): string => x.toFixed(4);

/** "Treatments: a | Contraindications: b | Ingredients: c" -> sections. */
export function splitEvidenceSections(text: string): { heading: string; body: string }[] {
  const parts = text.split(" | ");
  const sections: { heading: string; body: string }[] = [];
  for (const part of parts) {
    const colon = part.indexOf(": ");
    if (colon < 0) return [{ heading: "", body: text }];
    sections.push({ heading: part.slice(0, colon), body: part.slice(colon + 2) });
  }
  return sections;
}

function renderEvidence(ev: Evidence): string {
  const sections = splitEvidenceSections(ev.text)
    .map((s) => `<dt>${escapeHtml(s.heading)}</dt><dd>${escapeHtml(s.body)}</dd>`)
    .join("");
  return (
    `<details class="evidence" data-node="${ev.node_index}">` +
    `<summary>${escapeHtml(ev.source_drug_id)} (${fmtScore(ev.score)})</summary>` +
    `<dl>${sections}</dl></details>`
  );
}

export function renderDrug(drug: RecommendedDrug, mark?: "entered" | "dropped"): string {
  const evidence = drug.evidence.map(renderEvidence).join("");
  const markAttr = mark ? ` data-diff="${mark}"` : "";
  return (
    `<li class="drug${mark ? ` drug-${mark}` : ""}"` +
    ` data-drug="${escapeHtml(drug.drug_id)}"${markAttr}>` +
    `<span class="rank">${drug.rank}</span> ` +
    `<span class="label">${escapeHtml(drug.label)}</span> ` +
    `<span class="drug-id">${escapeHtml(drug.drug_id)}</span> ` +
    `<span class="score">${fmtScore(drug.score)}</span>` +
    evidence +
    `</li>`
  );
}

/** Recommendation list in exactly the payload's order. */
export function renderResults(res: RecommendResponse, diff?: TopKDiff): string {
  const entered = new Set(diff?.entered ?? []);
  const items = res.recommendations
    .map((d) => renderDrug(d, entered.has(d.drug_id) ? "entered" : undefined))
    .join("");
  return `<ol class="recommendations">${items}</ol>`;
}

/** Drugs that fell out of the top-k after a what-if change. */
export function renderDropped(diff: TopKDiff, before: RecommendResponse): string {
  if (!diff.dropped.length) return "";
  const byId = new Map(before.recommendations.map((d) => [d.drug_id, d]));
  const items = diff.dropped
    .map((id) => {
      const drug = byId.get(id);
      return drug ? renderDrug(drug, "dropped") : "";
    })
    .join("");
  return `<ol class="dropped-list">${items}</ol>`;
}

export function renderFieldErrors(fields: Record<string, string>): string {
  const items = Object.keys(fields)
    .sort()
    .map((k) => `<li data-field="${escapeHtml(k)}">${escapeHtml(k)}: ${escapeHtml(fields[k])}</li>`)
    .join("");
  return items ? `<ul class="field-errors">${items}</ul>` : "";
}
