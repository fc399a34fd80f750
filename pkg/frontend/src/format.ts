/** Pure display helpers for the summary panel. */

import type { AssessmentSummary } from "./types.js";

export function formatPercent(fraction: number): string {
  return `${(100 * fraction).toFixed(1)}%`;
}

export interface SummaryRow {
  label: string;
  value: string;
}

export function summaryRows(summary: AssessmentSummary): SummaryRow[] {
  const rows: SummaryRow[] = [
    { label: "Annotations", value: String(summary.total_annotations) },
    { label: "Unfaithful", value: formatPercent(summary.unfaithful_fraction) },
    { label: "Shortcut questions", value: formatPercent(summary.shortcut_fraction) },
  ];
  for (const [category, fraction] of Object.entries(summary.category_split)) {
    rows.push({ label: `· ${category}`, value: formatPercent(fraction) });
  }
  for (const [hop, fraction] of Object.entries(summary.per_hop_unfaithful)) {
    rows.push({ label: `Unfaithful at ${hop}-hop`, value: formatPercent(fraction) });
  }
  return rows;
}
