// Table renderers: payload JSON in, HTML string out. Every numeric cell
// carries the raw payload value in data-value, so displayed numbers are
// always traceable to a server field.

import { escapeHtml, fmt6 } from "./format.js";
import type {
  DeltaPayload,
  EvaluatePayload,
  MultiQueryDocsPayload,
  QrelsDistributionPayload,
  QueryLengthPayload,
  RankTracePayload,
  SignificancePayload,
  TokenFrequenciesPayload,
} from "./types.js";

function numCell(value: number): string {
  return `<td class="num" data-value="${String(value)}">${fmt6(value)}</td>`;
}

export function renderPerformanceTable(
  payload: EvaluatePayload,
  significance: SignificancePayload | null = null,
): string {
  const runs = [...payload.run_ids].sort();
  const measures = [...payload.measures].sort();
  const sigMarks = new Map<string, boolean>();
  if (significance) {
    for (const row of significance.rows) sigMarks.set(row.comparison, row.significant);
  }
  const head = ["run", ...measures].map((h) => `<th>${escapeHtml(h)}</th>`).join("");
  const body = runs
    .map((run) => {
      const mark = sigMarks.get(run) ? ' <span class="sig" title="significant vs baseline">*</span>' : "";
      const cells = measures
        .map((m) => {
          const mean = payload.means[run][m];
          const ci = payload.mean_ci?.[run]?.[m];
          const band = ci ? `<span class="ci"> [${fmt6(ci[0])}, ${fmt6(ci[1])}]</span>` : "";
          return `<td class="num" data-value="${String(mean)}">${fmt6(mean)}${band}</td>`;
        })
        .join("");
      return `<tr><td>${escapeHtml(run)}${mark}</td>${cells}</tr>`;
    })
    .join("");
  const note =
    `<p class="note">${payload.eval_qids.length} queries averaged, ` +
    `${payload.excluded_qids.length} excluded (no relevant documents)</p>`;
  return `<table id="performance-table"><thead><tr>${head}</tr></thead><tbody>${body}</tbody></table>${note}`;
}

export function renderSignificanceTable(payload: SignificancePayload): string {
  const head = ["comparison", "test", "statistic", "p", "adjusted p", "significant"]
    .map((h) => `<th>${escapeHtml(h)}</th>`)
    .join("");
  const body = payload.rows
    .map(
      (row) =>
        `<tr><td>${escapeHtml(row.comparison)}</td><td>${escapeHtml(row.test)}</td>` +
        `${numCell(row.statistic)}${numCell(row.p)}${numCell(row.adjusted_p)}` +
        `<td>${row.significant ? "yes" : "no"}</td></tr>`,
    )
    .join("");
  const caption =
    `<p class="note">baseline ${escapeHtml(payload.baseline)}, measure ${escapeHtml(payload.measure)}, ` +
    `${escapeHtml(payload.correction)} correction, alpha ${payload.alpha}</p>`;
  return `<table id="significance-table"><thead><tr>${head}</tr></thead><tbody>${body}</tbody></table>${caption}`;
}

export function renderDeltaSummary(payload: DeltaPayload): string {
  return (
    `<p id="delta-summary">${payload.wins} wins / ${payload.ties} ties / ${payload.losses} losses ` +
    `(${escapeHtml(payload.comparison)} vs ${escapeHtml(payload.baseline)}, ${escapeHtml(payload.measure)})</p>`
  );
}

export function renderDeltaTable(payload: DeltaPayload): string {
  const body = payload.deltas
    .map(([qid, delta]) => `<tr><td>${escapeHtml(qid)}</td>${numCell(delta)}</tr>`)
    .join("");
  return `<table id="delta-table"><thead><tr><th>qid</th><th>delta</th></tr></thead><tbody>${body}</tbody></table>`;
}

export function renderTokenTable(payload: TokenFrequenciesPayload, limit = 30): string {
  const body = payload.entries
    .slice(0, limit)
    .map(([token, count]) => `<tr><td>${escapeHtml(token)}</td><td class="num" data-value="${count}">${count}</td></tr>`)
    .join("");
  return `<table id="token-table"><thead><tr><th>token</th><th>count</th></tr></thead><tbody>${body}</tbody></table>`;
}

export function renderLengthTable(payload: QueryLengthPayload): string {
  const body = payload.buckets
    .map(
      (b) =>
        `<tr><td>${b.min_length}–${b.max_length}</td>` +
        `<td class="num" data-value="${b.count}">${b.count}</td>${numCell(b.mean_score)}</tr>`,
    )
    .join("");
  const correlations = [
    payload.pearson ? `Pearson r=${fmt6(payload.pearson[0])} (p=${fmt6(payload.pearson[1])})` : null,
    payload.spearman ? `Spearman r=${fmt6(payload.spearman[0])} (p=${fmt6(payload.spearman[1])})` : null,
  ]
    .filter((s) => s !== null)
    .join("; ");
  const warnings = payload.warnings.map((w) => `<p class="note">${escapeHtml(w)}</p>`).join("");
  return (
    `<table id="length-table"><thead><tr><th>length</th><th>queries</th><th>mean ${escapeHtml(payload.measure)}</th></tr></thead>` +
    `<tbody>${body}</tbody></table><p class="note">${correlations}</p>${warnings}`
  );
}

export function renderDistributionTable(payload: QrelsDistributionPayload): string {
  const grades = Object.keys(payload.grade_histogram).sort((a, b) => Number(a) - Number(b));
  const body = grades
    .map(
      (g) =>
        `<tr><td>${escapeHtml(g)}</td>` +
        `<td class="num" data-value="${payload.grade_histogram[g]}">${payload.grade_histogram[g]}</td></tr>`,
    )
    .join("");
  const totals = `<p class="note">${payload.total_judgments} judgments, ${payload.total_queries} queries, ${payload.total_relevant} relevant</p>`;
  return `<table id="distribution-table"><thead><tr><th>grade</th><th>judgments</th></tr></thead><tbody>${body}</tbody></table>${totals}`;
}

export function renderMultiDocTable(payload: MultiQueryDocsPayload): string {
  if (payload.documents.length === 0) {
    return `<p class="note" id="multidoc-table">No document is relevant to multiple queries.</p>`;
  }
  const body = payload.documents
    .map(
      ([doc, qids]) =>
        `<tr><td>${escapeHtml(doc)}</td><td class="num" data-value="${qids.length}">${qids.length}</td>` +
        `<td>${qids.map(escapeHtml).join(", ")}</td></tr>`,
    )
    .join("");
  return `<table id="multidoc-table"><thead><tr><th>doc</th><th>queries</th><th>qids</th></tr></thead><tbody>${body}</tbody></table>`;
}

export function renderRankTraceTable(payload: RankTracePayload): string {
  const rows: string[] = [];
  for (const run of Object.keys(payload.ranks).sort()) {
    for (const qid of Object.keys(payload.ranks[run]).sort()) {
      const grade = payload.judged_grades[qid];
      rows.push(
        `<tr><td>${escapeHtml(run)}</td><td>${escapeHtml(qid)}</td>` +
          `<td class="num" data-value="${payload.ranks[run][qid]}">${payload.ranks[run][qid]}</td>` +
          `<td>${grade === undefined ? "unjudged" : grade}</td></tr>`,
      );
    }
  }
  return (
    `<table id="trace-table"><thead><tr><th>run</th><th>qid</th><th>rank</th><th>grade</th></tr></thead>` +
    `<tbody>${rows.join("")}</tbody></table>`
  );
}
