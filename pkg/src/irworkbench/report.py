"""Deterministic exports: CSV tables and the self-contained HTML summary.

Tables use fixed 6-decimal formatting; full precision lives in the JSON
export. The HTML report embeds the manifest, every requested table, and the
raw chart data, references nothing over the network, and renders
byte-identically for the same session state and pinned timestamp.
"""

from __future__ import annotations

import csv
import html
import io
from datetime import datetime, timezone

from . import jsoncanon
from .errors import WorkbenchError
from .measures import EvalMatrix
from .session import STATE_DONE, AnalysisSession

EMPTY_RESULTS = "EMPTY_RESULTS"
NO_RESULTS = "NO_RESULTS"
INVALID_PARAMETER = "INVALID_PARAMETER"

SECTION_TITLES = {
    "performance": "Experiment Performance Report",
    "query": "Query-based Report",
    "text": "Query Text-based Report",
    "collection": "Query Collection-based Report",
}
SECTION_ORDER = ("performance", "query", "text", "collection")
SECTION_KINDS = {
    "performance": ("evaluate", "significance", "pr_curve"),
    "query": ("query_delta",),
    "text": ("token_frequencies", "projection", "query_length"),
    "collection": ("qrels_distribution", "multi_query_documents", "document_rank_trace"),
}

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f")


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def _matrix_view(matrix: EvalMatrix | dict) -> dict:
    return matrix.to_json() if isinstance(matrix, EvalMatrix) else matrix


def eval_table_csv(matrix: EvalMatrix | dict) -> bytes:
    """Per-query and mean scores as `run_id,measure,qid,score` rows.

    Rows are sorted by (run_id, measure, qid) with the `ALL` mean row last
    in each (run, measure) group.
    """
    view = _matrix_view(matrix)
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["run_id", "measure", "qid", "score"])
    for run_id in sorted(view["run_ids"]):
        for label in sorted(view["measures"]):
            qid_scores = view["scores"][run_id][label]
            for qid in sorted(qid_scores):
                writer.writerow([run_id, label, qid, _fmt(qid_scores[qid])])
            writer.writerow([run_id, label, "ALL", _fmt(view["means"][run_id][label])])
    return out.getvalue().encode("utf-8")


def significance_table_csv(rows: list[dict]) -> bytes:
    """Comparison rows as CSV; one row per (baseline, comparison, measure)."""
    if not rows:
        raise WorkbenchError(EMPTY_RESULTS, "no significance results to export")
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["baseline", "comparison", "measure", "test", "statistic", "p", "adjusted_p", "significant"])
    for row in rows:
        writer.writerow(
            [
                row["baseline"],
                row["comparison"],
                row["measure"],
                row["test"],
                _fmt(row["statistic"]),
                _fmt(row["p"]),
                _fmt(row["adjusted_p"]),
                "true" if row["significant"] else "false",
            ]
        )
    return out.getvalue().encode("utf-8")


# ---------------------------------------------------------------------------
# HTML report


_CSS = """
body { font-family: Georgia, 'Times New Roman', serif; margin: 2rem auto; max-width: 60rem;
       color: #1a1a1a; line-height: 1.45; }
h1 { border-bottom: 3px solid #1a1a1a; padding-bottom: .3rem; }
h2 { border-bottom: 1px solid #999; padding-bottom: .2rem; margin-top: 2.2rem; }
h3 { margin-top: 1.4rem; color: #333; }
table { border-collapse: collapse; margin: .8rem 0; font-size: .92rem; }
th, td { border: 1px solid #bbb; padding: .25rem .6rem; text-align: left; }
th { background: #efefef; }
td.num { text-align: right; font-variant-numeric: tabular-nums; }
.notice { color: #666; font-style: italic; }
.sig { font-weight: bold; }
svg { background: #fdfdfd; border: 1px solid #ddd; margin: .6rem 0; }
@media print { body { margin: 0; max-width: none; } }
"""


def _esc(value) -> str:
    return html.escape(str(value), quote=True)


def _table(headers: list[str], rows: list[list], numeric_from: int | None = None) -> str:
    parts = ["<table><thead><tr>"]
    parts.extend(f"<th>{_esc(h)}</th>" for h in headers)
    parts.append("</tr></thead><tbody>")
    for row in rows:
        parts.append("<tr>")
        for i, cell in enumerate(row):
            cls = ' class="num"' if numeric_from is not None and i >= numeric_from else ""
            parts.append(f"<td{cls}>{_esc(cell)}</td>")
        parts.append("</tr>")
    parts.append("</tbody></table>")
    return "".join(parts)


def _svg_line_chart(series: list[tuple[str, list[float], list[float]]], x_label: str, y_label: str) -> str:
    """Polyline chart over [0,1]x[0,1] data; coordinates fixed to 2 decimals."""
    width, height, pad = 460, 300, 42
    plot_w, plot_h = width - 2 * pad, height - 2 * pad

    def sx(x: float) -> str:
        return f"{pad + x * plot_w:.2f}"

    def sy(y: float) -> str:
        return f"{height - pad - y * plot_h:.2f}"

    parts = [f'<svg width="{width}" height="{height}" viewBox="0 0 {width} {height}" role="img">']
    for i in range(11):
        x = sx(i / 10)
        parts.append(f'<line x1="{x}" y1="{sy(0)}" x2="{x}" y2="{sy(1)}" stroke="#eee"/>')
        y = sy(i / 10)
        parts.append(f'<line x1="{sx(0)}" y1="{y}" x2="{sx(1)}" y2="{y}" stroke="#eee"/>')
    parts.append(f'<line x1="{sx(0)}" y1="{sy(0)}" x2="{sx(1)}" y2="{sy(0)}" stroke="#333"/>')
    parts.append(f'<line x1="{sx(0)}" y1="{sy(0)}" x2="{sx(0)}" y2="{sy(1)}" stroke="#333"/>')
    for i in range(0, 11, 2):
        parts.append(
            f'<text x="{sx(i / 10)}" y="{height - pad + 16}" font-size="10" text-anchor="middle">{i / 10:.1f}</text>'
        )
        parts.append(
            f'<text x="{pad - 6}" y="{sy(i / 10)}" font-size="10" text-anchor="end" dominant-baseline="middle">{i / 10:.1f}</text>'
        )
    parts.append(
        f'<text x="{width / 2:.0f}" y="{height - 6}" font-size="11" text-anchor="middle">{_esc(x_label)}</text>'
    )
    parts.append(
        f'<text x="12" y="{height / 2:.0f}" font-size="11" text-anchor="middle" transform="rotate(-90 12 {height / 2:.0f})">{_esc(y_label)}</text>'
    )
    for idx, (label, xs, ys) in enumerate(series):
        color = _PALETTE[idx % len(_PALETTE)]
        points = " ".join(f"{sx(x)},{sy(y)}" for x, y in zip(xs, ys))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{points}"/>')
        parts.append(
            f'<text x="{width - pad + 4}" y="{pad + 14 * idx + 10}" font-size="10" fill="{color}">{_esc(label)}</text>'
        )
    parts.append("</svg>")
    return "".join(parts)


def _svg_scatter(points: list[tuple[str, float, float]], title: str) -> str:
    width, height, pad = 460, 300, 42
    if not points:
        return ""
    xs = [x for _, x, _ in points]
    ys = [y for _, _, y in points]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    x_span = (x_hi - x_lo) or 1.0
    y_span = (y_hi - y_lo) or 1.0
    parts = [f'<svg width="{width}" height="{height}" viewBox="0 0 {width} {height}" role="img">']
    parts.append(f'<text x="{width / 2:.0f}" y="16" font-size="11" text-anchor="middle">{_esc(title)}</text>')
    for label, x, y in points:
        px = pad + (x - x_lo) / x_span * (width - 2 * pad)
        py = height - pad - (y - y_lo) / y_span * (height - 2 * pad)
        parts.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="3.5" fill="#1f77b4" fill-opacity="0.75"/>')
        parts.append(f'<text x="{px + 5:.2f}" y="{py - 5:.2f}" font-size="9" fill="#555">{_esc(label)}</text>')
    parts.append("</svg>")
    return "".join(parts)


def _render_evaluate(payload: dict) -> str:
    parts = ["<h3>Mean scores</h3>"]
    labels = sorted(payload["measures"])
    headers = ["run"] + labels
    rows = []
    ci = payload.get("mean_ci") or {}
    for run_id in sorted(payload["run_ids"]):
        row = [run_id]
        for label in labels:
            cell = _fmt(payload["means"][run_id][label])
            bounds = ci.get(run_id, {}).get(label)
            if bounds:
                cell += f" [{_fmt(bounds[0])}, {_fmt(bounds[1])}]"
            row.append(cell)
        rows.append(row)
    parts.append(_table(headers, rows, numeric_from=1))
    parts.append(
        f'<p>Queries averaged: {len(payload["eval_qids"])}; excluded (no relevant documents): '
        f'{len(payload["excluded_qids"])}. Missing-query policy: {_esc(payload["missing_query_policy"])}.</p>'
    )
    parts.append("<h3>Per-query scores</h3>")
    headers = ["run", "measure", "qid", "score"]
    rows = []
    for run_id in sorted(payload["run_ids"]):
        for label in labels:
            for qid in sorted(payload["scores"][run_id][label]):
                rows.append([run_id, label, qid, _fmt(payload["scores"][run_id][label][qid])])
    parts.append(_table(headers, rows, numeric_from=3))
    return "".join(parts)


def _render_significance(payload: dict) -> str:
    parts = [
        f'<h3>Significance vs baseline {_esc(payload["baseline"])} '
        f'({_esc(payload["measure"])}, {_esc(payload["test"])}, {_esc(payload["correction"])}, '
        f'&alpha;={payload["alpha"]:g})</h3>'
    ]
    headers = ["comparison", "mean (base)", "mean (comp)", "statistic", "p", "adjusted p", "significant"]
    rows = []
    for row in payload["rows"]:
        rows.append(
            [
                row["comparison"],
                _fmt(row["mean_baseline"]),
                _fmt(row["mean_comparison"]),
                _fmt(row["statistic"]),
                _fmt(row["p"]),
                _fmt(row["adjusted_p"]),
                "yes" if row["significant"] else "no",
            ]
        )
    parts.append(_table(headers, rows, numeric_from=1))
    return "".join(parts)


def _render_pr_curve(payload: dict) -> str:
    levels = payload["recall_levels"]
    series = [(payload["run_id"], levels, payload["average"])]
    parts = [f'<h3>Interpolated precision-recall: {_esc(payload["run_id"])}</h3>']
    parts.append(_svg_line_chart(series, "recall", "precision"))
    headers = ["recall"] + [f"{l:.1f}" for l in levels]
    rows = [["precision"] + [_fmt(p) for p in payload["average"]]]
    parts.append(_table(headers, rows, numeric_from=1))
    return "".join(parts)


def _render_query_delta(payload: dict) -> str:
    parts = [
        f'<h3>Per-query delta: {_esc(payload["comparison"])} vs {_esc(payload["baseline"])} '
        f'({_esc(payload["measure"])})</h3>',
        f'<p>{payload["wins"]} wins / {payload["ties"]} ties / {payload["losses"]} losses '
        f'(tie band {payload["tie_band"]:g})</p>',
    ]
    rows = [[qid, _fmt(delta)] for qid, delta in payload["deltas"]]
    parts.append(_table(["qid", "delta"], rows, numeric_from=1))
    return "".join(parts)


def _render_token_frequencies(payload: dict) -> str:
    entries = payload["entries"][:50]
    parts = ["<h3>Query vocabulary (top tokens)</h3>"]
    parts.append(_table(["token", "count"], [[t, c] for t, c in entries], numeric_from=1))
    return "".join(parts)


def _render_projection(payload: dict) -> str:
    dims = payload["dims"]
    parts = [f'<h3>Query similarity projection ({dims}D, source: {_esc(payload["source"])})</h3>']
    points = [(qid, row[0], row[1]) for qid, row in zip(payload["qids"], payload["coordinates"])]
    parts.append(_svg_scatter(points, "principal axes 1-2"))
    evr = ", ".join(_fmt(v) for v in payload["explained_variance_ratio"])
    parts.append(f"<p>Explained variance ratio: [{evr}]</p>")
    headers = ["qid"] + [f"axis {i + 1}" for i in range(dims)]
    rows = [[qid] + [_fmt(c) for c in row] for qid, row in zip(payload["qids"], payload["coordinates"])]
    parts.append(_table(headers, rows, numeric_from=1))
    return "".join(parts)


def _render_query_length(payload: dict) -> str:
    parts = [
        f'<h3>Query length vs {_esc(payload["measure"])} ({_esc(payload["run_id"])})</h3>',
    ]
    rows = [
        [f'{b["min_length"]}-{b["max_length"]}', b["count"], _fmt(b["mean_score"])] for b in payload["buckets"]
    ]
    parts.append(_table(["token length", "queries", "mean score"], rows, numeric_from=1))
    for name in ("pearson", "spearman"):
        value = payload.get(name)
        if value:
            parts.append(f"<p>{name.capitalize()}: r={_fmt(value[0])}, p={_fmt(value[1])}</p>")
    for warning in payload.get("warnings", []):
        parts.append(f'<p class="notice">{_esc(warning)}</p>')
    return "".join(parts)


def _render_qrels_distribution(payload: dict) -> str:
    parts = ["<h3>Relevance judgment distribution</h3>"]
    rows = [[g, c] for g, c in sorted(payload["grade_histogram"].items(), key=lambda kv: int(kv[0]))]
    parts.append(_table(["grade", "judgments"], rows, numeric_from=1))
    parts.append(
        f'<p>{payload["total_judgments"]} judgments over {payload["total_queries"]} queries; '
        f'{payload["total_relevant"]} relevant.</p>'
    )
    rows = [[qid, jr[0], jr[1]] for qid, jr in sorted(payload["per_query"].items())]
    parts.append(_table(["qid", "judged", "relevant"], rows, numeric_from=1))
    return "".join(parts)


def _render_multi_query_documents(payload: dict) -> str:
    parts = ["<h3>Documents relevant to multiple queries</h3>"]
    if not payload["documents"]:
        parts.append('<p class="notice">No document is relevant to multiple queries.</p>')
    else:
        rows = [[doc, len(qids), ", ".join(qids)] for doc, qids in payload["documents"]]
        parts.append(_table(["doc_id", "queries", "qids"], rows, numeric_from=1))
    return "".join(parts)


def _render_document_rank_trace(payload: dict) -> str:
    parts = [f'<h3>Rank trace for document {_esc(payload["doc_id"])}</h3>']
    rows = []
    for run_id in sorted(payload["ranks"]):
        for qid, rank in sorted(payload["ranks"][run_id].items()):
            grade = payload["judged_grades"].get(qid, "unjudged")
            rows.append([run_id, qid, rank, grade])
    if rows:
        parts.append(_table(["run", "qid", "rank", "grade"], rows, numeric_from=2))
    judged_only = sorted(set(payload["judged_grades"]) - {q for r in payload["ranks"].values() for q in r})
    if judged_only:
        rows = [[qid, payload["judged_grades"][qid]] for qid in judged_only]
        parts.append("<p>Judged but not retrieved:</p>")
        parts.append(_table(["qid", "grade"], rows, numeric_from=1))
    return "".join(parts)


_KIND_RENDERERS = {
    "evaluate": _render_evaluate,
    "significance": _render_significance,
    "pr_curve": _render_pr_curve,
    "query_delta": _render_query_delta,
    "token_frequencies": _render_token_frequencies,
    "projection": _render_projection,
    "query_length": _render_query_length,
    "qrels_distribution": _render_qrels_distribution,
    "multi_query_documents": _render_multi_query_documents,
    "document_rank_trace": _render_document_rank_trace,
}


def build_manifest(session: AnalysisSession, sections: list[str], generated_at: str) -> dict:
    included = []
    for section in sections:
        for kind in SECTION_KINDS[section]:
            for ref, rec in sorted(session.results.items()):
                if rec.kind == kind and rec.state == STATE_DONE:
                    included.append(ref)
    return {
        "session_id": session.session_id,
        "generated_at": generated_at,
        "digest_algorithm": "sha256",
        "inputs": [
            {"kind": rec.kind, "name": rec.name, "digest": rec.digest}
            for _key, rec in sorted(session.uploads.items())
        ],
        "sections": list(sections),
        "parameters": {
            ref: {"kind": session.results[ref].kind, "parameters": session.results[ref].parameters}
            for ref in included
        },
    }


def render_html_report(
    session: AnalysisSession, sections: list[str] | None = None, generated_at: str | None = None
) -> bytes:
    """Self-contained HTML summary of every computed result.

    `generated_at` pins the manifest timestamp; with it pinned, identical
    session state renders byte-identical output.
    """
    if sections is None:
        sections = list(SECTION_ORDER)
    for section in sections:
        if section not in SECTION_TITLES:
            raise WorkbenchError(INVALID_PARAMETER, f"unknown report section {section!r}")
    if not session.has_results():
        raise WorkbenchError(NO_RESULTS, "session has no computed results to report")
    if generated_at is None:
        generated_at = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")

    manifest = build_manifest(session, sections, generated_at)
    done = [rec for _ref, rec in sorted(session.results.items()) if rec.state == STATE_DONE]

    parts = [
        "<!DOCTYPE html>",
        '<html lang="en"><head><meta charset="utf-8">',
        f"<title>IR evaluation report {_esc(session.session_id)}</title>",
        f"<style>{_CSS}</style>",
        "</head><body>",
        "<h1>IR Evaluation Report</h1>",
        f"<p>Session {_esc(session.session_id)} &middot; generated {_esc(generated_at)}</p>",
        "<h2>Manifest</h2>",
        _table(
            ["kind", "name", "sha256"],
            [[i["kind"], i["name"], i["digest"]] for i in manifest["inputs"]],
        ),
        f'<p>Sections: {_esc(", ".join(sections) if sections else "none")}. '
        f"Parameters for every included analysis are embedded in the data block below.</p>",
    ]
    for section in sections:
        parts.append(f'<h2 id="{_esc(section)}">{_esc(SECTION_TITLES[section])}</h2>')
        rendered = False
        for rec in done:
            if rec.kind in SECTION_KINDS[section]:
                parts.append(_KIND_RENDERERS[rec.kind](rec.payload))
                rendered = True
        if not rendered:
            parts.append('<p class="notice">No computed results for this section.</p>')
    data_blob = {
        "manifest": manifest,
        "results": {
            ref: {"kind": rec.kind, "parameters": rec.parameters, "payload": rec.payload}
            for ref, rec in sorted(session.results.items())
            if rec.state == STATE_DONE
        },
    }
    parts.append('<script type="application/json" id="report-data">')
    parts.append(jsoncanon.dumps(data_blob).replace("</", "<\\/"))
    parts.append("</script>")
    parts.append("</body></html>")
    return "\n".join(parts).encode("utf-8")
