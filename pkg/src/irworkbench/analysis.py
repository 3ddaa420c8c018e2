"""Higher-order analyses over the evaluation matrix and qrels.

Covers the query-level and collection-level reports: 11-point interpolated
precision-recall curves, per-query score deltas between runs, correlation
of query characteristics with effectiveness, relevance-judgment
distributions, documents relevant to many queries, and per-document rank
traces across runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import fsum

from scipy import stats as _scipy_stats

from .errors import WorkbenchError
from .measures import EvalMatrix, MeasureSpec
from .trec_io import QrelsStore, QuerySet, RunStore

NO_EVALUABLE_QUERIES = "NO_EVALUABLE_QUERIES"
UNKNOWN_RUN = "UNKNOWN_RUN"
UNKNOWN_MEASURE = "UNKNOWN_MEASURE"
INSUFFICIENT_DATA = "INSUFFICIENT_DATA"
CONSTANT_INPUT = "CONSTANT_INPUT"
DOC_NOT_FOUND = "DOC_NOT_FOUND"
INVALID_PARAMETER = "INVALID_PARAMETER"

RECALL_LEVELS = tuple(i / 10 for i in range(11))


@dataclass(frozen=True)
class PRCurve:
    """Interpolated precision at the 11 standard recall levels."""

    precision: tuple[float, ...]
    qid: str | None = None  # None marks the averaged curve
    recall_levels: tuple[float, ...] = RECALL_LEVELS

    def to_json(self) -> dict:
        return {
            "recall_levels": list(self.recall_levels),
            "precision": list(self.precision),
            "scope": "averaged" if self.qid is None else f"query:{self.qid}",
        }


def _query_pr_points(doc_ids, relevant: set[str]) -> list[tuple[float, float]]:
    """Raw (recall, precision) points at each relevant retrieved rank."""
    points = []
    hits = 0
    for i, doc in enumerate(doc_ids, start=1):
        if doc in relevant:
            hits += 1
            points.append((hits / len(relevant), hits / i))
    return points


def _interpolate(points: list[tuple[float, float]]) -> tuple[float, ...]:
    out = []
    for level in RECALL_LEVELS:
        best = 0.0
        for recall, precision in points:
            if recall >= level and precision > best:
                best = precision
        out.append(best)
    return tuple(out)


def interpolated_pr_curve(
    run: RunStore, qrels: QrelsStore, rel_threshold: int = 1
) -> tuple[dict[str, PRCurve], PRCurve]:
    """Per-query 11-point interpolated PR curves plus their arithmetic mean.

    Queries without relevant documents are skipped; raises when none remain.
    """
    per_query: dict[str, PRCurve] = {}
    raw_points: dict[str, list[list[float]]] = {}
    for qid in sorted(qrels.judgments):
        relevant = qrels.relevant_docs(qid, rel_threshold)
        if not relevant:
            continue
        points = _query_pr_points(run.doc_ids(qid), relevant)
        per_query[qid] = PRCurve(precision=_interpolate(points), qid=qid)
        raw_points[qid] = [[r, p] for r, p in points]
    if not per_query:
        raise WorkbenchError(NO_EVALUABLE_QUERIES, "no query has relevant documents at this threshold")
    averaged = PRCurve(
        precision=tuple(
            fsum(curve.precision[i] for curve in per_query.values()) / len(per_query) for i in range(11)
        )
    )
    return per_query, averaged


def pr_curve_payload(run: RunStore, qrels: QrelsStore, rel_threshold: int = 1) -> dict:
    per_query, averaged = interpolated_pr_curve(run, qrels, rel_threshold)
    return {
        "run_id": run.run_id,
        "recall_levels": list(RECALL_LEVELS),
        "average": list(averaged.precision),
        "per_query": {qid: list(curve.precision) for qid, curve in per_query.items()},
    }


@dataclass(frozen=True)
class QueryDeltaReport:
    baseline_run_id: str
    comparison_run_id: str
    measure: MeasureSpec
    deltas: tuple[tuple[str, float], ...]  # (qid, delta) sorted by delta desc
    wins: int
    ties: int
    losses: int
    tie_band: float

    def to_json(self) -> dict:
        return {
            "baseline": self.baseline_run_id,
            "comparison": self.comparison_run_id,
            "measure": self.measure.label(),
            "deltas": [[qid, delta] for qid, delta in self.deltas],
            "wins": self.wins,
            "ties": self.ties,
            "losses": self.losses,
            "tie_band": self.tie_band,
        }


def per_query_delta(
    matrix: EvalMatrix,
    baseline: str,
    comparison: str,
    measure: MeasureSpec | str,
    tie_band: float = 1e-9,
) -> QueryDeltaReport:
    """Per-query score difference comparison - baseline, classified by tie band."""
    if tie_band < 0:
        raise WorkbenchError(INVALID_PARAMETER, f"tie_band must be >= 0, got {tie_band}")
    label = measure.label() if isinstance(measure, MeasureSpec) else measure
    for run_id in (baseline, comparison):
        if run_id not in matrix.scores:
            raise WorkbenchError(UNKNOWN_RUN, f"run {run_id!r} not present in evaluation matrix")
    spec = matrix.measure_by_label(label)
    if spec is None:
        raise WorkbenchError(UNKNOWN_MEASURE, f"measure {label!r} not present in evaluation matrix")

    qids = matrix.measure_qids[label]
    deltas = [(qid, matrix.score(comparison, label, qid) - matrix.score(baseline, label, qid)) for qid in qids]
    deltas.sort(key=lambda t: (-t[1], t[0]))
    wins = sum(1 for _, d in deltas if d > tie_band)
    losses = sum(1 for _, d in deltas if d < -tie_band)
    ties = len(deltas) - wins - losses
    return QueryDeltaReport(
        baseline_run_id=baseline,
        comparison_run_id=comparison,
        measure=spec,
        deltas=tuple(deltas),
        wins=wins,
        ties=ties,
        losses=losses,
        tie_band=tie_band,
    )


def correlation(x: list[float], y: list[float], method: str = "pearson") -> tuple[float, float]:
    """Pearson or Spearman correlation with a two-sided t-distribution p-value."""
    if method not in ("pearson", "spearman"):
        raise WorkbenchError(INVALID_PARAMETER, f"unknown correlation method {method!r}")
    n = len(x)
    if n != len(y):
        raise WorkbenchError(INVALID_PARAMETER, "x and y must have equal length")
    if n < 3:
        raise WorkbenchError(INSUFFICIENT_DATA, f"need at least 3 points, got {n}")
    if len(set(x)) == 1 or len(set(y)) == 1:
        raise WorkbenchError(CONSTANT_INPUT, "correlation undefined for constant input")
    if method == "spearman":
        x = list(_scipy_stats.rankdata(x))
        y = list(_scipy_stats.rankdata(y))
        if len(set(x)) == 1 or len(set(y)) == 1:
            raise WorkbenchError(CONSTANT_INPUT, "correlation undefined for constant ranks")
    mx = fsum(x) / n
    my = fsum(y) / n
    cov = fsum((a - mx) * (b - my) for a, b in zip(x, y))
    vx = fsum((a - mx) ** 2 for a in x)
    vy = fsum((b - my) ** 2 for b in y)
    r = cov / math.sqrt(vx * vy)
    r = max(-1.0, min(1.0, r))
    denom = 1.0 - r * r
    if denom <= 0.0:
        p = 0.0
    else:
        t = r * math.sqrt((n - 2) / denom)
        p = 2.0 * float(_scipy_stats.t.sf(abs(t), n - 2))
    return r, min(p, 1.0)


@dataclass(frozen=True)
class LengthBucket:
    min_length: int
    max_length: int
    count: int
    mean_score: float

    def to_json(self) -> dict:
        return {
            "min_length": self.min_length,
            "max_length": self.max_length,
            "count": self.count,
            "mean_score": self.mean_score,
        }


@dataclass(frozen=True)
class QueryLengthReport:
    run_id: str
    measure: MeasureSpec
    points: tuple[tuple[str, int, float], ...]  # (qid, token length, score)
    buckets: tuple[LengthBucket, ...]
    pearson: tuple[float, float] | None
    spearman: tuple[float, float] | None
    warnings: tuple[str, ...]

    def to_json(self) -> dict:
        return {
            "run_id": self.run_id,
            "measure": self.measure.label(),
            "points": [[q, l, s] for q, l, s in self.points],
            "buckets": [b.to_json() for b in self.buckets],
            "pearson": list(self.pearson) if self.pearson else None,
            "spearman": list(self.spearman) if self.spearman else None,
            "warnings": list(self.warnings),
        }


def query_length_analysis(
    queries: QuerySet,
    matrix: EvalMatrix,
    run_id: str,
    measure: MeasureSpec | str,
    n_buckets: int = 4,
) -> QueryLengthReport:
    """Relate whitespace-token query length to per-query effectiveness.

    Queries are split into equal-frequency buckets (ties share the lower
    bucket) and correlated with scores by both Pearson and Spearman.
    """
    if n_buckets < 2:
        raise WorkbenchError(INVALID_PARAMETER, f"n_buckets must be >= 2, got {n_buckets}")
    label = measure.label() if isinstance(measure, MeasureSpec) else measure
    if run_id not in matrix.scores:
        raise WorkbenchError(UNKNOWN_RUN, f"run {run_id!r} not present in evaluation matrix")
    spec = matrix.measure_by_label(label)
    if spec is None:
        raise WorkbenchError(UNKNOWN_MEASURE, f"measure {label!r} not present in evaluation matrix")

    warnings: list[str] = []
    text_by_qid = {rec.qid: rec.text for rec in queries.records}
    matched: list[tuple[str, int, float]] = []
    unmatched: list[str] = []
    for qid in matrix.measure_qids[label]:
        if qid in text_by_qid:
            matched.append((qid, len(text_by_qid[qid].split()), matrix.score(run_id, label, qid)))
        else:
            unmatched.append(qid)
    if unmatched:
        warnings.append(f"QID_NOT_IN_QUERIES: {len(unmatched)} evaluated qids missing from the query file")
    if len(matched) < n_buckets:
        raise WorkbenchError(
            INSUFFICIENT_DATA, f"only {len(matched)} matched queries for {n_buckets} buckets"
        )

    by_length = sorted(matched, key=lambda t: (t[1], t[0]))
    n = len(by_length)
    assignments = [min(i * n_buckets // n, n_buckets - 1) for i in range(n)]
    # Ties on length collapse into the bucket of their first occurrence.
    for i in range(1, n):
        if by_length[i][1] == by_length[i - 1][1]:
            assignments[i] = assignments[i - 1]
    buckets = []
    for b in range(n_buckets):
        members = [by_length[i] for i in range(n) if assignments[i] == b]
        if not members:
            continue
        buckets.append(
            LengthBucket(
                min_length=members[0][1],
                max_length=members[-1][1],
                count=len(members),
                mean_score=fsum(s for _, _, s in members) / len(members),
            )
        )
    if len(buckets) < n_buckets:
        warnings.append("DEGENERATE_BUCKETS: length ties collapsed some buckets")

    lengths = [float(l) for _, l, _ in matched]
    scores = [s for _, _, s in matched]
    pearson = spearman = None
    try:
        pearson = correlation(lengths, scores, "pearson")
        spearman = correlation(lengths, scores, "spearman")
    except WorkbenchError as exc:
        if exc.code not in (CONSTANT_INPUT, INSUFFICIENT_DATA):
            raise
        warnings.append(f"{exc.code}: correlation skipped ({exc.message})")
    return QueryLengthReport(
        run_id=run_id,
        measure=spec,
        points=tuple(matched),
        buckets=tuple(buckets),
        pearson=pearson,
        spearman=spearman,
        warnings=tuple(warnings),
    )


@dataclass(frozen=True)
class QrelsDistribution:
    grade_histogram: dict[int, int]
    per_query: dict[str, tuple[int, int]]  # qid -> (judged, relevant)
    total_judgments: int
    total_queries: int
    total_relevant: int

    def to_json(self) -> dict:
        return {
            "grade_histogram": {str(g): c for g, c in sorted(self.grade_histogram.items())},
            "per_query": {q: list(jr) for q, jr in self.per_query.items()},
            "total_judgments": self.total_judgments,
            "total_queries": self.total_queries,
            "total_relevant": self.total_relevant,
        }


def qrels_distribution(qrels: QrelsStore, rel_threshold: int = 1) -> QrelsDistribution:
    """Histogram of relevance grades plus per-query judged/relevant counts."""
    histogram: dict[int, int] = {}
    per_query: dict[str, tuple[int, int]] = {}
    for qid in sorted(qrels.judgments):
        docs = qrels.judgments[qid]
        relevant = 0
        for grade in docs.values():
            histogram[grade] = histogram.get(grade, 0) + 1
            if grade >= rel_threshold:
                relevant += 1
        per_query[qid] = (len(docs), relevant)
    return QrelsDistribution(
        grade_histogram=histogram,
        per_query=per_query,
        total_judgments=sum(histogram.values()),
        total_queries=len(per_query),
        total_relevant=sum(r for _, r in per_query.values()),
    )


def multi_query_documents(
    qrels: QrelsStore, min_queries: int = 2, rel_threshold: int = 1
) -> list[tuple[str, list[str]]]:
    """Documents relevant to at least `min_queries` distinct queries."""
    if min_queries < 2:
        raise WorkbenchError(INVALID_PARAMETER, f"min_queries must be >= 2, got {min_queries}")
    doc_qids: dict[str, list[str]] = {}
    for qid in sorted(qrels.judgments):
        for doc_id, grade in qrels.judgments[qid].items():
            if grade >= rel_threshold:
                doc_qids.setdefault(doc_id, []).append(qid)
    shared = [(doc, qids) for doc, qids in doc_qids.items() if len(qids) >= min_queries]
    shared.sort(key=lambda t: (-len(t[1]), t[0]))
    return shared


@dataclass(frozen=True)
class DocRankTrace:
    doc_id: str
    ranks: dict[str, dict[str, int]]  # run_id -> qid -> 1-based canonical rank
    judged_grades: dict[str, int]  # qid -> grade

    def to_json(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "ranks": {run: dict(sorted(qids.items())) for run, qids in self.ranks.items()},
            "judged_grades": dict(sorted(self.judged_grades.items())),
        }


def document_rank_trace(doc_id: str, runs: list[RunStore], qrels: QrelsStore | None) -> DocRankTrace:
    """Where one document ranks in every run, with its judgments attached."""
    if not doc_id:
        raise WorkbenchError(INVALID_PARAMETER, "doc_id must be non-empty")
    ranks: dict[str, dict[str, int]] = {}
    for run in runs:
        per_run: dict[str, int] = {}
        for qid, docs in run.rankings.items():
            for position, (doc, _score) in enumerate(docs, start=1):
                if doc == doc_id:
                    per_run[qid] = position
                    break
        if per_run:
            ranks[run.run_id] = per_run
    grades: dict[str, int] = {}
    if qrels is not None:
        for qid, docs in qrels.judgments.items():
            if doc_id in docs:
                grades[qid] = docs[doc_id]
    if not ranks and not grades:
        raise WorkbenchError(DOC_NOT_FOUND, f"document {doc_id!r} appears in no run and no qrels entry")
    return DocRankTrace(doc_id=doc_id, ranks=ranks, judged_grades=grades)
