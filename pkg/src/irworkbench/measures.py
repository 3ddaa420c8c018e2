"""Retrieval effectiveness measures and the evaluation engine.

Definitions follow trec_eval conventions: AP normalizes by the full recall
base; nDCG uses a log2(rank+1) discount with the ideal ranking truncated at
the evaluation depth; P@k always divides by k; bpref ignores unjudged
documents. Queries with no relevant document at a measure's threshold are
excluded from that measure's average rather than scored zero.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from math import fsum

from .errors import WorkbenchError
from .trec_io import QrelsStore, RunStore

UNKNOWN_MEASURE = "UNKNOWN_MEASURE"
MISSING_CUTOFF = "MISSING_CUTOFF"
UNEXPECTED_CUTOFF = "UNEXPECTED_CUTOFF"
INVALID_CUTOFF = "INVALID_CUTOFF"
INVALID_THRESHOLD = "INVALID_THRESHOLD"
NO_RELEVANT_DOCS = "NO_RELEVANT_DOCS"
NO_EVALUABLE_QUERIES = "NO_EVALUABLE_QUERIES"
DUPLICATE_RUN_ID = "DUPLICATE_RUN_ID"
INVALID_PARAMETER = "INVALID_PARAMETER"

FAMILIES = ("AP", "nDCG", "P", "R", "RR", "Bpref", "Judged")
_CUTOFF_REQUIRED = frozenset({"P", "R", "Judged"})
_CUTOFF_OPTIONAL = frozenset({"nDCG", "RR"})
_SYNONYMS = {
    "ap": "AP",
    "map": "AP",
    "ndcg": "nDCG",
    "p": "P",
    "r": "R",
    "recall": "R",
    "rr": "RR",
    "mrr": "RR",
    "bpref": "Bpref",
    "judged": "Judged",
}

GAIN_LINEAR = "linear"
GAIN_EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class MeasureSpec:
    family: str
    k: int | None = None
    rel_threshold: int = 1
    gain: str = GAIN_LINEAR

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise WorkbenchError(UNKNOWN_MEASURE, f"unknown measure family {self.family!r}")
        if self.family in _CUTOFF_REQUIRED and self.k is None:
            raise WorkbenchError(MISSING_CUTOFF, f"{self.family} requires a cutoff, e.g. {self.family}@10")
        if self.family not in _CUTOFF_REQUIRED | _CUTOFF_OPTIONAL and self.k is not None:
            raise WorkbenchError(UNEXPECTED_CUTOFF, f"{self.family} does not take a cutoff")
        if self.k is not None and self.k < 1:
            raise WorkbenchError(INVALID_CUTOFF, f"cutoff must be >= 1, got {self.k}")
        if self.rel_threshold < 1:
            raise WorkbenchError(INVALID_THRESHOLD, f"rel_threshold must be >= 1, got {self.rel_threshold}")
        if self.gain not in (GAIN_LINEAR, GAIN_EXPONENTIAL):
            raise WorkbenchError(INVALID_PARAMETER, f"unknown gain {self.gain!r}")

    def label(self) -> str:
        """Canonical display/key form, e.g. 'nDCG@10' or 'P@5|rel=2'."""
        s = self.family if self.k is None else f"{self.family}@{self.k}"
        if self.rel_threshold != 1:
            s += f"|rel={self.rel_threshold}"
        if self.family == "nDCG" and self.gain != GAIN_LINEAR:
            s += "|gain=exp"
        return s

    def to_json(self) -> dict:
        return {
            "family": self.family,
            "k": self.k,
            "rel_threshold": self.rel_threshold,
            "gain": self.gain,
        }


def parse_measure_spec(text: str) -> MeasureSpec:
    """Parse the measure grammar NAME or NAME@K (case-insensitive)."""
    text = text.strip()
    if not text:
        raise WorkbenchError(UNKNOWN_MEASURE, "empty measure name")
    name, sep, k_str = text.partition("@")
    family = _SYNONYMS.get(name.strip().lower())
    if family is None:
        raise WorkbenchError(UNKNOWN_MEASURE, f"unknown measure {name.strip()!r}")
    k: int | None = None
    if sep:
        try:
            k = int(k_str)
        except ValueError:
            raise WorkbenchError(INVALID_CUTOFF, f"cutoff must be an integer, got {k_str!r}") from None
    return MeasureSpec(family=family, k=k)


# ---------------------------------------------------------------------------
# Per-query measures. `ranking` is a sequence of doc_ids in canonical order;
# `judged` maps doc_id -> grade for one query. Unjudged documents count as
# non-relevant everywhere except bpref, which skips them.


def _relevant(judged: dict[str, int], rel_threshold: int) -> set[str]:
    return {d for d, g in judged.items() if g >= rel_threshold}


def average_precision(ranking, judged: dict[str, int], rel_threshold: int = 1) -> float:
    rel = _relevant(judged, rel_threshold)
    if not rel:
        raise WorkbenchError(NO_RELEVANT_DOCS, "query has no relevant documents")
    hits = 0
    total = 0.0
    for i, doc in enumerate(ranking, start=1):
        if doc in rel:
            hits += 1
            total += hits / i
    return total / len(rel)


def ndcg(ranking, judged: dict[str, int], k: int | None = None, gain: str = GAIN_LINEAR) -> float:
    positive = sorted((g for g in judged.values() if g > 0), reverse=True)
    if not positive:
        raise WorkbenchError(NO_RELEVANT_DOCS, "query has no positive relevance grades")
    if k is None:
        if not ranking:
            return 0.0
        k = len(ranking)
    if k < 1:
        raise WorkbenchError(INVALID_CUTOFF, f"cutoff must be >= 1, got {k}")

    def g(grade: int) -> float:
        grade = max(grade, 0)  # negative grades judged non-relevant
        return float(grade) if gain == GAIN_LINEAR else float(2**grade - 1)

    dcg = fsum(g(judged.get(doc, 0)) / math.log2(i + 1) for i, doc in enumerate(ranking[:k], start=1))
    idcg = fsum(g(grade) / math.log2(i + 1) for i, grade in enumerate(positive[:k], start=1))
    return dcg / idcg


def precision_at_k(ranking, judged: dict[str, int], k: int, rel_threshold: int = 1) -> float:
    if k < 1:
        raise WorkbenchError(INVALID_CUTOFF, f"cutoff must be >= 1, got {k}")
    rel = _relevant(judged, rel_threshold)
    hits = sum(1 for doc in ranking[:k] if doc in rel)
    return hits / k


def recall_at_k(ranking, judged: dict[str, int], k: int, rel_threshold: int = 1) -> float:
    if k < 1:
        raise WorkbenchError(INVALID_CUTOFF, f"cutoff must be >= 1, got {k}")
    rel = _relevant(judged, rel_threshold)
    if not rel:
        raise WorkbenchError(NO_RELEVANT_DOCS, "query has no relevant documents")
    hits = sum(1 for doc in ranking[:k] if doc in rel)
    return hits / len(rel)


def reciprocal_rank(ranking, judged: dict[str, int], k: int | None = None, rel_threshold: int = 1) -> float:
    rel = _relevant(judged, rel_threshold)
    depth = len(ranking) if k is None else k
    for i, doc in enumerate(ranking[:depth], start=1):
        if doc in rel:
            return 1.0 / i
    return 0.0


def bpref(ranking, judged: dict[str, int], rel_threshold: int = 1) -> float:
    rel = _relevant(judged, rel_threshold)
    if not rel:
        raise WorkbenchError(NO_RELEVANT_DOCS, "query has no relevant documents")
    nonrel = {d for d, g in judged.items() if g < rel_threshold}
    r_count = len(rel)
    denom = min(r_count, len(nonrel))
    total = 0.0
    nonrel_above = 0
    for doc in ranking:
        if doc in rel:
            if denom == 0:
                total += 1.0
            else:
                total += 1.0 - min(nonrel_above, r_count) / denom
        elif doc in nonrel:
            nonrel_above += 1
    return total / r_count


def judged_at_k(ranking, judged: dict[str, int], k: int) -> float:
    if k < 1:
        raise WorkbenchError(INVALID_CUTOFF, f"cutoff must be >= 1, got {k}")
    hits = sum(1 for doc in ranking[:k] if doc in judged)
    return hits / k


def compute_measure(spec: MeasureSpec, ranking, judged: dict[str, int]) -> float:
    if spec.family == "AP":
        return average_precision(ranking, judged, spec.rel_threshold)
    if spec.family == "nDCG":
        return ndcg(ranking, judged, spec.k, spec.gain)
    if spec.family == "P":
        return precision_at_k(ranking, judged, spec.k, spec.rel_threshold)
    if spec.family == "R":
        return recall_at_k(ranking, judged, spec.k, spec.rel_threshold)
    if spec.family == "RR":
        return reciprocal_rank(ranking, judged, spec.k, spec.rel_threshold)
    if spec.family == "Bpref":
        return bpref(ranking, judged, spec.rel_threshold)
    if spec.family == "Judged":
        return judged_at_k(ranking, judged, spec.k)
    raise WorkbenchError(UNKNOWN_MEASURE, f"unknown family {spec.family!r}")


# ---------------------------------------------------------------------------
# Evaluation engine

POLICY_ZERO_FILL = "zero_fill"
POLICY_INTERSECT = "intersect"


@dataclass(frozen=True)
class EvalMatrix:
    """Runs x measures x queries score tensor with per-measure means.

    Measures may exclude different query sets (their relevance thresholds
    can differ), so per-measure qid lists are carried alongside the union
    `eval_qids`. Means average over each measure's own qid list.
    """

    run_ids: tuple[str, ...]
    measures: tuple[MeasureSpec, ...]
    eval_qids: tuple[str, ...]  # union over measures, sorted
    excluded_qids: tuple[str, ...]  # qrels qids evaluable for no measure
    measure_qids: dict[str, tuple[str, ...]]  # label -> sorted qids averaged
    scores: dict[str, dict[str, dict[str, float]]]  # run -> label -> qid -> score
    means: dict[str, dict[str, float]]  # run -> label -> mean
    missing_query_policy: str = POLICY_ZERO_FILL
    labels: tuple[str, ...] = field(default=())

    def score(self, run_id: str, label: str, qid: str) -> float:
        return self.scores[run_id][label][qid]

    def mean(self, run_id: str, label: str) -> float:
        return self.means[run_id][label]

    def measure_by_label(self, label: str) -> MeasureSpec | None:
        for spec in self.measures:
            if spec.label() == label:
                return spec
        return None

    def to_json(self) -> dict:
        return {
            "run_ids": list(self.run_ids),
            "measures": [m.label() for m in self.measures],
            "measure_params": {m.label(): m.to_json() for m in self.measures},
            "eval_qids": list(self.eval_qids),
            "excluded_qids": list(self.excluded_qids),
            "measure_qids": {label: list(qids) for label, qids in self.measure_qids.items()},
            "scores": self.scores,
            "means": self.means,
            "missing_query_policy": self.missing_query_policy,
        }


def _eval_qids_for_spec(spec: MeasureSpec, qrels: QrelsStore) -> list[str]:
    return sorted(
        qid for qid, docs in qrels.judgments.items() if any(g >= spec.rel_threshold for g in docs.values())
    )


def _score_run_measure(
    run: RunStore, qrels: QrelsStore, spec: MeasureSpec, qids: list[str]
) -> dict[str, float]:
    scores: dict[str, float] = {}
    for qid in qids:
        ranking = run.doc_ids(qid)
        if not ranking:
            scores[qid] = 0.0  # zero_fill for queries the run skipped
            continue
        scores[qid] = compute_measure(spec, ranking, qrels.judgments[qid])
    return scores


def evaluate(
    runs: list[RunStore],
    qrels: QrelsStore,
    specs: list[MeasureSpec],
    missing_query_policy: str = POLICY_ZERO_FILL,
    parallel: bool = False,
) -> EvalMatrix:
    """Evaluate every run under every measure spec.

    Deterministic regardless of `parallel`: per-(run, measure) work is
    independent and merged in a fixed order.
    """
    if not specs:
        raise WorkbenchError(INVALID_PARAMETER, "at least one measure spec is required")
    if not runs:
        raise WorkbenchError(INVALID_PARAMETER, "at least one run is required")
    if missing_query_policy not in (POLICY_ZERO_FILL, POLICY_INTERSECT):
        raise WorkbenchError(INVALID_PARAMETER, f"unknown missing_query_policy {missing_query_policy!r}")
    run_ids = [r.run_id for r in runs]
    if len(set(run_ids)) != len(run_ids):
        raise WorkbenchError(DUPLICATE_RUN_ID, f"duplicate run ids in evaluation set: {run_ids}")
    labels = [s.label() for s in specs]
    if len(set(labels)) != len(labels):
        raise WorkbenchError(INVALID_PARAMETER, f"duplicate measure specs: {labels}")

    per_spec_qids: dict[str, list[str]] = {}
    for spec, label in zip(specs, labels):
        qids = _eval_qids_for_spec(spec, qrels)
        if missing_query_policy == POLICY_INTERSECT:
            qids = [q for q in qids if all(q in run.rankings for run in runs)]
        per_spec_qids[label] = qids

    union = sorted(set().union(*per_spec_qids.values()))
    if not union:
        raise WorkbenchError(NO_EVALUABLE_QUERIES, "no query has a relevant document at any requested threshold")
    for spec, label in zip(specs, labels):
        if not per_spec_qids[label]:
            raise WorkbenchError(
                NO_EVALUABLE_QUERIES,
                f"measure {label} has no evaluable queries",
                details={"measure": label},
            )

    tasks = [(run, spec, label) for run in runs for spec, label in zip(specs, labels)]
    if parallel:
        with ThreadPoolExecutor(max_workers=min(8, len(tasks))) as pool:
            task_scores = list(
                pool.map(lambda t: _score_run_measure(t[0], qrels, t[1], per_spec_qids[t[2]]), tasks)
            )
    else:
        task_scores = [_score_run_measure(run, qrels, spec, per_spec_qids[label]) for run, spec, label in tasks]

    scores: dict[str, dict[str, dict[str, float]]] = {rid: {} for rid in run_ids}
    means: dict[str, dict[str, float]] = {rid: {} for rid in run_ids}
    for (run, _spec, label), qid_scores in zip(tasks, task_scores):
        scores[run.run_id][label] = qid_scores
        means[run.run_id][label] = fsum(qid_scores.values()) / len(qid_scores)

    excluded = tuple(sorted(set(qrels.judgments) - set(union)))
    return EvalMatrix(
        run_ids=tuple(run_ids),
        measures=tuple(specs),
        eval_qids=tuple(union),
        excluded_qids=excluded,
        measure_qids={label: tuple(qids) for label, qids in per_spec_qids.items()},
        scores=scores,
        means=means,
        missing_query_policy=missing_query_policy,
        labels=tuple(labels),
    )


def with_overrides(spec: MeasureSpec, rel_threshold: int | None = None, gain: str | None = None) -> MeasureSpec:
    """Apply CLI/API-level default overrides to a parsed spec."""
    out = spec
    if rel_threshold is not None:
        out = replace(out, rel_threshold=rel_threshold)
    if gain is not None and out.family == "nDCG":
        out = replace(out, gain=gain)
    return out
