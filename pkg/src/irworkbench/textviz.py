"""Query-text analytics: token frequencies, TF-IDF vectors, similarity,
and 2D/3D projection coordinates for the query-text report.

Vectorization is deterministic TF-IDF by default; externally precomputed
embeddings can be imported instead (JSONL or TSV). Projection is PCA via
SVD with a fixed sign convention so repeated runs are byte-identical.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass

import numpy as np

from ._stopwords import ENGLISH_STOPWORDS
from .errors import WorkbenchError
from .trec_io import QuerySet, ValidationReport

ALL_TOKENS_FILTERED = "ALL_TOKENS_FILTERED"
INSUFFICIENT_DATA = "INSUFFICIENT_DATA"
ZERO_VECTOR = "ZERO_VECTOR"
DIMENSION_MISMATCH = "DIMENSION_MISMATCH"
NO_OVERLAP = "NO_OVERLAP"
DEGENERATE_VARIANCE = "DEGENERATE_VARIANCE"
INVALID_PARAMETER = "INVALID_PARAMETER"
MALFORMED_LINE = "MALFORMED_LINE"
MISSING_EMBEDDING = "MISSING_EMBEDDING"
UNMATCHED_QID = "UNMATCHED_QID"

SOURCE_TFIDF = "tfidf"
SOURCE_EXTERNAL = "external"

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Case-folded tokens split on non-alphanumeric boundaries."""
    return _TOKEN_RE.findall(text.casefold())


@dataclass(frozen=True)
class TokenFrequencies:
    entries: tuple[tuple[str, int], ...]  # (token, count), count desc then token asc

    def total(self) -> int:
        return sum(c for _, c in self.entries)

    def to_json(self) -> dict:
        return {"entries": [[t, c] for t, c in self.entries]}


def token_frequencies(
    queries: QuerySet, stopwords: set[str] | None = None, min_token_len: int = 2
) -> TokenFrequencies:
    """Token counts over all query texts, for word-cloud rendering.

    `stopwords=None` selects the bundled English list; pass an empty set to
    disable filtering.
    """
    if len(queries) == 0:
        raise WorkbenchError(INSUFFICIENT_DATA, "query set is empty")
    if stopwords is None:
        stopwords = ENGLISH_STOPWORDS
    counts: dict[str, int] = {}
    for rec in queries.records:
        for token in tokenize(rec.text):
            if len(token) < min_token_len or token in stopwords:
                continue
            counts[token] = counts.get(token, 0) + 1
    if not counts:
        raise WorkbenchError(ALL_TOKENS_FILTERED, "no tokens survive the stopword/length filters")
    entries = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return TokenFrequencies(entries=tuple(entries))


@dataclass(frozen=True)
class QueryVectors:
    qids: tuple[str, ...]
    vocabulary: tuple[str, ...]
    vectors: np.ndarray  # len(qids) x len(vocabulary), rows L2-normalized
    source: str

    def vector_of(self, qid: str) -> np.ndarray:
        return self.vectors[self.qids.index(qid)]

    def to_json(self) -> dict:
        return {
            "qids": list(self.qids),
            "vocabulary": list(self.vocabulary),
            "vectors": [[float(x) for x in row] for row in self.vectors],
            "source": self.source,
        }


def _l2_normalize_rows(mat: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0  # zero rows stay zero
    return mat / norms


def tfidf_vectors(queries: QuerySet) -> QueryVectors:
    """TF-IDF query vectors: tf = raw count, idf = ln((1+N)/(1+df)) + 1."""
    if len(queries) < 2:
        raise WorkbenchError(INSUFFICIENT_DATA, f"need at least 2 queries, got {len(queries)}")
    token_lists = {rec.qid: tokenize(rec.text) for rec in queries.records}
    vocab = sorted({t for tokens in token_lists.values() for t in tokens})
    index = {t: i for i, t in enumerate(vocab)}
    n = len(queries)
    df = np.zeros(len(vocab))
    for tokens in token_lists.values():
        for t in set(tokens):
            df[index[t]] += 1
    idf = np.log((1 + n) / (1 + df)) + 1.0
    mat = np.zeros((n, len(vocab)))
    for row, rec in enumerate(queries.records):
        for t in token_lists[rec.qid]:
            mat[row, index[t]] += 1.0
    mat *= idf
    return QueryVectors(
        qids=tuple(queries.qids()),
        vocabulary=tuple(vocab),
        vectors=_l2_normalize_rows(mat),
        source=SOURCE_TFIDF,
    )


def cosine_similarity(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise WorkbenchError(DIMENSION_MISMATCH, f"vector shapes differ: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise WorkbenchError(ZERO_VECTOR, "cosine similarity undefined for zero vectors")
    return float(np.dot(u, v) / (nu * nv))


@dataclass(frozen=True)
class Projection:
    qids: tuple[str, ...]
    dims: int
    coordinates: np.ndarray  # len(qids) x dims
    explained_variance_ratio: tuple[float, ...]

    def to_json(self) -> dict:
        return {
            "qids": list(self.qids),
            "dims": self.dims,
            "coordinates": [[float(x) for x in row] for row in self.coordinates],
            "explained_variance_ratio": list(self.explained_variance_ratio),
        }


def pca_project(vectors: QueryVectors, dims: int = 2) -> Projection:
    """Project query vectors onto their top principal axes.

    Axes beyond the data's rank (or n-1) carry zero coordinates and zero
    explained variance. Each axis is sign-flipped so its largest-magnitude
    component is positive, making the output deterministic.
    """
    if dims not in (2, 3):
        raise WorkbenchError(INVALID_PARAMETER, f"dims must be 2 or 3, got {dims}")
    n = len(vectors.qids)
    if n < 2:
        raise WorkbenchError(INSUFFICIENT_DATA, f"need at least 2 queries, got {n}")
    mat = np.asarray(vectors.vectors, dtype=np.float64)
    centered = mat - mat.mean(axis=0, keepdims=True)
    total_variance = float(np.sum(centered**2))
    if total_variance == 0.0:
        raise WorkbenchError(DEGENERATE_VARIANCE, "all query vectors are identical")
    _u, s, vt = np.linalg.svd(centered, full_matrices=False)
    keep = min(dims, len(s))
    axes = vt[:keep]
    for i in range(keep):
        pivot = int(np.argmax(np.abs(axes[i])))
        if axes[i, pivot] < 0:
            axes[i] = -axes[i]
    coords = centered @ axes.T
    ratios = [float(s[i] ** 2 / total_variance) for i in range(keep)]
    if keep < dims:
        coords = np.hstack([coords, np.zeros((n, dims - keep))])
        ratios.extend([0.0] * (dims - keep))
    return Projection(
        qids=vectors.qids,
        dims=dims,
        coordinates=coords,
        explained_variance_ratio=tuple(ratios),
    )


def _parse_embedding_line(line: str, line_no: int, report: ValidationReport):
    """Return (qid, list-of-floats) or None after recording a line error."""
    stripped = line.lstrip()
    if stripped.startswith("{"):
        try:
            obj = json.loads(stripped)
            qid = str(obj["qid"])
            vec = [float(x) for x in obj["vector"]]
            return qid, vec
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            report.error(line_no, MALFORMED_LINE, "expected JSONL object with 'qid' and 'vector'")
            return None
    if "\t" not in line:
        report.error(line_no, MALFORMED_LINE, "expected 'qid<TAB>v1,v2,...'")
        return None
    qid, _tab, rest = line.partition("\t")
    try:
        vec = [float(x) for x in rest.split(",")]
    except ValueError:
        report.error(line_no, MALFORMED_LINE, "vector components must be numeric")
        return None
    return qid.strip(), vec


def load_embeddings(raw: bytes, queries: QuerySet) -> tuple[QueryVectors | None, ValidationReport]:
    """Load externally computed query embeddings (JSONL or TSV).

    Rows are matched to the QuerySet by qid, L2-normalized, and returned in
    query-file order. Queries lacking an embedding are excluded with a
    warning.
    """
    report = ValidationReport()
    lines = [(i, l) for i, l in enumerate(raw.decode("utf-8", errors="replace").split("\n"), 1) if l.strip()]
    report.stats.lines_read = len(lines)
    if not lines:
        report.error(0, "EMPTY_FILE", "no embedding records found")
        return None, report

    by_qid: dict[str, list[float]] = {}
    dim: int | None = None
    for line_no, line in lines:
        parsed = _parse_embedding_line(line, line_no, report)
        if parsed is None:
            report.stats.records_dropped += 1
            continue
        qid, vec = parsed
        if not all(math.isfinite(x) for x in vec):
            report.error(line_no, "NON_FINITE_SCORE", f"embedding for {qid!r} has non-finite components")
            report.stats.records_dropped += 1
            continue
        if dim is None:
            dim = len(vec)
        elif len(vec) != dim:
            raise WorkbenchError(
                DIMENSION_MISMATCH, f"embedding dimensions differ: {dim} vs {len(vec)} (line {line_no})"
            )
        if all(x == 0.0 for x in vec):
            report.warn(line_no, ZERO_VECTOR, f"zero vector for qid {qid!r} excluded")
            report.stats.records_dropped += 1
            continue
        by_qid[qid] = vec
        report.stats.records_kept += 1

    query_qids = queries.qids()
    matched = [q for q in query_qids if q in by_qid]
    if not matched:
        raise WorkbenchError(NO_OVERLAP, "no embedding qid matches the query set")
    for q in query_qids:
        if q not in by_qid:
            report.warn(0, MISSING_EMBEDDING, f"query {q!r} has no embedding; excluded from vectors")
    for q in sorted(set(by_qid) - set(query_qids)):
        report.warn(0, UNMATCHED_QID, f"embedding qid {q!r} not present in the query set; ignored")
    if report.errors:
        return None, report

    mat = _l2_normalize_rows(np.asarray([by_qid[q] for q in matched], dtype=np.float64))
    vectors = QueryVectors(
        qids=tuple(matched),
        vocabulary=tuple(f"dim{i}" for i in range(dim or 0)),
        vectors=mat,
        source=SOURCE_EXTERNAL,
    )
    return vectors, report
