"""Parsing, validation, and canonicalization of TREC-style input files.

Three file kinds are ingested: query/topic files (TSV, CSV, or JSONL),
qrels ("qid iter doc_id grade"), and runs ("qid Q0 doc_id rank score
run_id"). Every parser returns the typed store together with a
ValidationReport; a report with errors means the store was rejected and the
parser returned None in its place.

Canonical ranking order is (score descending, doc_id descending), matching
the long-standing trec_eval convention; the rank column in run files is
read for cross-checking only.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace

from .errors import WorkbenchError

# Error / warning codes
EMPTY_FILE = "EMPTY_FILE"
UNKNOWN_FORMAT = "UNKNOWN_FORMAT"
MALFORMED_FILE = "MALFORMED_FILE"
MALFORMED_LINE = "MALFORMED_LINE"
INVALID_ENCODING = "INVALID_ENCODING"
INVALID_QID = "INVALID_QID"
INVALID_DOC_ID = "INVALID_DOC_ID"
EMPTY_TEXT = "EMPTY_TEXT"
NON_INTEGER_GRADE = "NON_INTEGER_GRADE"
NON_NUMERIC_SCORE = "NON_NUMERIC_SCORE"
NON_FINITE_SCORE = "NON_FINITE_SCORE"
INVALID_RANK = "INVALID_RANK"
INVALID_DEPTH = "INVALID_DEPTH"
HEADER_SKIPPED = "HEADER_SKIPPED"
DUPLICATE_QID = "DUPLICATE_QID"
DUPLICATE_JUDGMENT = "DUPLICATE_JUDGMENT"
DUPLICATE_DOC = "DUPLICATE_DOC"
MULTIPLE_RUN_TAGS = "MULTIPLE_RUN_TAGS"
RANK_ORDER_MISMATCH = "RANK_ORDER_MISMATCH"
RUN_MISSING_QID = "RUN_MISSING_QID"
RUN_QID_NOT_IN_QRELS = "RUN_QID_NOT_IN_QRELS"
QRELS_QID_NOT_IN_QUERIES = "QRELS_QID_NOT_IN_QUERIES"
NO_RELEVANT_DOCS = "NO_RELEVANT_DOCS"

# Case-insensitive first-column names that mark a header row.
QID_HEADER_SYNONYMS = frozenset({"qid", "query_id", "topic", "topic_id"})


@dataclass(frozen=True)
class Issue:
    line: int  # 0 for file-scoped issues
    code: str
    message: str

    def to_json(self) -> list:
        return [self.line, self.code, self.message]


@dataclass
class ParseStats:
    lines_read: int = 0  # non-blank candidate record lines
    records_kept: int = 0
    records_dropped: int = 0

    def to_json(self) -> dict:
        return {
            "lines_read": self.lines_read,
            "records_kept": self.records_kept,
            "records_dropped": self.records_dropped,
        }


@dataclass
class ValidationReport:
    errors: list[Issue] = field(default_factory=list)
    warnings: list[Issue] = field(default_factory=list)
    stats: ParseStats = field(default_factory=ParseStats)

    @property
    def ok(self) -> bool:
        return not self.errors

    def error(self, line: int, code: str, message: str) -> None:
        self.errors.append(Issue(line, code, message))

    def warn(self, line: int, code: str, message: str) -> None:
        self.warnings.append(Issue(line, code, message))

    def has_code(self, code: str) -> bool:
        return any(i.code == code for i in self.errors) or any(
            i.code == code for i in self.warnings
        )

    def to_json(self) -> dict:
        return {
            "errors": [i.to_json() for i in self.errors],
            "warnings": [i.to_json() for i in self.warnings],
            "stats": self.stats.to_json(),
        }


@dataclass(frozen=True)
class QueryRecord:
    qid: str
    text: str


@dataclass(frozen=True)
class QuerySet:
    records: tuple[QueryRecord, ...]

    def qids(self) -> list[str]:
        return [r.qid for r in self.records]

    def text_of(self, qid: str) -> str | None:
        for r in self.records:
            if r.qid == qid:
                return r.text
        return None

    def __len__(self) -> int:
        return len(self.records)

    def to_json(self) -> dict:
        return {"records": [[r.qid, r.text] for r in self.records]}

    @classmethod
    def from_json(cls, data: dict) -> "QuerySet":
        return cls(records=tuple(QueryRecord(qid, text) for qid, text in data["records"]))


@dataclass(frozen=True)
class QrelsStore:
    judgments: dict[str, dict[str, int]]  # qid -> doc_id -> grade
    grade_range: tuple[int, int]

    def qids(self) -> list[str]:
        return list(self.judgments)

    def grades(self, qid: str) -> dict[str, int]:
        return self.judgments.get(qid, {})

    def relevant_docs(self, qid: str, rel_threshold: int = 1) -> set[str]:
        return {d for d, g in self.grades(qid).items() if g >= rel_threshold}

    def num_judgments(self) -> int:
        return sum(len(docs) for docs in self.judgments.values())

    def to_json(self) -> dict:
        return {
            "judgments": {q: dict(docs) for q, docs in self.judgments.items()},
            "grade_range": list(self.grade_range),
        }

    @classmethod
    def from_json(cls, data: dict) -> "QrelsStore":
        lo, hi = data["grade_range"]
        return cls(
            judgments={q: {d: int(g) for d, g in docs.items()} for q, docs in data["judgments"].items()},
            grade_range=(int(lo), int(hi)),
        )


@dataclass(frozen=True)
class RunStore:
    run_id: str
    rankings: dict[str, tuple[tuple[str, float], ...]]  # qid -> ((doc_id, score), ...) canonical
    max_depth: int

    def qids(self) -> list[str]:
        return list(self.rankings)

    def ranking(self, qid: str) -> tuple[tuple[str, float], ...]:
        return self.rankings.get(qid, ())

    def doc_ids(self, qid: str) -> list[str]:
        return [doc for doc, _ in self.ranking(qid)]

    def to_json(self) -> dict:
        return {
            "run_id": self.run_id,
            "rankings": {q: [[d, s] for d, s in docs] for q, docs in self.rankings.items()},
            "max_depth": self.max_depth,
        }

    @classmethod
    def from_json(cls, data: dict) -> "RunStore":
        rankings = {
            q: tuple((d, float(s)) for d, s in docs) for q, docs in data["rankings"].items()
        }
        return cls(run_id=data["run_id"], rankings=rankings, max_depth=int(data["max_depth"]))


def canonical_order(entries: list[tuple[str, float]]) -> list[tuple[str, float]]:
    """Sort (doc_id, score) pairs by score desc, then doc_id desc."""
    return sorted(entries, key=lambda e: (-e[1], _reversed_key(e[0])))


def _reversed_key(s: str):
    # Descending lexicographic order for doc ids via negated codepoints.
    return tuple(-ord(c) for c in s)


def _decode_lines(raw: bytes, report: ValidationReport) -> list[tuple[int, str | None]]:
    """Split on newlines, decode each line as UTF-8.

    Returns (line_no, text) with text=None for undecodable lines (an error
    has been recorded). Blank lines are omitted and never counted.
    """
    out: list[tuple[int, str | None]] = []
    for line_no, chunk in enumerate(raw.split(b"\n"), start=1):
        chunk = chunk.rstrip(b"\r")
        if not chunk.strip():
            continue
        try:
            out.append((line_no, chunk.decode("utf-8")))
        except UnicodeDecodeError:
            report.error(line_no, INVALID_ENCODING, "line is not valid UTF-8")
            out.append((line_no, None))
    return out


def _valid_id(token: str) -> bool:
    return bool(token) and not any(c.isspace() for c in token)


# ---------------------------------------------------------------------------
# Queries


def _detect_query_format(first_line: str) -> str | None:
    stripped = first_line.lstrip()
    if stripped.startswith("{"):
        try:
            if isinstance(json.loads(stripped), dict):
                return "jsonl"
        except json.JSONDecodeError:
            pass
    if "\t" in first_line:
        return "tsv"
    if "," in first_line:
        return "csv"
    return None


def _split_query_line(line: str, fmt: str, line_no: int, report: ValidationReport):
    """Return (qid, text) or None after recording a line error."""
    if fmt == "tsv":
        if "\t" not in line:
            report.error(line_no, MALFORMED_LINE, "expected 'qid<TAB>text'")
            return None
        qid, text = line.split("\t", 1)
        return qid.strip(), text
    if fmt == "csv":
        row = next(csv.reader([line]))
        if len(row) != 2:
            report.error(line_no, MALFORMED_LINE, f"expected 2 CSV columns, got {len(row)}")
            return None
        return row[0].strip(), row[1]
    # jsonl
    try:
        obj = json.loads(line)
    except json.JSONDecodeError:
        report.error(line_no, MALFORMED_LINE, "invalid JSON object")
        return None
    if not isinstance(obj, dict) or "qid" not in obj or "text" not in obj:
        report.error(line_no, MALFORMED_LINE, "JSONL object must have 'qid' and 'text' fields")
        return None
    return str(obj["qid"]), str(obj["text"])


def parse_queries(
    raw: bytes, format_hint: str = "auto"
) -> tuple[QuerySet | None, ValidationReport]:
    """Parse a query/topic file into a QuerySet.

    Formats: TSV (qid TAB text), CSV (two columns), JSONL (objects with qid
    and text). ``auto`` detects from the first non-blank line. Duplicate
    qids keep the first occurrence; header rows are skipped with a warning.
    """
    if format_hint not in ("auto", "tsv", "csv", "jsonl"):
        raise WorkbenchError(UNKNOWN_FORMAT, f"unknown format hint {format_hint!r}")
    report = ValidationReport()
    lines = _decode_lines(raw, report)
    report.stats.lines_read = len(lines)
    report.stats.records_dropped = sum(1 for _, text in lines if text is None)
    decoded = [(n, t) for n, t in lines if t is not None]

    if not decoded:
        report.error(0, EMPTY_FILE, "no query records found")
        report.stats.records_dropped = report.stats.lines_read
        return None, report

    fmt = format_hint
    if fmt == "auto":
        detected = _detect_query_format(decoded[0][1])
        if detected is None:
            report.error(0, UNKNOWN_FORMAT, "could not detect query file format (tried jsonl, tsv, csv)")
            report.stats.records_dropped = report.stats.lines_read
            return None, report
        fmt = detected

    records: list[QueryRecord] = []
    seen: set[str] = set()
    for idx, (line_no, line) in enumerate(decoded):
        if idx == 0 and fmt in ("tsv", "csv"):
            first_field = line.split("\t" if fmt == "tsv" else ",", 1)[0].strip().lower()
            if first_field in QID_HEADER_SYNONYMS:
                report.warn(line_no, HEADER_SKIPPED, f"header row skipped (first column {first_field!r})")
                report.stats.records_dropped += 1
                continue
        parsed = _split_query_line(line, fmt, line_no, report)
        if parsed is None:
            report.stats.records_dropped += 1
            continue
        qid, text = parsed
        if not _valid_id(qid):
            report.error(line_no, INVALID_QID, f"invalid qid {qid!r}")
            report.stats.records_dropped += 1
            continue
        text = text.strip()
        if not text:
            report.error(line_no, EMPTY_TEXT, f"empty query text for qid {qid!r}")
            report.stats.records_dropped += 1
            continue
        if qid in seen:
            report.warn(line_no, DUPLICATE_QID, f"duplicate qid {qid!r}; first occurrence kept")
            report.stats.records_dropped += 1
            continue
        seen.add(qid)
        records.append(QueryRecord(qid, text))

    report.stats.records_kept = len(records)
    if not records:
        report.error(0, EMPTY_FILE, "no valid query records")
        return None, report
    if report.errors:
        return None, report
    return QuerySet(records=tuple(records)), report


# ---------------------------------------------------------------------------
# Qrels


def parse_qrels(raw: bytes) -> tuple[QrelsStore | None, ValidationReport]:
    """Parse a qrels file: whitespace-separated "qid iter doc_id grade".

    The iteration column is discarded. Duplicate (qid, doc_id) pairs keep
    the last occurrence with a DUPLICATE_JUDGMENT warning.
    """
    report = ValidationReport()
    lines = _decode_lines(raw, report)
    report.stats.lines_read = len(lines)
    report.stats.records_dropped = sum(1 for _, t in lines if t is None)
    decoded = [(n, t) for n, t in lines if t is not None]

    judgments: dict[str, dict[str, int]] = {}
    malformed = 0
    kept = 0
    for idx, (line_no, line) in enumerate(decoded):
        parts = line.split()
        if idx == 0 and parts and parts[0].lower() in QID_HEADER_SYNONYMS:
            report.warn(line_no, HEADER_SKIPPED, f"header row skipped (first column {parts[0]!r})")
            report.stats.records_dropped += 1
            continue
        if len(parts) != 4:
            report.error(line_no, MALFORMED_LINE, f"expected 4 columns, got {len(parts)}")
            report.stats.records_dropped += 1
            malformed += 1
            continue
        qid, _iter, doc_id, grade_str = parts
        if not _valid_id(qid):
            report.error(line_no, INVALID_QID, f"invalid qid {qid!r}")
            report.stats.records_dropped += 1
            malformed += 1
            continue
        try:
            grade = int(grade_str)
        except ValueError:
            report.error(line_no, NON_INTEGER_GRADE, f"non-integer grade {grade_str!r}")
            report.stats.records_dropped += 1
            malformed += 1
            continue
        per_query = judgments.setdefault(qid, {})
        if doc_id in per_query:
            report.warn(
                line_no,
                DUPLICATE_JUDGMENT,
                f"duplicate judgment for ({qid}, {doc_id}); last occurrence kept",
            )
            report.stats.records_dropped += 1
            kept -= 1
        per_query[doc_id] = grade
        kept += 1

    report.stats.records_kept = kept
    if kept == 0:
        report.error(0, EMPTY_FILE, "no valid qrels records")
        return None, report
    if decoded and malformed * 2 > len(decoded):
        report.error(0, MALFORMED_FILE, "more than half of the lines are malformed; is this a qrels file?")
    if report.errors:
        return None, report

    all_grades = [g for docs in judgments.values() for g in docs.values()]
    store = QrelsStore(judgments=judgments, grade_range=(min(all_grades), max(all_grades)))
    return store, report


# ---------------------------------------------------------------------------
# Runs


def parse_runs(raw: bytes) -> tuple[list[RunStore], ValidationReport]:
    """Parse a run file: whitespace-separated "qid Q0 doc_id rank score run_id".

    Records are grouped by run tag (several tags in one file yield several
    RunStores). Per-query lists are re-sorted to canonical order; when that
    disagrees with the file's rank column a RANK_ORDER_MISMATCH warning is
    emitted once per run. Duplicate (qid, doc_id) pairs within a run keep
    the higher-scored occurrence.
    """
    report = ValidationReport()
    lines = _decode_lines(raw, report)
    report.stats.lines_read = len(lines)
    report.stats.records_dropped = sum(1 for _, t in lines if t is None)
    decoded = [(n, t) for n, t in lines if t is not None]

    # run_id -> qid -> doc_id -> (score, file_rank)
    grouped: dict[str, dict[str, dict[str, tuple[float, int]]]] = {}
    kept = 0
    for idx, (line_no, line) in enumerate(decoded):
        parts = line.split()
        if idx == 0 and parts and parts[0].lower() in QID_HEADER_SYNONYMS:
            report.warn(line_no, HEADER_SKIPPED, f"header row skipped (first column {parts[0]!r})")
            report.stats.records_dropped += 1
            continue
        if len(parts) != 6:
            report.error(line_no, MALFORMED_LINE, f"expected 6 columns, got {len(parts)}")
            report.stats.records_dropped += 1
            continue
        qid, _q0, doc_id, rank_str, score_str, run_id = parts
        if not _valid_id(qid):
            report.error(line_no, INVALID_QID, f"invalid qid {qid!r}")
            report.stats.records_dropped += 1
            continue
        try:
            rank = int(rank_str)
            if rank < 1:
                raise ValueError
        except ValueError:
            report.error(line_no, INVALID_RANK, f"rank must be a positive integer, got {rank_str!r}")
            report.stats.records_dropped += 1
            continue
        try:
            score = float(score_str)
        except ValueError:
            report.error(line_no, NON_NUMERIC_SCORE, f"non-numeric score {score_str!r}")
            report.stats.records_dropped += 1
            continue
        if not math.isfinite(score):
            report.error(line_no, NON_FINITE_SCORE, f"score must be finite, got {score_str!r}")
            report.stats.records_dropped += 1
            continue
        per_query = grouped.setdefault(run_id, {}).setdefault(qid, {})
        if doc_id in per_query:
            old_score, old_rank = per_query[doc_id]
            report.warn(
                line_no,
                DUPLICATE_DOC,
                f"duplicate document {doc_id!r} for qid {qid!r} in run {run_id!r}; higher score kept",
            )
            report.stats.records_dropped += 1
            if score > old_score:
                per_query[doc_id] = (score, rank)
            continue
        per_query[doc_id] = (score, rank)
        kept += 1

    report.stats.records_kept = kept
    if kept == 0:
        report.error(0, EMPTY_FILE, "no valid run records")
        return [], report
    if len(grouped) > 1:
        report.warn(0, MULTIPLE_RUN_TAGS, f"file contains {len(grouped)} run tags: {sorted(grouped)}")

    stores: list[RunStore] = []
    for run_id in grouped:
        rankings: dict[str, tuple[tuple[str, float], ...]] = {}
        mismatch = False
        for qid, docs in grouped[run_id].items():
            entries = [(doc, score) for doc, (score, _rank) in docs.items()]
            ordered = canonical_order(entries)
            rankings[qid] = tuple(ordered)
            file_order = [doc for doc, _ in sorted(docs.items(), key=lambda kv: (kv[1][1], kv[0]))]
            if file_order != [doc for doc, _ in ordered]:
                mismatch = True
        if mismatch:
            report.warn(
                0,
                RANK_ORDER_MISMATCH,
                f"run {run_id!r}: file rank column disagrees with canonical (score desc, doc_id desc) order",
            )
        max_depth = max((len(docs) for docs in rankings.values()), default=0)
        stores.append(RunStore(run_id=run_id, rankings=rankings, max_depth=max_depth))

    if report.errors:
        return [], report
    stores.sort(key=lambda s: s.run_id)
    return stores, report


# ---------------------------------------------------------------------------
# Serialization (round-trip counterparts of the parsers)


def format_run(run: RunStore) -> bytes:
    """Serialize a RunStore back to 6-column TREC text in canonical order."""
    out = io.StringIO()
    for qid in sorted(run.rankings):
        for rank, (doc_id, score) in enumerate(run.rankings[qid], start=1):
            out.write(f"{qid} Q0 {doc_id} {rank} {score!r} {run.run_id}\n")
    return out.getvalue().encode("utf-8")


def format_qrels(qrels: QrelsStore) -> bytes:
    out = io.StringIO()
    for qid in sorted(qrels.judgments):
        for doc_id in sorted(qrels.judgments[qid]):
            out.write(f"{qid} 0 {doc_id} {qrels.judgments[qid][doc_id]}\n")
    return out.getvalue().encode("utf-8")


def format_queries(queries: QuerySet) -> bytes:
    out = io.StringIO()
    for rec in queries.records:
        out.write(f"{rec.qid}\t{rec.text}\n")
    return out.getvalue().encode("utf-8")


# ---------------------------------------------------------------------------
# Cross-file alignment and depth truncation


def validate_alignment(
    queries: QuerySet | None,
    qrels: QrelsStore | None,
    runs: list[RunStore],
    rel_threshold: int = 1,
) -> ValidationReport:
    """Cross-check uploaded files; emits warnings only, never errors.

    Analysis proceeds on intersections regardless of alignment gaps, so the
    report exists purely to surface surprises to the user.
    """
    report = ValidationReport()
    if qrels is None:
        return report
    qrels_qids = set(qrels.judgments)
    if queries is not None:
        missing = qrels_qids - set(queries.qids())
        for qid in sorted(missing):
            report.warn(0, QRELS_QID_NOT_IN_QUERIES, f"qrels qid {qid!r} not present in query file")
    for run in runs:
        run_qids = set(run.rankings)
        for qid in sorted(run_qids - qrels_qids):
            report.warn(0, RUN_QID_NOT_IN_QRELS, f"run {run.run_id!r} qid {qid!r} has no judgments")
        for qid in sorted(qrels_qids - run_qids):
            report.warn(0, RUN_MISSING_QID, f"run {run.run_id!r} retrieved nothing for judged qid {qid!r}")
    for qid in sorted(qrels_qids):
        if not qrels.relevant_docs(qid, rel_threshold):
            report.warn(
                0, NO_RELEVANT_DOCS, f"qid {qid!r} has no relevant documents at grade >= {rel_threshold}"
            )
    return report


def truncate_run(run: RunStore, depth: int) -> RunStore:
    """Keep only the top `depth` entries of each per-query ranking."""
    if depth < 1:
        raise WorkbenchError(INVALID_DEPTH, f"depth must be >= 1, got {depth}")
    rankings = {qid: docs[:depth] for qid, docs in run.rankings.items()}
    max_depth = max((len(d) for d in rankings.values()), default=0)
    return replace(run, rankings=rankings, max_depth=max_depth)
