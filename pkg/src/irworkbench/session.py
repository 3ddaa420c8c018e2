"""Analysis sessions: uploaded stores, cached analysis results, persistence.

A session is one user workspace. Results are immutable once computed and
keyed by a digest of (analysis kind, canonical parameters, input digests),
so re-running an identical request is a cache hit. Sessions persist as
canonical JSON, one directory per session, and survive process restarts;
work that was still pending at shutdown is reported as failed.
"""

from __future__ import annotations

import threading
import uuid
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field, replace as _dc_replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import analysis as _analysis
from . import jsoncanon
from . import measures as _measures
from . import stats as _stats
from . import textviz as _textviz
from . import trec_io
from .errors import WorkbenchError
from .trec_io import Issue, ParseStats, QrelsStore, QuerySet, RunStore, ValidationReport

UNKNOWN_SESSION = "UNKNOWN_SESSION"
UNKNOWN_REFERENCE = "UNKNOWN_REFERENCE"
UNKNOWN_ANALYSIS = "UNKNOWN_ANALYSIS"
UNKNOWN_KIND = "UNKNOWN_KIND"
DUPLICATE_RUN_NAME = "DUPLICATE_RUN_NAME"
MISSING_INPUTS = "MISSING_INPUTS"
RESULT_PENDING = "RESULT_PENDING"
RESULT_FAILED = "RESULT_FAILED"
STORAGE_FAILURE = "STORAGE_FAILURE"
PAYLOAD_TOO_LARGE = "PAYLOAD_TOO_LARGE"
INVALID_PARAMETER = "INVALID_PARAMETER"
QRELS_REPLACED = "QRELS_REPLACED"
QUERIES_REPLACED = "QUERIES_REPLACED"
EMBEDDINGS_REPLACED = "EMBEDDINGS_REPLACED"
INTERRUPTED = "INTERRUPTED"

STATE_QUEUED = "queued"
STATE_RUNNING = "running"
STATE_DONE = "done"
STATE_FAILED = "failed"

DEFAULT_MAX_UPLOAD = 512 * 1024 * 1024


def _utcnow() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


@dataclass
class UploadRecord:
    kind: str  # queries | qrels | run | embeddings
    name: str
    digest: str
    validation: ValidationReport

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "name": self.name,
            "digest": self.digest,
            "validation": self.validation.to_json(),
        }


@dataclass
class ResultRecord:
    reference: str
    kind: str
    parameters: dict
    state: str
    payload: dict | None = None
    error: dict | None = None
    created_at: str = ""
    completed_at: str | None = None

    def to_json(self) -> dict:
        return {
            "reference": self.reference,
            "kind": self.kind,
            "parameters": self.parameters,
            "state": self.state,
            "payload": self.payload,
            "error": self.error,
            "created_at": self.created_at,
            "completed_at": self.completed_at,
        }


@dataclass
class AnalysisSession:
    session_id: str
    created_at: str
    modified_at: str
    queries: QuerySet | None = None
    qrels: QrelsStore | None = None
    runs: dict[str, RunStore] = field(default_factory=dict)  # attach name -> store
    embeddings: Any = None  # textviz.QueryVectors | None
    uploads: dict[str, UploadRecord] = field(default_factory=dict)  # "queries", "qrels", "run:<name>", "embeddings"
    results: dict[str, ResultRecord] = field(default_factory=dict)

    def run_list(self) -> list[RunStore]:
        return [self.runs[name] for name in sorted(self.runs)]

    def input_digests(self) -> dict[str, str]:
        return {key: rec.digest for key, rec in sorted(self.uploads.items())}

    def has_results(self) -> bool:
        return any(r.state == STATE_DONE for r in self.results.values())


# ---------------------------------------------------------------------------
# Session serialization (the on-disk format and the export endpoint share it)


def _validation_to_json(v: ValidationReport) -> dict:
    return v.to_json()


def _validation_from_json(data: dict) -> ValidationReport:
    report = ValidationReport()
    report.errors = [Issue(int(l), c, m) for l, c, m in data["errors"]]
    report.warnings = [Issue(int(l), c, m) for l, c, m in data["warnings"]]
    s = data["stats"]
    report.stats = ParseStats(s["lines_read"], s["records_kept"], s["records_dropped"])
    return report


def _vectors_to_json(v) -> dict:
    return v.to_json()


def _vectors_from_json(data: dict):
    return _textviz.QueryVectors(
        qids=tuple(data["qids"]),
        vocabulary=tuple(data["vocabulary"]),
        vectors=np.asarray(data["vectors"], dtype=np.float64).reshape(len(data["qids"]), -1),
        source=data["source"],
    )


def session_to_json(session: AnalysisSession) -> dict:
    uploads: dict[str, Any] = {}
    for key, rec in session.uploads.items():
        entry = rec.to_json()
        if rec.kind == "queries" and session.queries is not None:
            entry["data"] = session.queries.to_json()
        elif rec.kind == "qrels" and session.qrels is not None:
            entry["data"] = session.qrels.to_json()
        elif rec.kind == "run":
            entry["data"] = session.runs[rec.name].to_json()
        elif rec.kind == "embeddings" and session.embeddings is not None:
            entry["data"] = _vectors_to_json(session.embeddings)
        uploads[key] = entry
    return {
        "session_id": session.session_id,
        "created_at": session.created_at,
        "modified_at": session.modified_at,
        "uploads": uploads,
        "results": {ref: rec.to_json() for ref, rec in session.results.items()},
    }


def export_session_json(session: AnalysisSession) -> bytes:
    """Canonical JSON dump of the full session state."""
    return jsoncanon.dump_bytes(session_to_json(session))


def import_session_json(raw: bytes) -> AnalysisSession:
    import json as _json

    data = _json.loads(raw.decode("utf-8"))
    session = AnalysisSession(
        session_id=data["session_id"],
        created_at=data["created_at"],
        modified_at=data["modified_at"],
    )
    for key, entry in data.get("uploads", {}).items():
        rec = UploadRecord(
            kind=entry["kind"],
            name=entry["name"],
            digest=entry["digest"],
            validation=_validation_from_json(entry["validation"]),
        )
        session.uploads[key] = rec
        payload = entry.get("data")
        if payload is None:
            continue
        if rec.kind == "queries":
            session.queries = QuerySet.from_json(payload)
        elif rec.kind == "qrels":
            session.qrels = QrelsStore.from_json(payload)
        elif rec.kind == "run":
            session.runs[rec.name] = RunStore.from_json(payload)
        elif rec.kind == "embeddings":
            session.embeddings = _vectors_from_json(payload)
    for ref, entry in data.get("results", {}).items():
        state = entry["state"]
        record = ResultRecord(
            reference=entry["reference"],
            kind=entry["kind"],
            parameters=entry["parameters"],
            state=state,
            payload=entry.get("payload"),
            error=entry.get("error"),
            created_at=entry.get("created_at", ""),
            completed_at=entry.get("completed_at"),
        )
        if state not in (STATE_DONE, STATE_FAILED):
            record.state = STATE_FAILED
            record.error = {"code": INTERRUPTED, "message": "analysis interrupted by restart", "details": {}}
        session.results[ref] = record
    return session


# ---------------------------------------------------------------------------
# Analysis dispatch

_REQUIRED = object()

# kind -> (required upload kinds, parameter defaults)
ANALYSIS_KINDS: dict[str, tuple[tuple[str, ...], dict[str, Any]]] = {
    "evaluate": (
        ("qrels", "run"),
        {
            "measures": _REQUIRED,
            "missing_query_policy": _measures.POLICY_ZERO_FILL,
            "rel_threshold": 1,
            "gain": _measures.GAIN_LINEAR,
            "bootstrap": {"confidence": 0.95, "iterations": 2000, "seed": 42},
        },
    ),
    "significance": (
        ("qrels", "run"),
        {
            "baseline": _REQUIRED,
            "measure": "AP",
            "test": "t_test",
            "correction": "holm",
            "alpha": 0.05,
            "missing_query_policy": _measures.POLICY_ZERO_FILL,
            "rel_threshold": 1,
            "gain": _measures.GAIN_LINEAR,
        },
    ),
    "pr_curve": (("qrels", "run"), {"run": _REQUIRED, "rel_threshold": 1}),
    "query_delta": (
        ("qrels", "run"),
        {
            "baseline": _REQUIRED,
            "comparison": _REQUIRED,
            "measure": "AP",
            "tie_band": 1e-9,
            "missing_query_policy": _measures.POLICY_ZERO_FILL,
            "rel_threshold": 1,
            "gain": _measures.GAIN_LINEAR,
        },
    ),
    "query_length": (
        ("queries", "qrels", "run"),
        {
            "run": _REQUIRED,
            "measure": "AP",
            "n_buckets": 4,
            "missing_query_policy": _measures.POLICY_ZERO_FILL,
            "rel_threshold": 1,
            "gain": _measures.GAIN_LINEAR,
        },
    ),
    "token_frequencies": (("queries",), {"stopwords": None, "min_token_len": 2}),
    "projection": (("queries",), {"dims": 2, "source": _textviz.SOURCE_TFIDF}),
    "qrels_distribution": (("qrels",), {"rel_threshold": 1}),
    "multi_query_documents": (("qrels",), {"min_queries": 2, "rel_threshold": 1}),
    "document_rank_trace": (("run",), {"doc_id": _REQUIRED}),
}


def canonicalize_parameters(kind: str, params: dict | None) -> dict:
    """Fill defaults and reject unknown keys so equal requests digest equally."""
    if kind not in ANALYSIS_KINDS:
        raise WorkbenchError(UNKNOWN_ANALYSIS, f"unknown analysis kind {kind!r}")
    params = dict(params or {})
    _, defaults = ANALYSIS_KINDS[kind]
    unknown = set(params) - set(defaults)
    if unknown:
        raise WorkbenchError(INVALID_PARAMETER, f"unknown parameters for {kind}: {sorted(unknown)}")
    out: dict[str, Any] = {}
    for key, default in defaults.items():
        if key in params:
            out[key] = params[key]
        elif default is _REQUIRED:
            raise WorkbenchError(INVALID_PARAMETER, f"analysis {kind} requires parameter {key!r}")
        else:
            out[key] = default
    return out


def missing_inputs(session: AnalysisSession, kind: str) -> list[str]:
    required, _ = ANALYSIS_KINDS[kind]
    missing = []
    for need in required:
        if need == "queries" and session.queries is None:
            missing.append("queries")
        elif need == "qrels" and session.qrels is None:
            missing.append("qrels")
        elif need == "run" and not session.runs:
            missing.append("run")
    return missing


def _specs_from_params(measure_names: list[str], rel_threshold: int, gain: str) -> list[_measures.MeasureSpec]:
    return [
        _measures.with_overrides(_measures.parse_measure_spec(name), rel_threshold, gain)
        for name in measure_names
    ]


def _build_matrix(session: AnalysisSession, measure_names: list[str], params: dict) -> _measures.EvalMatrix:
    specs = _specs_from_params(measure_names, params["rel_threshold"], params["gain"])
    return _measures.evaluate(
        session.run_list(), session.qrels, specs, missing_query_policy=params["missing_query_policy"]
    )


def _analyze_evaluate(session: AnalysisSession, params: dict) -> dict:
    matrix = _build_matrix(session, list(params["measures"]), params)
    payload = matrix.to_json()
    boot = params.get("bootstrap")
    if boot:
        ci: dict[str, dict[str, list[float]]] = {}
        for run_id in matrix.run_ids:
            ci[run_id] = {}
            for label in matrix.measure_qids:
                scores = [matrix.score(run_id, label, q) for q in matrix.measure_qids[label]]
                if len(scores) >= 2:
                    lo, hi = _stats.bootstrap_ci(
                        scores,
                        confidence=boot["confidence"],
                        iterations=boot["iterations"],
                        seed=boot["seed"],
                    )
                    ci[run_id][label] = [lo, hi]
        payload["mean_ci"] = ci
    return payload


def _analyze_significance(session: AnalysisSession, params: dict) -> dict:
    baseline = params["baseline"]
    if baseline not in session.runs:
        raise WorkbenchError(_analysis.UNKNOWN_RUN, f"baseline run {baseline!r} not uploaded")
    others = [name for name in sorted(session.runs) if name != baseline]
    if not others:
        raise WorkbenchError(INVALID_PARAMETER, "significance testing needs at least 2 runs")
    matrix = _build_matrix(session, [params["measure"]], params)
    label = matrix.measures[0].label()
    qids = list(matrix.measure_qids[label])
    rows: list[dict] = []
    raw_p: list[float] = []
    for name in others:
        sample = _stats.PairedSample(
            qids=tuple(qids),
            a=tuple(matrix.score(name, label, q) for q in qids),
            b=tuple(matrix.score(baseline, label, q) for q in qids),
        )
        if params["test"] == "t_test":
            result = _stats.paired_t_test(sample)
        elif params["test"] == "wilcoxon":
            result = _stats.wilcoxon_signed_rank(sample)
        else:
            raise WorkbenchError(INVALID_PARAMETER, f"unknown test {params['test']!r}")
        try:
            effect = _stats.paired_effect_size(sample)
        except WorkbenchError:
            effect = None
        rows.append(
            {
                "baseline": baseline,
                "comparison": name,
                "measure": label,
                "test": result.method,
                "statistic": result.statistic,
                "p": result.p_value,
                "n_effective": result.n_effective,
                "effect_size": effect,
                "mean_baseline": matrix.mean(baseline, label),
                "mean_comparison": matrix.mean(name, label),
            }
        )
        raw_p.append(result.p_value)
    correction = _stats.apply_correction(params["correction"], raw_p, params["alpha"])
    for row, adj, rej in zip(rows, correction.adjusted_p, correction.reject):
        row["adjusted_p"] = adj
        row["significant"] = rej
    return {
        "baseline": baseline,
        "measure": label,
        "test": params["test"],
        "correction": params["correction"],
        "alpha": params["alpha"],
        "rows": rows,
    }


def _analyze_pr_curve(session: AnalysisSession, params: dict) -> dict:
    run_name = params["run"]
    if run_name not in session.runs:
        raise WorkbenchError(_analysis.UNKNOWN_RUN, f"run {run_name!r} not uploaded")
    return _analysis.pr_curve_payload(session.runs[run_name], session.qrels, params["rel_threshold"])


def _analyze_query_delta(session: AnalysisSession, params: dict) -> dict:
    for key in ("baseline", "comparison"):
        if params[key] not in session.runs:
            raise WorkbenchError(_analysis.UNKNOWN_RUN, f"run {params[key]!r} not uploaded")
    matrix = _build_matrix(session, [params["measure"]], params)
    report = _analysis.per_query_delta(
        matrix, params["baseline"], params["comparison"], matrix.measures[0], params["tie_band"]
    )
    return report.to_json()


def _analyze_query_length(session: AnalysisSession, params: dict) -> dict:
    if params["run"] not in session.runs:
        raise WorkbenchError(_analysis.UNKNOWN_RUN, f"run {params['run']!r} not uploaded")
    matrix = _build_matrix(session, [params["measure"]], params)
    report = _analysis.query_length_analysis(
        session.queries, matrix, params["run"], matrix.measures[0], params["n_buckets"]
    )
    return report.to_json()


def _analyze_token_frequencies(session: AnalysisSession, params: dict) -> dict:
    stopwords = params["stopwords"]
    freqs = _textviz.token_frequencies(
        session.queries,
        stopwords=set(stopwords) if stopwords is not None else None,
        min_token_len=params["min_token_len"],
    )
    return freqs.to_json()


def _analyze_projection(session: AnalysisSession, params: dict) -> dict:
    if params["source"] == _textviz.SOURCE_TFIDF:
        vectors = _textviz.tfidf_vectors(session.queries)
    elif params["source"] == _textviz.SOURCE_EXTERNAL:
        if session.embeddings is None:
            raise WorkbenchError(MISSING_INPUTS, "no embeddings uploaded", details={"missing": ["embeddings"]})
        vectors = session.embeddings
    else:
        raise WorkbenchError(INVALID_PARAMETER, f"unknown vector source {params['source']!r}")
    projection = _textviz.pca_project(vectors, params["dims"])
    payload = projection.to_json()
    payload["source"] = params["source"]
    return payload


def _analyze_qrels_distribution(session: AnalysisSession, params: dict) -> dict:
    return _analysis.qrels_distribution(session.qrels, params["rel_threshold"]).to_json()


def _analyze_multi_query_documents(session: AnalysisSession, params: dict) -> dict:
    shared = _analysis.multi_query_documents(session.qrels, params["min_queries"], params["rel_threshold"])
    return {"documents": [[doc, qids] for doc, qids in shared]}


def _analyze_document_rank_trace(session: AnalysisSession, params: dict) -> dict:
    trace = _analysis.document_rank_trace(params["doc_id"], session.run_list(), session.qrels)
    return trace.to_json()


_EXECUTORS: dict[str, Callable[[AnalysisSession, dict], dict]] = {
    "evaluate": _analyze_evaluate,
    "significance": _analyze_significance,
    "pr_curve": _analyze_pr_curve,
    "query_delta": _analyze_query_delta,
    "query_length": _analyze_query_length,
    "token_frequencies": _analyze_token_frequencies,
    "projection": _analyze_projection,
    "qrels_distribution": _analyze_qrels_distribution,
    "multi_query_documents": _analyze_multi_query_documents,
    "document_rank_trace": _analyze_document_rank_trace,
}


def analyze(session: AnalysisSession, kind: str, params: dict) -> dict:
    """Run one analysis synchronously and return its JSON payload."""
    return _EXECUTORS[kind](session, params)


# ---------------------------------------------------------------------------
# Manager


class SessionManager:
    """Creates, persists, and executes analyses for sessions under one root.

    `inline=True` executes analyses synchronously in the calling thread
    (CLI mode); otherwise a small thread pool runs them and callers poll.
    """

    def __init__(
        self,
        data_dir: str | Path,
        inline: bool = False,
        max_upload_bytes: int = DEFAULT_MAX_UPLOAD,
        executor: Executor | None = None,
    ):
        self.data_dir = Path(data_dir)
        try:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            probe = self.data_dir / ".writable"
            probe.write_text("")
            probe.unlink()
        except OSError as exc:
            raise WorkbenchError(STORAGE_FAILURE, f"persistence root not writable: {exc}") from exc
        self.max_upload_bytes = max_upload_bytes
        self._inline = inline
        self._pool = executor if executor is not None else (None if inline else ThreadPoolExecutor(max_workers=4))
        self._sessions: dict[str, AnalysisSession] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._global_lock = threading.Lock()

    # -- internals ---------------------------------------------------------

    def _lock(self, session_id: str) -> threading.Lock:
        with self._global_lock:
            if session_id not in self._locks:
                self._locks[session_id] = threading.Lock()
            return self._locks[session_id]

    def _session_path(self, session_id: str) -> Path:
        return self.data_dir / session_id / "session.json"

    def _persist(self, session: AnalysisSession) -> None:
        path = self._session_path(session.session_id)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(export_session_json(session))
            tmp.replace(path)
        except OSError as exc:
            raise WorkbenchError(STORAGE_FAILURE, f"could not persist session: {exc}") from exc

    def get_session(self, session_id: str) -> AnalysisSession:
        with self._global_lock:
            if session_id in self._sessions:
                return self._sessions[session_id]
        path = self._session_path(session_id)
        if not path.is_file():
            raise WorkbenchError(UNKNOWN_SESSION, f"no session {session_id!r}")
        session = import_session_json(path.read_bytes())
        with self._global_lock:
            self._sessions.setdefault(session_id, session)
            return self._sessions[session_id]

    def list_sessions(self) -> list[str]:
        return sorted(p.name for p in self.data_dir.iterdir() if (p / "session.json").is_file())

    # -- operations ---------------------------------------------------------

    def create_session(self) -> str:
        session_id = uuid.uuid4().hex
        now = _utcnow()
        session = AnalysisSession(session_id=session_id, created_at=now, modified_at=now)
        with self._global_lock:
            self._sessions[session_id] = session
        self._persist(session)
        return session_id

    def ingest_file(self, session_id: str, kind: str, name: str | None, raw: bytes) -> ValidationReport:
        """Parse and attach one uploaded file; on parse errors nothing is attached."""
        if kind not in ("queries", "qrels", "run", "embeddings"):
            raise WorkbenchError(UNKNOWN_KIND, f"unknown upload kind {kind!r}")
        if len(raw) > self.max_upload_bytes:
            raise WorkbenchError(
                PAYLOAD_TOO_LARGE,
                f"upload of {len(raw)} bytes exceeds the {self.max_upload_bytes} byte limit",
            )
        session = self.get_session(session_id)
        with self._lock(session_id):
            if kind == "queries":
                store, report = trec_io.parse_queries(raw)
                if store is not None:
                    if session.queries is not None:
                        report.warn(0, QUERIES_REPLACED, "previous query file replaced")
                    session.queries = store
                    session.uploads["queries"] = UploadRecord(
                        "queries", name or "queries", jsoncanon.digest_bytes(raw), report
                    )
            elif kind == "qrels":
                store, report = trec_io.parse_qrels(raw)
                if store is not None:
                    if session.qrels is not None:
                        report.warn(0, QRELS_REPLACED, "previous qrels file replaced")
                    session.qrels = store
                    session.uploads["qrels"] = UploadRecord(
                        "qrels", name or "qrels", jsoncanon.digest_bytes(raw), report
                    )
            elif kind == "run":
                stores, report = trec_io.parse_runs(raw)
                if stores:
                    multi = len(stores) > 1
                    attach: list[tuple[str, RunStore]] = []
                    for store in stores:
                        base = name or store.run_id
                        attach_name = f"{base}:{store.run_id}" if multi and name else (store.run_id if multi else base)
                        if attach_name in session.runs:
                            raise WorkbenchError(
                                DUPLICATE_RUN_NAME, f"run name {attach_name!r} already uploaded"
                            )
                        attach.append((attach_name, store))
                    if len({a for a, _ in attach}) != len(attach):
                        raise WorkbenchError(DUPLICATE_RUN_NAME, "duplicate run names within upload")
                    digest = jsoncanon.digest_bytes(raw)
                    for attach_name, store in attach:
                        session.runs[attach_name] = _dc_replace(store, run_id=attach_name)
                        session.uploads[f"run:{attach_name}"] = UploadRecord("run", attach_name, digest, report)
            else:  # embeddings
                if session.queries is None:
                    raise WorkbenchError(
                        MISSING_INPUTS, "upload queries before embeddings", details={"missing": ["queries"]}
                    )
                vectors, report = _textviz.load_embeddings(raw, session.queries)
                if vectors is not None:
                    if session.embeddings is not None:
                        report.warn(0, EMBEDDINGS_REPLACED, "previous embeddings replaced")
                    session.embeddings = vectors
                    session.uploads["embeddings"] = UploadRecord(
                        "embeddings", name or "embeddings", jsoncanon.digest_bytes(raw), report
                    )
            session.modified_at = _utcnow()
            self._persist(session)
        return report

    def run_analysis(self, session_id: str, kind: str, parameters: dict | None = None) -> ResultRecord:
        """Start (or return the cached copy of) one analysis."""
        session = self.get_session(session_id)
        params = canonicalize_parameters(kind, parameters)
        missing = missing_inputs(session, kind)
        if missing:
            raise WorkbenchError(
                MISSING_INPUTS, f"analysis {kind} needs uploads: {missing}", details={"missing": missing}
            )
        reference = jsoncanon.digest(
            {"kind": kind, "parameters": params, "inputs": session.input_digests()}
        )
        with self._lock(session_id):
            if reference in session.results:
                return session.results[reference]
            record = ResultRecord(
                reference=reference,
                kind=kind,
                parameters=params,
                state=STATE_QUEUED,
                created_at=_utcnow(),
            )
            session.results[reference] = record
            session.modified_at = _utcnow()
            self._persist(session)
        if self._pool is None:
            self._execute(session_id, reference)
        else:
            self._pool.submit(self._execute, session_id, reference)
        return session.results[reference]

    def _execute(self, session_id: str, reference: str) -> None:
        session = self.get_session(session_id)
        record = session.results[reference]
        record.state = STATE_RUNNING
        try:
            payload = analyze(session, record.kind, record.parameters)
            with self._lock(session_id):
                record.payload = payload
                record.state = STATE_DONE
                record.completed_at = _utcnow()
                session.modified_at = _utcnow()
                self._persist(session)
        except WorkbenchError as exc:
            with self._lock(session_id):
                record.error = exc.to_json()
                record.state = STATE_FAILED
                record.completed_at = _utcnow()
                session.modified_at = _utcnow()
                self._persist(session)

    def get_result(self, session_id: str, reference: str) -> ResultRecord:
        session = self.get_session(session_id)
        if reference not in session.results:
            raise WorkbenchError(UNKNOWN_REFERENCE, f"no result {reference!r} in this session")
        return session.results[reference]

    def wait_for(self, session_id: str, reference: str, timeout: float = 30.0) -> ResultRecord:
        """Poll until a result reaches a terminal state (test/CLI helper)."""
        import time

        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            record = self.get_result(session_id, reference)
            if record.state in (STATE_DONE, STATE_FAILED):
                return record
            time.sleep(0.01)
        return self.get_result(session_id, reference)

    def session_summary(self, session_id: str) -> dict:
        session = self.get_session(session_id)
        return {
            "session_id": session.session_id,
            "created_at": session.created_at,
            "modified_at": session.modified_at,
            "uploads": {key: rec.to_json() for key, rec in sorted(session.uploads.items())},
            "results": {
                ref: {
                    "kind": rec.kind,
                    "state": rec.state,
                    "created_at": rec.created_at,
                    "completed_at": rec.completed_at,
                }
                for ref, rec in sorted(session.results.items())
            },
        }
