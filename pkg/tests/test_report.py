"""Export tests: CSV shape/precision, canonical JSON, HTML determinism."""

import csv
import io
import json
import re

import pytest

from irworkbench import jsoncanon, measures, report, trec_io
from irworkbench.errors import WorkbenchError
from irworkbench.session import (
    AnalysisSession,
    ResultRecord,
    STATE_DONE,
    UploadRecord,
    analyze,
    canonicalize_parameters,
    export_session_json,
    import_session_json,
)


# ---------------------------------------------------------------------------
# canonical JSON


def test_canonical_json_sorted_compact():
    assert jsoncanon.dumps({"b": 1, "a": [True, None, "x"]}) == '{"a":[true,null,"x"],"b":1}'


def test_canonical_json_float_17g_round_trip():
    values = [0.1, 1.0, 1e-7, 123456.789, 2 / 3, 1e20]
    blob = jsoncanon.dumps(values)
    parsed = json.loads(blob)
    assert [float(x) for x in parsed] == values
    assert jsoncanon.dumps(parsed) == blob


def test_canonical_json_rejects_nan():
    with pytest.raises(ValueError):
        jsoncanon.dumps({"x": float("nan")})


# ---------------------------------------------------------------------------
# CSV tables


def _toy_matrix(toy_stores):
    _, qrels, runs = toy_stores
    specs = [measures.parse_measure_spec(m) for m in ("AP", "nDCG@10")]
    return measures.evaluate(runs, qrels, specs)


def test_eval_table_csv_shape(toy_stores):
    matrix = _toy_matrix(toy_stores)
    rows = list(csv.reader(io.StringIO(report.eval_table_csv(matrix).decode())))
    assert rows[0] == ["run_id", "measure", "qid", "score"]
    body = rows[1:]
    # 2 runs x 2 measures x (3 queries + ALL)
    assert len(body) == 2 * 2 * 4
    for run_id, measure, qid, score in body:
        assert re.fullmatch(r"-?\d+\.\d{6}", score)
    # ALL comes last within each (run, measure) group
    groups = {}
    for run_id, measure, qid, _ in body:
        groups.setdefault((run_id, measure), []).append(qid)
    for qids in groups.values():
        assert qids[-1] == "ALL"
        assert qids[:-1] == sorted(qids[:-1])


def test_eval_table_csv_value_round_trip(toy_stores):
    matrix = _toy_matrix(toy_stores)
    rows = list(csv.reader(io.StringIO(report.eval_table_csv(matrix).decode())))[1:]
    for run_id, label, qid, score in rows:
        expected = matrix.mean(run_id, label) if qid == "ALL" else matrix.score(run_id, label, qid)
        assert float(score) == pytest.approx(expected, abs=5e-7)


def test_eval_table_fixed_decimals():
    view = {
        "run_ids": ["r"],
        "measures": ["AP"],
        "scores": {"r": {"AP": {"q1": 0.95023437}}},
        "means": {"r": {"AP": 0.95023437}},
    }
    data = report.eval_table_csv(view).decode()
    assert "0.950234" in data


def test_significance_table_csv():
    rows = [
        {
            "baseline": "a",
            "comparison": "b",
            "measure": "AP",
            "test": "t_test",
            "statistic": 1.0,
            "p": 0.391,
            "adjusted_p": 1.0,
            "significant": False,
        }
    ]
    data = report.significance_table_csv(rows).decode()
    lines = data.strip().splitlines()
    assert lines[0] == "baseline,comparison,measure,test,statistic,p,adjusted_p,significant"
    assert lines[1] == "a,b,AP,t_test,1.000000,0.391000,1.000000,false"


def test_significance_table_empty():
    with pytest.raises(WorkbenchError) as exc:
        report.significance_table_csv([])
    assert exc.value.code == report.EMPTY_RESULTS


# ---------------------------------------------------------------------------
# session export / import


def _local_session(toy_paths) -> AnalysisSession:
    session = AnalysisSession(session_id="s1", created_at="t0", modified_at="t0")
    queries_raw = toy_paths["queries"].read_bytes()
    qrels_raw = toy_paths["qrels"].read_bytes()
    queries, qrep = trec_io.parse_queries(queries_raw)
    qrels, rrep = trec_io.parse_qrels(qrels_raw)
    session.queries = queries
    session.qrels = qrels
    session.uploads["queries"] = UploadRecord("queries", "queries.tsv", jsoncanon.digest_bytes(queries_raw), qrep)
    session.uploads["qrels"] = UploadRecord("qrels", "qrels.txt", jsoncanon.digest_bytes(qrels_raw), rrep)
    for path in toy_paths["runs"]:
        raw = path.read_bytes()
        stores, rep = trec_io.parse_runs(raw)
        for store in stores:
            session.runs[store.run_id] = store
            session.uploads[f"run:{store.run_id}"] = UploadRecord(
                "run", store.run_id, jsoncanon.digest_bytes(raw), rep
            )
    return session


def _add_result(session, kind, params=None):
    canon = canonicalize_parameters(kind, params)
    ref = jsoncanon.digest({"kind": kind, "parameters": canon, "inputs": session.input_digests()})
    payload = analyze(session, kind, canon)
    session.results[ref] = ResultRecord(
        reference=ref, kind=kind, parameters=canon, state=STATE_DONE, payload=payload, created_at="t1"
    )
    return ref


def test_export_import_export_identical(toy_paths):
    session = _local_session(toy_paths)
    _add_result(session, "evaluate", {"measures": ["AP", "nDCG@10"]})
    _add_result(session, "pr_curve", {"run": "bm25"})
    _add_result(session, "token_frequencies")
    first = export_session_json(session)
    rebuilt = import_session_json(first)
    second = export_session_json(rebuilt)
    assert first == second


def test_fresh_session_export_shape():
    session = AnalysisSession(session_id="sx", created_at="t", modified_at="t")
    data = json.loads(export_session_json(session))
    assert data["uploads"] == {} and data["results"] == {}


# ---------------------------------------------------------------------------
# HTML report


def _session_with_defaults(toy_paths):
    session = _local_session(toy_paths)
    _add_result(session, "evaluate", {"measures": ["AP", "nDCG@10", "P@2"]})
    _add_result(session, "significance", {"baseline": "bm25"})
    _add_result(session, "pr_curve", {"run": "bm25"})
    _add_result(session, "pr_curve", {"run": "dpr"})
    _add_result(session, "query_delta", {"baseline": "bm25", "comparison": "dpr"})
    _add_result(session, "token_frequencies")
    _add_result(session, "projection")
    _add_result(session, "query_length", {"run": "bm25", "n_buckets": 2})
    _add_result(session, "qrels_distribution")
    _add_result(session, "multi_query_documents")
    _add_result(session, "document_rank_trace", {"doc_id": "d01"})
    return session


def test_html_report_contains_all_sections(toy_paths):
    session = _session_with_defaults(toy_paths)
    html = report.render_html_report(session, generated_at="2026-01-01T00:00:00Z").decode()
    for title in report.SECTION_TITLES.values():
        assert title in html
    assert "report-data" in html


def test_html_report_no_external_references(toy_paths):
    session = _session_with_defaults(toy_paths)
    html = report.render_html_report(session, generated_at="2026-01-01T00:00:00Z").decode()
    assert "http://" not in html
    assert "https://" not in html


def test_html_report_deterministic_with_pinned_timestamp(toy_paths):
    session = _session_with_defaults(toy_paths)
    a = report.render_html_report(session, generated_at="2026-01-01T00:00:00Z")
    b = report.render_html_report(session, generated_at="2026-01-01T00:00:00Z")
    assert a == b


def test_html_report_section_filtering_and_notice(toy_paths):
    session = _local_session(toy_paths)
    _add_result(session, "evaluate", {"measures": ["AP"]})
    html = report.render_html_report(session, generated_at="x").decode()
    assert report.SECTION_TITLES["performance"] in html
    assert "No computed results for this section" in html  # other sections carry a notice
    only = report.render_html_report(session, sections=["performance"], generated_at="x").decode()
    assert report.SECTION_TITLES["query"] not in only


def test_html_report_empty_sections_renders_manifest_only(toy_paths):
    session = _local_session(toy_paths)
    _add_result(session, "evaluate", {"measures": ["AP"]})
    html = report.render_html_report(session, sections=[], generated_at="x").decode()
    assert "Manifest" in html
    assert report.SECTION_TITLES["performance"] not in html


def test_html_report_no_results(toy_paths):
    session = _local_session(toy_paths)
    with pytest.raises(WorkbenchError) as exc:
        report.render_html_report(session)
    assert exc.value.code == report.NO_RESULTS


def test_manifest_parameters_reproduce_every_number(toy_paths):
    """Replaying each result's manifest parameters over the same inputs
    reproduces the embedded payload exactly."""
    session = _session_with_defaults(toy_paths)
    manifest = report.build_manifest(session, list(report.SECTION_ORDER), generated_at="t")
    assert manifest["parameters"]  # at least one included analysis
    replay = _local_session(toy_paths)  # re-parsed from the same files
    assert replay.input_digests() == session.input_digests()
    for ref, spec in manifest["parameters"].items():
        replayed = analyze(replay, spec["kind"], spec["parameters"])
        assert jsoncanon.dump_bytes(replayed) == jsoncanon.dump_bytes(session.results[ref].payload)
