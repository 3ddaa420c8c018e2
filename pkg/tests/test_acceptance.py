"""Acceptance suite: one test per release criterion, at the stated tolerance.

Run with `pytest tests/test_acceptance.py -v -s` to see one PASS line per
criterion; any failure is a red criterion.
"""

import random
import subprocess
import sys
import time

import pytest
from fastapi.testclient import TestClient

from irworkbench import analysis, jsoncanon, measures, stats, textviz, trec_io
from irworkbench.errors import WorkbenchError
from irworkbench.server import create_app
from irworkbench.session import SessionManager

import oracles


def _announce(name: str) -> None:
    print(f"\nACCEPTANCE {name}: PASS")


# ---------------------------------------------------------------------------
# 1. Measure oracle suite


def test_measure_oracle_suite():
    """200 random instances: every measure matches brute force within 1e-9."""
    rng = random.Random(2026)
    started = time.monotonic()
    checked = 0
    for _ in range(200):
        judgments, rankings = oracles.random_instance(rng, max_docs=8, max_queries=4, max_grade=2)
        for qid, ranking in rankings.items():
            judged = judgments[qid]
            k = rng.randint(1, 8)
            pairs = [
                (measures.precision_at_k(ranking, judged, k), oracles.brute_precision(ranking, judged, k)),
                (measures.reciprocal_rank(ranking, judged), oracles.brute_rr(ranking, judged)),
                (measures.judged_at_k(ranking, judged, k), oracles.brute_judged(ranking, judged, k)),
            ]
            if any(g >= 1 for g in judged.values()):
                pairs.extend(
                    [
                        (measures.average_precision(ranking, judged), oracles.brute_ap(ranking, judged)),
                        (measures.recall_at_k(ranking, judged, k), oracles.brute_recall(ranking, judged, k)),
                        (measures.bpref(ranking, judged), oracles.brute_bpref(ranking, judged)),
                        (measures.ndcg(ranking, judged, k), oracles.brute_ndcg(ranking, judged, k)),
                        (
                            measures.ndcg(ranking, judged, k, gain="exponential"),
                            oracles.brute_ndcg(ranking, judged, k, gain="exponential"),
                        ),
                    ]
                )
            for got, expected in pairs:
                assert abs(got - expected) <= 1e-9
                assert 0.0 <= got <= 1.0 + 1e-12
                checked += 1
    elapsed = time.monotonic() - started
    assert elapsed < 5.0, f"oracle suite took {elapsed:.2f}s"
    assert checked > 1000
    _announce(f"measure oracle suite ({checked} comparisons, {elapsed:.2f}s)")


# ---------------------------------------------------------------------------
# 2. trec_eval convention fixtures


def test_trec_eval_convention_fixtures():
    ap = measures.average_precision(["d1", "d2", "d3"], {"d1": 1, "d3": 1})
    assert abs(ap - 0.833333) <= 1e-6

    ndcg3 = measures.ndcg(["a", "b", "c"], {"a": 2, "c": 1}, k=3)
    assert abs(ndcg3 - 0.950234) <= 1e-6

    bp = measures.bpref(["n1", "r1", "r2", "n2"], {"n1": 0, "n2": 0, "r1": 1, "r2": 1})
    assert abs(bp - 0.5) <= 1e-6
    _announce("trec_eval convention fixtures (AP, nDCG@3, bpref)")


# ---------------------------------------------------------------------------
# 3. Statistics suite


def test_statistics_suite():
    # exact Wilcoxon == exhaustive enumeration, 100 random no-tie cases
    rng = random.Random(99)
    for _ in range(100):
        n = rng.randint(2, 10)
        d, seen = [], set()
        while len(d) < n:
            x = round(rng.uniform(-1, 1), 5)
            if x != 0 and abs(x) not in seen:
                seen.add(abs(x))
                d.append(x)
        sample = stats.PairedSample(
            qids=tuple(f"q{i}" for i in range(n)), a=tuple(d), b=tuple([0.0] * n)
        )
        result = stats.wilcoxon_signed_rank(sample)
        assert result.method == stats.METHOD_WILCOXON_EXACT
        assert abs(result.p_value - oracles.brute_wilcoxon_exact_p(d)) <= 1e-12

    # paired t fixture
    sample = stats.PairedSample(qids=("a", "b", "c", "d"), a=(0.1, 0.1, 0.1, -0.1), b=(0.0,) * 4)
    result = stats.paired_t_test(sample)
    assert result.statistic == 1.0
    assert abs(result.p_value - 0.391) <= 1e-3

    # Holm fixture
    holm = stats.holm_correction([0.01, 0.04, 0.03], alpha=0.05)
    for got, expected in zip(holm.adjusted_p, (0.03, 0.06, 0.06)):
        assert abs(got - expected) <= 1e-12

    # Holm uniformly at least as powerful as Bonferroni
    for _ in range(100):
        m = rng.randint(1, 15)
        p = [rng.random() for _ in range(m)]
        h = stats.holm_correction(p)
        b = stats.bonferroni_correction(p)
        assert all(ha <= ba + 1e-15 for ha, ba in zip(h.adjusted_p, b.adjusted_p))
    _announce("statistics suite (Wilcoxon exact, t fixture, Holm, Holm<=Bonferroni)")


# ---------------------------------------------------------------------------
# 4. PR-curve properties


def test_pr_curve_properties():
    rng = random.Random(7)
    for _ in range(100):
        n = rng.randint(1, 12)
        pattern = [rng.random() < 0.4 for _ in range(n)]
        judged = {f"d{i}": int(rel) for i, rel in enumerate(pattern)}
        judged[f"extra{rng.randint(0, 3)}"] = 1  # ensure R >= 1, maybe unretrieved
        entries = tuple((f"d{i}", float(n - i)) for i in range(n))
        run = trec_io.RunStore(run_id="r", rankings={"q1": entries}, max_depth=n)
        qrels = trec_io.QrelsStore(judgments={"q1": judged}, grade_range=(0, 1))
        per_query, averaged = analysis.interpolated_pr_curve(run, qrels)
        for curve in list(per_query.values()) + [averaged]:
            for i in range(10):
                assert curve.precision[i] >= curve.precision[i + 1]

    run, judged = _pattern_run("RNR")
    qrels = trec_io.QrelsStore(judgments={"q1": judged}, grade_range=(0, 1))
    per_query, _ = analysis.interpolated_pr_curve(run, qrels)
    curve = per_query["q1"].precision
    for i, level in enumerate(analysis.RECALL_LEVELS):
        expected = 1.0 if level <= 0.5 else 0.666667
        assert abs(curve[i] - expected) <= 1e-6
    _announce("PR-curve properties (monotone on 100 random instances, hand fixture)")


def _pattern_run(pattern: str):
    judgments = {}
    entries = []
    for i, ch in enumerate(pattern):
        doc = f"d{i}"
        entries.append((doc, float(len(pattern) - i)))
        judgments[doc] = 1 if ch == "R" else 0
    run = trec_io.RunStore(run_id="r", rankings={"q1": tuple(entries)}, max_depth=len(entries))
    return run, judgments


# ---------------------------------------------------------------------------
# 5. Parsing round-trip


def test_parsing_round_trip():
    rng = random.Random(55)
    for _ in range(100):
        rankings = {}
        for qi in range(rng.randint(1, 6)):
            docs = rng.sample([f"d{i:02d}" for i in range(30)], rng.randint(1, 10))
            entries = [(d, rng.choice([rng.uniform(-100, 100), rng.randint(-5, 5) / 7])) for d in docs]
            rankings[f"q{qi}"] = tuple(trec_io.canonical_order(entries))
        run = trec_io.RunStore(
            run_id=f"run{rng.randint(0, 99)}",
            rankings=rankings,
            max_depth=max(len(v) for v in rankings.values()),
        )
        reparsed, report = trec_io.parse_runs(trec_io.format_run(run))
        assert report.ok
        assert reparsed == [run]

    for _ in range(100):
        judgments = {}
        for qi in range(rng.randint(1, 6)):
            docs = rng.sample([f"d{i:02d}" for i in range(30)], rng.randint(1, 10))
            judgments[f"q{qi}"] = {d: rng.randint(-2, 3) for d in docs}
        grades = [g for docs in judgments.values() for g in docs.values()]
        store = trec_io.QrelsStore(judgments=judgments, grade_range=(min(grades), max(grades)))
        reparsed, report = trec_io.parse_qrels(trec_io.format_qrels(store))
        assert report.ok
        assert reparsed == store

    # the three malformed-input fixtures
    qs, report = trec_io.parse_queries(b"")
    assert qs is None and report.has_code(trec_io.EMPTY_FILE)

    qrels, report = trec_io.parse_qrels(b"q1 0 d42 high\n")
    assert qrels is None
    assert report.has_code(trec_io.NON_INTEGER_GRADE)
    assert report.has_code(trec_io.EMPTY_FILE)

    runs, report = trec_io.parse_runs(b"q1 Q0 d1 1 notascore r\n")
    assert runs == []
    assert report.has_code(trec_io.NON_NUMERIC_SCORE)
    assert report.has_code(trec_io.EMPTY_FILE)
    _announce("parsing round-trip (100 runs + 100 qrels, malformed fixtures)")


# ---------------------------------------------------------------------------
# 6. Evaluation determinism under parallelism


def test_evaluate_determinism_parallel():
    rng = random.Random(123)
    docs = [f"d{i:03d}" for i in range(120)]
    judgments = {}
    for qi in range(50):
        judged = rng.sample(docs, rng.randint(5, 30))
        judgments[f"q{qi:02d}"] = {d: rng.randint(0, 2) for d in judged}
        judgments[f"q{qi:02d}"][judged[0]] = rng.randint(1, 2)  # keep query evaluable
    qrels = trec_io.QrelsStore(judgments=judgments, grade_range=(0, 2))
    runs = []
    for ri in range(10):
        rankings = {}
        for qid in judgments:
            if rng.random() < 0.05:
                continue  # exercise zero_fill
            pool = rng.sample(docs, rng.randint(10, 60))
            entries = [(d, rng.uniform(-10, 10)) for d in pool]
            rankings[qid] = tuple(trec_io.canonical_order(entries))
        runs.append(
            trec_io.RunStore(
                run_id=f"sys{ri}", rankings=rankings, max_depth=max(len(v) for v in rankings.values())
            )
        )
    specs = [measures.parse_measure_spec(m) for m in ("AP", "nDCG@10", "P@10", "RR", "Bpref", "Judged@10")]
    started = time.monotonic()
    sequential = measures.evaluate(runs, qrels, specs, parallel=False)
    threaded = measures.evaluate(runs, qrels, specs, parallel=True)
    elapsed = time.monotonic() - started
    blob_a = jsoncanon.dump_bytes(sequential.to_json())
    blob_b = jsoncanon.dump_bytes(threaded.to_json())
    assert blob_a == blob_b
    assert elapsed < 10.0, f"determinism workload took {elapsed:.2f}s"
    _announce(f"evaluate determinism, 10 runs x 50 queries ({elapsed:.2f}s)")


# ---------------------------------------------------------------------------
# 7. Projection suite


def test_projection_suite():
    import numpy as np

    rng = np.random.default_rng(77)
    base = rng.normal(size=(9, 2))
    mix = rng.normal(size=(2, 5))
    data = np.hstack([base, base @ mix])  # rank 2 in 7 dims
    vectors = textviz.QueryVectors(
        qids=tuple(f"q{i}" for i in range(9)),
        vocabulary=tuple(f"dim{i}" for i in range(7)),
        vectors=data,
        source="external",
    )
    first = textviz.pca_project(vectors, dims=2)
    second = textviz.pca_project(vectors, dims=2)
    assert np.array_equal(first.coordinates, second.coordinates)  # bitwise identical
    for i in range(9):
        for j in range(i + 1, 9):
            original = float(np.linalg.norm(data[i] - data[j]))
            projected = float(np.linalg.norm(first.coordinates[i] - first.coordinates[j]))
            assert abs(projected - original) <= 1e-6

    same_text, _ = trec_io.parse_queries(b"q1\tidentical words\nq2\tidentical words\nq3\tidentical words\n")
    identical = textviz.tfidf_vectors(same_text)
    with pytest.raises(WorkbenchError) as exc:
        textviz.pca_project(identical, dims=2)
    assert exc.value.code == textviz.DEGENERATE_VARIANCE
    _announce("projection suite (rank-2 distances, determinism, degenerate variance)")


# ---------------------------------------------------------------------------
# 8. End-to-end CLI report


def test_end_to_end_cli_report(toy_paths, tmp_path):
    out_a = tmp_path / "report_a.html"
    out_b = tmp_path / "report_b.html"
    cmd_base = [
        sys.executable,
        "-m",
        "irworkbench.cli",
        "report",
        "--queries",
        str(toy_paths["queries"]),
        "--qrels",
        str(toy_paths["qrels"]),
        "--runs",
        *[str(p) for p in toy_paths["runs"]],
        "--timestamp",
        "2026-02-03T04:05:06Z",
    ]
    proc = subprocess.run(cmd_base + ["--out", str(out_a)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    proc = subprocess.run(cmd_base + ["--out", str(out_b)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr

    html = out_a.read_text()
    for heading in (
        "Experiment Performance Report",
        "Query-based Report",
        "Query Text-based Report",
        "Query Collection-based Report",
    ):
        assert heading in html
    assert "http://" not in html and "https://" not in html
    assert out_a.read_bytes() == out_b.read_bytes()
    _announce("end-to-end CLI report (exit 0, four headings, self-contained, reproducible)")


# ---------------------------------------------------------------------------
# 9. Server suite


def test_server_suite(toy_paths, tmp_path):
    data_dir = tmp_path / "server-data"
    manager = SessionManager(data_dir, inline=True)
    client = TestClient(create_app(manager))

    def upload_all(sid):
        client.post(
            f"/api/sessions/{sid}/files", params={"kind": "qrels"}, content=toy_paths["qrels"].read_bytes()
        )
        for path in toy_paths["runs"]:
            client.post(f"/api/sessions/{sid}/files", params={"kind": "run"}, content=path.read_bytes())

    # isolation
    sid_a = client.post("/api/sessions").json()["session_id"]
    sid_b = client.post("/api/sessions").json()["session_id"]
    upload_all(sid_a)
    body = {"kind": "evaluate", "parameters": {"measures": ["AP"]}}
    ref = client.post(f"/api/sessions/{sid_a}/analyses", json=body).json()["reference"]
    foreign = client.get(f"/api/sessions/{sid_b}/results/{ref}")
    assert foreign.status_code == 404
    assert foreign.json()["code"] == "UNKNOWN_REFERENCE"

    # cache: identical request -> same reference, unchanged created_at
    created = client.get(f"/api/sessions/{sid_a}").json()["results"][ref]["created_at"]
    again = client.post(f"/api/sessions/{sid_a}/analyses", json=body).json()
    assert again["reference"] == ref
    assert client.get(f"/api/sessions/{sid_a}").json()["results"][ref]["created_at"] == created

    # restart: completed results survive a new manager over the same root
    payload_before = client.get(f"/api/sessions/{sid_a}/results/{ref}").json()["payload"]
    fresh = TestClient(create_app(SessionManager(data_dir, inline=True)))
    after = fresh.get(f"/api/sessions/{sid_a}/results/{ref}")
    assert after.status_code == 200
    assert after.json()["payload"] == payload_before
    _announce("server suite (isolation, cache, restart)")
