"""Measure tests: spec'd fixtures, grammar, properties, engine behavior."""

import random

import pytest

from irworkbench import measures, trec_io
from irworkbench.errors import WorkbenchError

import oracles


# ---------------------------------------------------------------------------
# parse_measure_spec


@pytest.mark.parametrize(
    "text,family,k",
    [
        ("nDCG@10", "nDCG", 10),
        ("ndcg@5", "nDCG", 5),
        ("map", "AP", None),
        ("AP", "AP", None),
        ("P@1", "P", 1),
        ("recall@100", "R", 100),
        ("MRR", "RR", None),
        ("rr@10", "RR", 10),
        ("bpref", "Bpref", None),
        ("Judged@10", "Judged", 10),
    ],
)
def test_parse_measure_spec_grammar(text, family, k):
    spec = measures.parse_measure_spec(text)
    assert spec.family == family
    assert spec.k == k
    assert spec.rel_threshold == 1
    assert spec.gain == measures.GAIN_LINEAR


@pytest.mark.parametrize(
    "text,code",
    [
        ("P", measures.MISSING_CUTOFF),
        ("judged", measures.MISSING_CUTOFF),
        ("AP@10", measures.UNEXPECTED_CUTOFF),
        ("bpref@5", measures.UNEXPECTED_CUTOFF),
        ("P@0", measures.INVALID_CUTOFF),
        ("P@-3", measures.INVALID_CUTOFF),
        ("nDCG@x", measures.INVALID_CUTOFF),
        ("wombat", measures.UNKNOWN_MEASURE),
        ("", measures.UNKNOWN_MEASURE),
    ],
)
def test_parse_measure_spec_errors(text, code):
    with pytest.raises(WorkbenchError) as exc:
        measures.parse_measure_spec(text)
    assert exc.value.code == code


def test_measure_labels():
    assert measures.parse_measure_spec("map").label() == "AP"
    assert measures.parse_measure_spec("ndcg@10").label() == "nDCG@10"
    spec = measures.with_overrides(measures.parse_measure_spec("P@5"), rel_threshold=2)
    assert spec.label() == "P@5|rel=2"
    spec = measures.with_overrides(measures.parse_measure_spec("ndcg"), gain="exponential")
    assert spec.label() == "nDCG|gain=exp"


# ---------------------------------------------------------------------------
# hand-computed fixtures (trec_eval conventions)


def test_ap_fixture():
    # [R, N, R] with R=2: (1/1 + 2/3)/2
    judged = {"d1": 1, "d3": 1, "dx": 0}
    assert measures.average_precision(["d1", "d2", "d3"], judged) == pytest.approx(0.833333, abs=1e-6)


def test_ap_perfect_and_zero():
    judged = {"d1": 1, "d2": 1}
    assert measures.average_precision(["d1", "d2"], judged) == 1.0
    assert measures.average_precision(["x", "y"], judged) == 0.0


def test_ap_no_relevant_raises():
    with pytest.raises(WorkbenchError) as exc:
        measures.average_precision(["d1"], {"d1": 0})
    assert exc.value.code == measures.NO_RELEVANT_DOCS


def test_ndcg_fixture():
    # retrieved grades [2, 0, 1], qrels grades {2, 1}, linear gain
    judged = {"a": 2, "c": 1}
    value = measures.ndcg(["a", "b", "c"], judged, k=3)
    assert value == pytest.approx(0.950234, abs=1e-6)


def test_ndcg_ideal_is_one():
    judged = {"a": 2, "b": 1}
    assert measures.ndcg(["a", "b"], judged) == pytest.approx(1.0)


def test_ndcg_top_unjudged_k1():
    judged = {"a": 2}
    assert measures.ndcg(["zzz"], judged, k=1) == 0.0


def test_ndcg_exponential_gain():
    judged = {"a": 2, "c": 1}
    value = measures.ndcg(["a", "b", "c"], judged, k=3, gain="exponential")
    expected = oracles.brute_ndcg(["a", "b", "c"], judged, 3, "exponential")
    assert value == pytest.approx(expected, abs=1e-12)


def test_ndcg_negative_grades_contribute_zero():
    judged = {"a": 2, "b": -1}
    with_neg = measures.ndcg(["a", "b"], judged)
    without = measures.ndcg(["a"], {"a": 2})
    assert with_neg == pytest.approx(without)


def test_precision_fixture():
    judged = {"r1": 1, "r2": 1}
    assert measures.precision_at_k(["r1", "n", "r2", "n2"], judged, 2) == 0.5
    # k-denominator rule: 3 retrieved, 2 relevant, k=10
    assert measures.precision_at_k(["r1", "n", "r2"], judged, 10) == pytest.approx(0.2)
    assert measures.precision_at_k([], judged, 5) == 0.0


def test_recall_fixture():
    judged = {f"r{i}": 1 for i in range(4)}
    ranking = ["r0", "x", "r1", "y", "z"]
    assert measures.recall_at_k(ranking, judged, 5) == 0.5
    assert measures.recall_at_k(["r0", "r1", "r2", "r3"], judged, 4) == 1.0
    with pytest.raises(WorkbenchError) as exc:
        measures.recall_at_k(ranking, judged, 0)
    assert exc.value.code == measures.INVALID_CUTOFF


def test_reciprocal_rank():
    judged = {"r": 1}
    assert measures.reciprocal_rank(["a", "b", "r"], judged) == pytest.approx(1 / 3)
    assert measures.reciprocal_rank(["r"], judged) == 1.0
    assert measures.reciprocal_rank(["a", "b"], judged) == 0.0
    assert measures.reciprocal_rank(["a", "b", "r"], judged, k=2) == 0.0


def test_bpref_fixture():
    # R=2, N=2, ranking [n1, r1, r2, n2]
    judged = {"n1": 0, "n2": 0, "r1": 1, "r2": 1}
    assert measures.bpref(["n1", "r1", "r2", "n2"], judged) == pytest.approx(0.5)


def test_bpref_no_penalty_and_not_retrieved():
    judged = {"r1": 1, "r2": 1, "n1": 0}
    assert measures.bpref(["r1", "r2", "n1"], judged) == 1.0
    assert measures.bpref(["n1"], judged) == 0.0


def test_bpref_unjudged_ignored():
    judged = {"r1": 1, "n1": 0}
    # unjudged docs above r1 must not count
    assert measures.bpref(["u1", "u2", "r1"], judged) == 1.0


def test_bpref_no_judged_nonrelevant():
    judged = {"r1": 2, "r2": 1}
    assert measures.bpref(["r1", "x", "r2"], judged) == 1.0


def test_judged_at_k():
    judged = {"a": 0, "b": 1, "c": 2}
    assert measures.judged_at_k(["a", "x", "b", "y", "c"], judged, 5) == pytest.approx(0.6)
    assert measures.judged_at_k(["a", "b"], judged, 2) == 1.0
    assert measures.judged_at_k([], judged, 3) == 0.0


# ---------------------------------------------------------------------------
# properties


def _spec_values(ranking, judged):
    """All measure families on one instance, skipping inapplicable ones."""
    out = {}
    rel = {d for d, g in judged.items() if g >= 1}
    if rel:
        out["AP"] = measures.average_precision(ranking, judged)
        out["R@3"] = measures.recall_at_k(ranking, judged, 3)
        out["Bpref"] = measures.bpref(ranking, judged)
    if any(g > 0 for g in judged.values()):
        out["nDCG"] = measures.ndcg(ranking, judged)
        out["nDCG-exp"] = measures.ndcg(ranking, judged, gain="exponential")
    out["P@3"] = measures.precision_at_k(ranking, judged, 3)
    out["RR"] = measures.reciprocal_rank(ranking, judged)
    out["Judged@3"] = measures.judged_at_k(ranking, judged, 3)
    return out


def test_score_order_invariance():
    rng = random.Random(3)
    for _ in range(50):
        judgments, rankings = oracles.random_instance(rng)
        for qid, ranking in rankings.items():
            judged = judgments[qid]
            entries = [(d, 10.0 - i) for i, d in enumerate(ranking)]
            scaled = [(d, s * 3.5 + 7.0) for d, s in entries]
            order_a = [d for d, _ in trec_io.canonical_order(entries)]
            order_b = [d for d, _ in trec_io.canonical_order(scaled)]
            assert order_a == order_b
            assert _spec_values(order_a, judged) == _spec_values(order_b, judged)


def test_monotonicity_swap_adjacent():
    rng = random.Random(4)
    for _ in range(200):
        n = rng.randint(2, 8)
        pattern = [rng.randint(0, 1) for _ in range(n)]
        judged = {f"d{i}": g for i, g in enumerate(pattern)}
        if not any(pattern):
            continue
        ranking = [f"d{i}" for i in range(n)]
        swaps = [i for i in range(n - 1) if pattern[i] == 0 and pattern[i + 1] == 1]
        if not swaps:
            continue
        i = rng.choice(swaps)
        improved = ranking.copy()
        improved[i], improved[i + 1] = improved[i + 1], improved[i]
        assert measures.average_precision(improved, judged) >= measures.average_precision(ranking, judged)
        assert measures.reciprocal_rank(improved, judged) >= measures.reciprocal_rank(ranking, judged)
        assert measures.ndcg(improved, judged) >= measures.ndcg(ranking, judged)
        for k in range(i + 1, n + 1):
            assert measures.precision_at_k(improved, judged, k) >= measures.precision_at_k(
                ranking, judged, k
            )


def test_scores_in_unit_range_random():
    rng = random.Random(5)
    for _ in range(200):
        judgments, rankings = oracles.random_instance(rng)
        for qid, ranking in rankings.items():
            for value in _spec_values(ranking, judgments[qid]).values():
                assert 0.0 <= value <= 1.0 + 1e-12


# ---------------------------------------------------------------------------
# evaluate()


def _toy_matrix(toy_stores, specs=None, **kwargs):
    _, qrels, runs = toy_stores
    if specs is None:
        specs = [measures.parse_measure_spec("AP")]
    return measures.evaluate(runs, qrels, specs, **kwargs)


def test_evaluate_mean_is_arithmetic_mean(toy_stores):
    matrix = _toy_matrix(toy_stores)
    for run_id in matrix.run_ids:
        qids = matrix.measure_qids["AP"]
        mean = sum(matrix.score(run_id, "AP", q) for q in qids) / len(qids)
        assert abs(matrix.mean(run_id, "AP") - mean) < 1e-12


def test_evaluate_simple_mean():
    qrels, _ = trec_io.parse_qrels(b"q1 0 d1 1\nq2 0 d2 1\n")
    runs, _ = trec_io.parse_runs(b"q1 Q0 d1 1 2.0 r\nq2 Q0 d9 1 2.0 r\nq2 Q0 d2 2 1.0 r\n")
    matrix = measures.evaluate(runs, qrels, [measures.parse_measure_spec("AP")])
    assert matrix.score("r", "AP", "q1") == 1.0
    assert matrix.score("r", "AP", "q2") == 0.5
    assert matrix.mean("r", "AP") == pytest.approx(0.75)


def test_evaluate_zero_fill_missing_query():
    qrels, _ = trec_io.parse_qrels(b"q1 0 d1 1\nq2 0 d2 1\n")
    runs, _ = trec_io.parse_runs(b"q1 Q0 d1 1 2.0 r\n")
    matrix = measures.evaluate(runs, qrels, [measures.parse_measure_spec("AP")])
    assert matrix.score("r", "AP", "q2") == 0.0
    assert matrix.mean("r", "AP") == pytest.approx(0.5)


def test_evaluate_intersect_policy():
    qrels, _ = trec_io.parse_qrels(b"q1 0 d1 1\nq2 0 d2 1\n")
    runs, _ = trec_io.parse_runs(b"q1 Q0 d1 1 2.0 r\n")
    matrix = measures.evaluate(
        runs, qrels, [measures.parse_measure_spec("AP")], missing_query_policy="intersect"
    )
    assert matrix.measure_qids["AP"] == ("q1",)
    assert matrix.mean("r", "AP") == 1.0


def test_evaluate_excludes_zero_relevant_queries():
    qrels, _ = trec_io.parse_qrels(b"q1 0 d1 1\nq2 0 d2 0\n")
    runs, _ = trec_io.parse_runs(b"q1 Q0 d1 1 1.0 r\nq2 Q0 d2 1 1.0 r\n")
    matrix = measures.evaluate(runs, qrels, [measures.parse_measure_spec("AP")])
    assert matrix.eval_qids == ("q1",)
    assert matrix.excluded_qids == ("q2",)


def test_evaluate_no_evaluable_queries():
    qrels, _ = trec_io.parse_qrels(b"q1 0 d1 0\n")
    runs, _ = trec_io.parse_runs(b"q1 Q0 d1 1 1.0 r\n")
    with pytest.raises(WorkbenchError) as exc:
        measures.evaluate(runs, qrels, [measures.parse_measure_spec("AP")])
    assert exc.value.code == measures.NO_EVALUABLE_QUERIES


def test_evaluate_deterministic_parallel(toy_stores):
    from irworkbench import jsoncanon

    specs = [measures.parse_measure_spec(m) for m in ["AP", "nDCG@10", "P@2", "RR", "bpref"]]
    sequential = _toy_matrix(toy_stores, specs=specs, parallel=False)
    threaded = _toy_matrix(toy_stores, specs=specs, parallel=True)
    assert jsoncanon.dump_bytes(sequential.to_json()) == jsoncanon.dump_bytes(threaded.to_json())


def test_evaluate_scores_match_oracle(toy_stores):
    _, qrels, runs = toy_stores
    specs = [measures.parse_measure_spec(m) for m in ["AP", "nDCG@10", "P@2", "R@3", "RR", "bpref", "Judged@3"]]
    matrix = measures.evaluate(runs, qrels, specs)
    brute = {
        "AP": oracles.brute_ap,
        "nDCG@10": lambda r, j: oracles.brute_ndcg(r, j, 10),
        "P@2": lambda r, j: oracles.brute_precision(r, j, 2),
        "R@3": lambda r, j: oracles.brute_recall(r, j, 3),
        "RR": oracles.brute_rr,
        "Bpref": oracles.brute_bpref,
        "Judged@3": lambda r, j: oracles.brute_judged(r, j, 3),
    }
    for run in runs:
        for spec in specs:
            label = spec.label()
            for qid in matrix.measure_qids[label]:
                expected = brute[label](run.doc_ids(qid), qrels.judgments[qid])
                assert matrix.score(run.run_id, label, qid) == pytest.approx(expected, abs=1e-9)
