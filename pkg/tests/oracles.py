"""Independent brute-force oracles used to cross-check the engine.

Each function is written directly from the measure definitions with naive
O(n^2) prefix scans and exhaustive enumeration, deliberately sharing no
code with the package under test.
"""

from __future__ import annotations

import itertools
import math


def _prefix_relevant(ranking, relevant, i):
    return sum(1 for doc in ranking[:i] if doc in relevant)


def brute_ap(ranking, judged, rel_threshold=1):
    relevant = {d for d, g in judged.items() if g >= rel_threshold}
    total = 0.0
    for i in range(1, len(ranking) + 1):
        if ranking[i - 1] in relevant:
            total += _prefix_relevant(ranking, relevant, i) / i
    return total / len(relevant)


def brute_ndcg(ranking, judged, k=None, gain="linear"):
    if k is None:
        k = len(ranking)

    def g(grade):
        grade = max(grade, 0)
        return grade if gain == "linear" else 2**grade - 1

    dcg = 0.0
    for i in range(1, min(k, len(ranking)) + 1):
        dcg += g(judged.get(ranking[i - 1], 0)) / math.log2(i + 1)
    ideal = sorted((x for x in judged.values() if x > 0), reverse=True)
    idcg = 0.0
    for i in range(1, min(k, len(ideal)) + 1):
        idcg += g(ideal[i - 1]) / math.log2(i + 1)
    return dcg / idcg


def brute_precision(ranking, judged, k, rel_threshold=1):
    relevant = {d for d, g in judged.items() if g >= rel_threshold}
    return _prefix_relevant(ranking, relevant, k) / k


def brute_recall(ranking, judged, k, rel_threshold=1):
    relevant = {d for d, g in judged.items() if g >= rel_threshold}
    return _prefix_relevant(ranking, relevant, k) / len(relevant)


def brute_rr(ranking, judged, k=None, rel_threshold=1):
    relevant = {d for d, g in judged.items() if g >= rel_threshold}
    depth = len(ranking) if k is None else k
    for i in range(1, min(depth, len(ranking)) + 1):
        if ranking[i - 1] in relevant:
            return 1.0 / i
    return 0.0


def brute_bpref(ranking, judged, rel_threshold=1):
    relevant = {d for d, g in judged.items() if g >= rel_threshold}
    nonrelevant = {d for d, g in judged.items() if g < rel_threshold}
    r, n = len(relevant), len(nonrelevant)
    total = 0.0
    for i in range(1, len(ranking) + 1):
        doc = ranking[i - 1]
        if doc not in relevant:
            continue
        above = sum(1 for other in ranking[: i - 1] if other in nonrelevant)
        if min(r, n) == 0:
            total += 1.0
        else:
            total += 1.0 - min(above, r) / min(r, n)
    return total / r


def brute_judged(ranking, judged, k):
    return sum(1 for doc in ranking[:k] if doc in judged) / k


def brute_wilcoxon_exact_p(differences):
    """Two-sided exact signed-rank p by enumerating all sign assignments."""
    d = [x for x in differences if x != 0]
    n = len(d)
    if n == 0:
        return 1.0
    magnitudes = sorted(abs(x) for x in d)
    assert len(set(magnitudes)) == n, "oracle requires tie-free samples"
    rank_of = {mag: i + 1 for i, mag in enumerate(magnitudes)}
    w_plus = sum(rank_of[abs(x)] for x in d if x > 0)
    total = n * (n + 1) // 2
    w_obs = min(w_plus, total - w_plus)
    count = 0
    for signs in itertools.product((0, 1), repeat=n):
        w = sum(rank for rank, s in zip(range(1, n + 1), signs) if s)
        if w <= w_obs:
            count += 1
    return min(1.0, 2.0 * count / 2**n)


def brute_interpolated_pr(ranking, relevant_docs):
    """11-point interpolated precision from precision/recall at every rank."""
    levels = [i / 10 for i in range(11)]
    points = []
    for i in range(1, len(ranking) + 1):
        hits = _prefix_relevant(ranking, relevant_docs, i)
        points.append((hits / len(relevant_docs), hits / i))
    out = []
    for level in levels:
        candidates = [p for r, p in points if r >= level]
        out.append(max(candidates) if candidates else 0.0)
    return out


def brute_multi_query_documents(judgments, min_queries, rel_threshold=1):
    docs = {doc for per_query in judgments.values() for doc in per_query}
    result = []
    for doc in docs:
        qids = [q for q in judgments if judgments[q].get(doc, 0) >= rel_threshold]
        if len(qids) >= min_queries:
            result.append((doc, sorted(qids)))
    result.sort(key=lambda t: (-len(t[1]), t[0]))
    return result


def random_instance(rng, max_docs=8, max_queries=4, max_grade=2):
    """One random qrels+ranking instance for oracle comparisons."""
    n_queries = rng.randint(1, max_queries)
    docs = [f"d{i}" for i in range(max_docs)]
    judgments = {}
    rankings = {}
    for qi in range(n_queries):
        qid = f"q{qi}"
        judged_docs = rng.sample(docs, rng.randint(1, max_docs))
        judgments[qid] = {d: rng.randint(0, max_grade) for d in judged_docs}
        pool = rng.sample(docs, rng.randint(0, max_docs))
        rankings[qid] = pool
    return judgments, rankings
