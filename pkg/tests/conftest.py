import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for the shared oracles module

FIXTURES = Path(__file__).parent / "fixtures"
TOY = FIXTURES / "toy"


@pytest.fixture(scope="session")
def toy_paths() -> dict:
    return {
        "queries": TOY / "queries.tsv",
        "qrels": TOY / "qrels.txt",
        "runs": [TOY / "run_bm25.txt", TOY / "run_dpr.txt"],
    }


@pytest.fixture()
def toy_stores(toy_paths):
    from irworkbench import trec_io

    queries, qreport = trec_io.parse_queries(toy_paths["queries"].read_bytes())
    qrels, rreport = trec_io.parse_qrels(toy_paths["qrels"].read_bytes())
    runs = []
    for path in toy_paths["runs"]:
        stores, _ = trec_io.parse_runs(path.read_bytes())
        runs.extend(stores)
    assert qreport.ok and rreport.ok and len(runs) == 2
    return queries, qrels, runs
