"""Batch front end over the analysis engine.

Subcommands: validate, eval, compare, report, serve. Tables go to standard
output, logs to standard error. Exit codes: 0 success, 1 domain/data error,
2 usage error.

`--config FILE` (JSON object) supplies defaults under the same keys as the
flags; explicit flags take precedence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import jsoncanon
from . import measures as _measures
from . import report as _report
from . import stats as _stats
from . import trec_io
from .errors import WorkbenchError
from .session import (
    STATE_DONE,
    AnalysisSession,
    ResultRecord,
    UploadRecord,
    analyze,
    canonicalize_parameters,
    import_session_json,
)

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2

# Errors that indicate a bad invocation rather than bad data.
_USAGE_CODES = frozenset(
    {
        _measures.UNKNOWN_MEASURE,
        _measures.MISSING_CUTOFF,
        _measures.UNEXPECTED_CUTOFF,
        _measures.INVALID_CUTOFF,
        _measures.INVALID_THRESHOLD,
        _stats.INVALID_ALPHA,
    }
)

DEFAULT_MEASURES = "AP,nDCG@10,P@10,RR"


def _read(path: str) -> bytes:
    return Path(path).read_bytes()


def _parse_specs(measures_arg: str, rel_threshold: int, gain: str) -> list[_measures.MeasureSpec]:
    names = [m for m in measures_arg.split(",") if m.strip()]
    if not names:
        raise WorkbenchError(_measures.UNKNOWN_MEASURE, "no measures given")
    return [
        _measures.with_overrides(_measures.parse_measure_spec(name), rel_threshold, gain) for name in names
    ]


def _load_qrels(path: str) -> trec_io.QrelsStore:
    store, report = trec_io.parse_qrels(_read(path))
    if store is None:
        _print_report(f"qrels ({path})", report, file=sys.stderr)
        raise WorkbenchError(report.errors[0].code, f"qrels file {path} rejected")
    return store


def _load_runs(paths: list[str]) -> list[trec_io.RunStore]:
    stores: list[trec_io.RunStore] = []
    seen: set[str] = set()
    for path in paths:
        parsed, report = trec_io.parse_runs(_read(path))
        if not parsed:
            _print_report(f"run ({path})", report, file=sys.stderr)
            raise WorkbenchError(report.errors[0].code, f"run file {path} rejected")
        for store in parsed:
            if store.run_id in seen:
                raise WorkbenchError(
                    "DUPLICATE_RUN_NAME", f"run id {store.run_id!r} appears in more than one file"
                )
            seen.add(store.run_id)
            stores.append(store)
    return stores


def _print_report(label: str, report: trec_io.ValidationReport, file=None) -> None:
    file = file if file is not None else sys.stdout
    status = "OK" if report.ok else "REJECTED"
    print(
        f"{label}: {status} ({report.stats.records_kept} kept, "
        f"{report.stats.records_dropped} dropped, {len(report.warnings)} warnings)",
        file=file,
    )
    for issue in report.errors:
        print(f"  line {issue.line}: error {issue.code}: {issue.message}", file=file)
    for issue in report.warnings:
        print(f"  line {issue.line}: warning {issue.code}: {issue.message}", file=file)


# ---------------------------------------------------------------------------
# validate


def cmd_validate(args) -> int:
    ok = True
    queries = qrels = None
    runs: list[trec_io.RunStore] = []
    if args.queries:
        queries, report = trec_io.parse_queries(_read(args.queries))
        _print_report(f"queries ({args.queries})", report)
        ok = ok and report.ok
    if args.qrels:
        qrels, report = trec_io.parse_qrels(_read(args.qrels))
        _print_report(f"qrels ({args.qrels})", report)
        ok = ok and report.ok
    for path in args.runs or []:
        stores, report = trec_io.parse_runs(_read(path))
        _print_report(f"run ({path})", report)
        ok = ok and report.ok
        runs.extend(stores)
    if qrels is not None:
        alignment = trec_io.validate_alignment(queries, qrels, runs)
        _print_report("alignment", alignment)
    return EXIT_OK if ok else EXIT_DOMAIN


# ---------------------------------------------------------------------------
# eval


def cmd_eval(args) -> int:
    specs = _parse_specs(args.measures, args.rel_threshold, args.gain)
    qrels = _load_qrels(args.qrels)
    runs = _load_runs(args.runs)
    matrix = _measures.evaluate(runs, qrels, specs, missing_query_policy=args.policy)
    labels = [s.label() for s in specs]
    width = max(len(r) for r in matrix.run_ids)
    print(" ".join(["run".ljust(width)] + [l.rjust(12) for l in labels]))
    for run_id in sorted(matrix.run_ids):
        cells = [f"{matrix.mean(run_id, label):.6f}".rjust(12) for label in labels]
        print(" ".join([run_id.ljust(width)] + cells))
    print(
        f"({len(matrix.eval_qids)} queries evaluated, {len(matrix.excluded_qids)} excluded)",
        file=sys.stderr,
    )
    if args.out:
        Path(args.out).write_bytes(_report.eval_table_csv(matrix))
        print(f"wrote {args.out}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# compare


def cmd_compare(args) -> int:
    if not (0.0 < args.alpha < 1.0):
        raise WorkbenchError(_stats.INVALID_ALPHA, f"alpha must lie in (0, 1), got {args.alpha}")
    spec = _measures.with_overrides(
        _measures.parse_measure_spec(args.measure), args.rel_threshold, args.gain
    )
    qrels = _load_qrels(args.qrels)
    runs = _load_runs(args.runs)
    if len(runs) < 2:
        print("error: compare needs at least 2 runs", file=sys.stderr)
        return EXIT_USAGE
    run_ids = [r.run_id for r in runs]
    if args.baseline not in run_ids:
        raise WorkbenchError("UNKNOWN_RUN", f"baseline {args.baseline!r} not among runs {run_ids}")

    matrix = _measures.evaluate(runs, qrels, [spec], missing_query_policy=args.policy)
    label = spec.label()
    qids = list(matrix.measure_qids[label])
    rows = []
    raw_p = []
    for run_id in sorted(run_ids):
        if run_id == args.baseline:
            continue
        sample = _stats.PairedSample(
            qids=tuple(qids),
            a=tuple(matrix.score(run_id, label, q) for q in qids),
            b=tuple(matrix.score(args.baseline, label, q) for q in qids),
        )
        result = _stats.paired_t_test(sample) if args.test == "t" else _stats.wilcoxon_signed_rank(sample)
        rows.append(
            {
                "baseline": args.baseline,
                "comparison": run_id,
                "measure": label,
                "test": result.method,
                "statistic": result.statistic,
                "p": result.p_value,
            }
        )
        raw_p.append(result.p_value)
    correction = _stats.apply_correction(args.correction, raw_p, args.alpha)
    for row, adj, rej in zip(rows, correction.adjusted_p, correction.reject):
        row["adjusted_p"] = adj
        row["significant"] = rej

    print(f"baseline {args.baseline}  measure {label}  test {args.test}  correction {args.correction}")
    for row in rows:
        verdict = "significant" if row["significant"] else "n.s."
        print(
            f"  vs {row['comparison']}: stat={row['statistic']:.6f} p={row['p']:.6f} "
            f"adj_p={row['adjusted_p']:.6f} [{verdict} at alpha={args.alpha:g}]"
        )
    if args.out:
        Path(args.out).write_bytes(_report.significance_table_csv(rows))
        print(f"wrote {args.out}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# report


def _attach_local(session: AnalysisSession, kind: str, name: str, raw: bytes) -> None:
    if kind == "queries":
        store, rep = trec_io.parse_queries(raw)
        if store is None:
            raise WorkbenchError(rep.errors[0].code, f"queries file {name} rejected")
        session.queries = store
        session.uploads["queries"] = UploadRecord("queries", name, jsoncanon.digest_bytes(raw), rep)
    elif kind == "qrels":
        store, rep = trec_io.parse_qrels(raw)
        if store is None:
            raise WorkbenchError(rep.errors[0].code, f"qrels file {name} rejected")
        session.qrels = store
        session.uploads["qrels"] = UploadRecord("qrels", name, jsoncanon.digest_bytes(raw), rep)
    else:
        stores, rep = trec_io.parse_runs(raw)
        if not stores:
            raise WorkbenchError(rep.errors[0].code, f"run file {name} rejected")
        digest = jsoncanon.digest_bytes(raw)
        for store in stores:
            if store.run_id in session.runs:
                raise WorkbenchError("DUPLICATE_RUN_NAME", f"run id {store.run_id!r} already loaded")
            session.runs[store.run_id] = store
            session.uploads[f"run:{store.run_id}"] = UploadRecord("run", store.run_id, digest, rep)


def _local_session_from_files(args) -> AnalysisSession:
    session = AnalysisSession(session_id="pending", created_at="", modified_at="")
    if args.queries:
        _attach_local(session, "queries", Path(args.queries).name, _read(args.queries))
    if args.qrels:
        _attach_local(session, "qrels", Path(args.qrels).name, _read(args.qrels))
    for path in args.runs or []:
        _attach_local(session, "run", Path(path).name, _read(path))
    # Deterministic id so pinned-timestamp renders are byte-identical.
    session.session_id = "local-" + jsoncanon.digest(session.input_digests())[:12]
    return session


def _run_local(session: AnalysisSession, kind: str, params: dict | None) -> ResultRecord | None:
    """Execute one analysis synchronously into the session; None on domain failure."""
    try:
        canon = canonicalize_parameters(kind, params)
        reference = jsoncanon.digest(
            {"kind": kind, "parameters": canon, "inputs": session.input_digests()}
        )
        if reference in session.results:
            return session.results[reference]
        payload = analyze(session, kind, canon)
    except WorkbenchError as exc:
        print(f"note: skipping {kind}: {exc.code}: {exc.message}", file=sys.stderr)
        return None
    record = ResultRecord(
        reference=reference, kind=kind, parameters=canon, state=STATE_DONE, payload=payload
    )
    session.results[reference] = record
    return record


def _default_analysis_suite(session: AnalysisSession, args) -> None:
    measures_arg = [m for m in args.measures.split(",") if m.strip()]
    base_params = {
        "rel_threshold": args.rel_threshold,
        "gain": args.gain,
        "missing_query_policy": args.policy,
    }
    if session.qrels is not None and session.runs:
        _run_local(session, "evaluate", {"measures": measures_arg, **base_params})
        for name in sorted(session.runs):
            _run_local(session, "pr_curve", {"run": name, "rel_threshold": args.rel_threshold})
        run_names = sorted(session.runs)
        if len(run_names) >= 2:
            baseline = args.baseline or run_names[0]
            _run_local(
                session,
                "significance",
                {"baseline": baseline, "measure": measures_arg[0], **base_params},
            )
            for name in run_names:
                if name != baseline:
                    _run_local(
                        session,
                        "query_delta",
                        {"baseline": baseline, "comparison": name, "measure": measures_arg[0], **base_params},
                    )
    if session.queries is not None:
        _run_local(session, "token_frequencies", None)
        _run_local(session, "projection", None)
        if session.qrels is not None and session.runs:
            for buckets in (4, 2):
                record = _run_local(
                    session,
                    "query_length",
                    {"run": sorted(session.runs)[0], "measure": measures_arg[0], "n_buckets": buckets, **base_params},
                )
                if record is not None:
                    break
    if session.qrels is not None:
        _run_local(session, "qrels_distribution", None)
        shared = _run_local(session, "multi_query_documents", None)
        doc_id = None
        if shared is not None and shared.payload["documents"]:
            doc_id = shared.payload["documents"][0][0]
        elif session.runs:
            first_run = session.runs[sorted(session.runs)[0]]
            qids = sorted(first_run.rankings)
            if qids:
                doc_id = first_run.rankings[qids[0]][0][0]
        if doc_id and session.runs:
            _run_local(session, "document_rank_trace", {"doc_id": doc_id})


def cmd_report(args) -> int:
    if args.session:
        session = import_session_json(_read(args.session))
    else:
        if not args.qrels and not args.queries:
            print("error: report needs --session or input files (--queries/--qrels/--runs)", file=sys.stderr)
            return EXIT_USAGE
        session = _local_session_from_files(args)
        _default_analysis_suite(session, args)
    sections = [s for s in args.sections.split(",") if s] if args.sections else None
    html = _report.render_html_report(session, sections, generated_at=args.timestamp)
    if args.out:
        Path(args.out).write_bytes(html)
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        sys.stdout.buffer.write(html)
    return EXIT_OK


# ---------------------------------------------------------------------------
# serve


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app
    from .session import SessionManager

    host, _, port_str = args.addr.rpartition(":")
    host = host or "127.0.0.1"
    try:
        port = int(port_str)
    except ValueError:
        print(f"error: invalid address {args.addr!r}", file=sys.stderr)
        return EXIT_USAGE
    manager = SessionManager(args.data_dir, max_upload_bytes=args.max_upload)
    app = create_app(manager, ui_dir=args.ui_dir)
    try:
        uvicorn.run(app, host=host, port=port, log_level="info")
    except (OSError, SystemExit) as exc:
        print(f"error: could not serve on {args.addr}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser(config: dict | None = None) -> argparse.ArgumentParser:
    config = config or {}

    def required(key: str) -> bool:
        return key not in config

    parser = argparse.ArgumentParser(prog="irworkbench", description=__doc__)
    parser.add_argument("--config", help="JSON file of flag defaults (flags take precedence)")
    sub = parser.add_subparsers(dest="command", required=True)

    def finish(p, func):
        p.set_defaults(**{k: v for k, v in config.items() if k not in ("config", "func")})
        p.set_defaults(func=func)

    p = sub.add_parser("validate", help="parse input files and print validation reports")
    p.add_argument("--queries")
    p.add_argument("--qrels")
    p.add_argument("--runs", nargs="*")
    finish(p, cmd_validate)

    def add_eval_args(p):
        p.add_argument("--rel-threshold", type=int, default=1, dest="rel_threshold")
        p.add_argument("--gain", choices=["linear", "exponential"], default="linear")
        p.add_argument("--policy", choices=["zero_fill", "intersect"], default="zero_fill")

    p = sub.add_parser("eval", help="evaluate runs against qrels")
    p.add_argument("--qrels", required=required("qrels"))
    p.add_argument("--runs", nargs="+", required=required("runs"))
    p.add_argument("--measures", default=DEFAULT_MEASURES)
    p.add_argument("--out", help="write the per-query CSV table here")
    add_eval_args(p)
    finish(p, cmd_eval)

    p = sub.add_parser("compare", help="significance-test runs against a baseline")
    p.add_argument("--qrels", required=required("qrels"))
    p.add_argument("--runs", nargs="+", required=required("runs"))
    p.add_argument("--baseline", required=required("baseline"))
    p.add_argument("--measure", default="AP")
    p.add_argument("--test", choices=["t", "wilcoxon"], default="t")
    p.add_argument("--correction", choices=["holm", "bonferroni"], default="holm")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out", help="write the significance CSV table here")
    add_eval_args(p)
    finish(p, cmd_compare)

    p = sub.add_parser("report", help="run the default analysis suite and write an HTML report")
    p.add_argument("--session", help="render from a session export instead of raw files")
    p.add_argument("--queries")
    p.add_argument("--qrels")
    p.add_argument("--runs", nargs="*")
    p.add_argument("--measures", default=DEFAULT_MEASURES)
    p.add_argument("--baseline")
    p.add_argument("--sections", help="comma-separated subset of performance,query,text,collection")
    p.add_argument("--timestamp", help="pin the report timestamp (ISO-8601) for reproducible bytes")
    p.add_argument("--out", help="write the HTML report here (default: stdout)")
    add_eval_args(p)
    finish(p, cmd_report)

    p = sub.add_parser("serve", help="serve the HTTP API")
    p.add_argument("--addr", default="127.0.0.1:8040")
    p.add_argument("--data-dir", default="./irworkbench-data", dest="data_dir")
    p.add_argument("--max-upload", type=int, default=512 * 1024 * 1024, dest="max_upload")
    p.add_argument("--ui-dir", dest="ui_dir", help="serve a built dashboard from this directory")
    finish(p, cmd_serve)
    return parser


def _load_config(argv: list[str]) -> tuple[list[str], dict]:
    """Extract --config from argv and load its JSON dict of flag defaults."""
    for i, token in enumerate(argv):
        if token == "--config":
            if i + 1 >= len(argv):
                raise WorkbenchError("INVALID_CONFIG", "--config needs a file path")
            path = argv[i + 1]
            rest = argv[:i] + argv[i + 2 :]
        elif token.startswith("--config="):
            path = token.split("=", 1)[1]
            rest = argv[:i] + argv[i + 1 :]
        else:
            continue
        try:
            config = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise WorkbenchError("INVALID_CONFIG", f"could not read config {path}: {exc}") from exc
        if not isinstance(config, dict):
            raise WorkbenchError("INVALID_CONFIG", "config file must hold a JSON object")
        return rest, config
    return argv, {}


def run(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv, config = _load_config(argv)
    except WorkbenchError as exc:
        print(f"error: {exc.code}: {exc.message}", file=sys.stderr)
        return EXIT_USAGE
    args = build_parser(config).parse_args(argv)
    try:
        return args.func(args)
    except WorkbenchError as exc:
        print(f"error: {exc.code}: {exc.message}", file=sys.stderr)
        return EXIT_USAGE if exc.code in _USAGE_CODES else EXIT_DOMAIN
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
