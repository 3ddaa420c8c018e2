"""HTTP API over the session engine.

Endpoints (JSON bodies in canonical form, errors as {code, message, details}):

    POST /api/sessions                             -> {session_id}
    POST /api/sessions/{id}/files?kind=&name=      -> ValidationReport
    GET  /api/sessions/{id}                        -> session summary
    POST /api/sessions/{id}/analyses               -> {reference, state}
    GET  /api/sessions/{id}/results/{reference}    -> payload | pending | failed
    GET  /api/sessions/{id}/results/{reference}/csv-> CSV table (evaluate/significance)
    GET  /api/sessions/{id}/report?sections=&timestamp= -> HTML report
    GET  /api/sessions/{id}/export                 -> canonical JSON dump
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import report as _report
from .errors import WorkbenchError
from .session import (
    RESULT_FAILED,
    RESULT_PENDING,
    STATE_DONE,
    STATE_FAILED,
    SessionManager,
)

# HTTP status per error code; anything unlisted maps to 422.
_STATUS = {
    "UNKNOWN_SESSION": 404,
    "UNKNOWN_REFERENCE": 404,
    "UNKNOWN_ANALYSIS": 422,
    "UNKNOWN_KIND": 422,
    "DOC_NOT_FOUND": 404,
    "DUPLICATE_RUN_NAME": 409,
    "MISSING_INPUTS": 422,
    "PAYLOAD_TOO_LARGE": 413,
    "STORAGE_FAILURE": 500,
    "RESULT_PENDING": 202,
    "RESULT_FAILED": 500,
}


def _error_response(exc: WorkbenchError) -> JSONResponse:
    return JSONResponse(status_code=_STATUS.get(exc.code, 422), content=exc.to_json())


def create_app(manager: SessionManager, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="irworkbench", docs_url=None, redoc_url=None)
    # the dashboard may be served from another origin during development
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(WorkbenchError)
    async def _handle_domain_error(_request: Request, exc: WorkbenchError):
        return _error_response(exc)

    @app.post("/api/sessions")
    async def create_session():
        return {"session_id": manager.create_session()}

    @app.post("/api/sessions/{session_id}/files")
    async def upload_file(session_id: str, request: Request, kind: str, name: str | None = None):
        raw = await request.body()
        report = manager.ingest_file(session_id, kind, name, raw)
        body = report.to_json()
        if report.errors:
            first = report.errors[0]
            return JSONResponse(
                status_code=422,
                content={
                    "code": first.code,
                    "message": first.message,
                    "details": {"validation": body},
                },
            )
        return body

    @app.get("/api/sessions/{session_id}")
    async def session_summary(session_id: str):
        return manager.session_summary(session_id)

    @app.post("/api/sessions/{session_id}/analyses")
    async def run_analysis(session_id: str, request: Request):
        try:
            body = json.loads(await request.body() or b"{}")
        except json.JSONDecodeError:
            raise WorkbenchError("INVALID_PARAMETER", "request body must be a JSON object") from None
        if not isinstance(body, dict) or "kind" not in body:
            raise WorkbenchError("INVALID_PARAMETER", "body must contain an analysis 'kind'")
        record = manager.run_analysis(session_id, body["kind"], body.get("parameters"))
        return {"reference": record.reference, "state": record.state}

    @app.get("/api/sessions/{session_id}/results/{reference}")
    async def get_result(session_id: str, reference: str):
        record = manager.get_result(session_id, reference)
        if record.state == STATE_FAILED:
            return JSONResponse(
                status_code=_STATUS[RESULT_FAILED],
                content={
                    "code": RESULT_FAILED,
                    "message": "analysis failed",
                    "details": {"error": record.error, "kind": record.kind},
                },
            )
        if record.state != STATE_DONE:
            return JSONResponse(
                status_code=_STATUS[RESULT_PENDING],
                content={
                    "code": RESULT_PENDING,
                    "message": "analysis not finished",
                    "details": {"state": record.state},
                },
            )
        return {
            "reference": record.reference,
            "kind": record.kind,
            "parameters": record.parameters,
            "state": record.state,
            "payload": record.payload,
        }

    @app.get("/api/sessions/{session_id}/results/{reference}/csv")
    async def get_result_csv(session_id: str, reference: str):
        record = manager.get_result(session_id, reference)
        if record.state != STATE_DONE:
            raise WorkbenchError(RESULT_PENDING, "analysis not finished", {"state": record.state})
        if record.kind == "evaluate":
            data = _report.eval_table_csv(record.payload)
        elif record.kind == "significance":
            data = _report.significance_table_csv(record.payload["rows"])
        else:
            raise WorkbenchError("INVALID_PARAMETER", f"no CSV rendering for analysis kind {record.kind!r}")
        return Response(content=data, media_type="text/csv")

    @app.get("/api/sessions/{session_id}/report")
    async def get_report(session_id: str, sections: str | None = None, timestamp: str | None = None):
        session = manager.get_session(session_id)
        section_list = _report.SECTION_ORDER if sections is None else [s for s in sections.split(",") if s]
        html = _report.render_html_report(session, list(section_list), generated_at=timestamp)
        return Response(content=html, media_type="text/html")

    @app.get("/api/sessions/{session_id}/export")
    async def export_session(session_id: str):
        from .session import export_session_json

        session = manager.get_session(session_id)
        return Response(content=export_session_json(session), media_type="application/json")

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
