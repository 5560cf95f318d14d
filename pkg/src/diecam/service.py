"""HTTP service exposing analysis sessions.

Uploads are raw STL bytes (text or binary, auto-detected); all analysis
results are JSON documents identical to what the CLI writes for the same
configuration. Domain errors map to structured JSON error bodies: 404 for
unknown sessions, 422 for rejected inputs and overrides.

Optional persistence keeps one JSON bundle per session in a directory;
bundles found there are restored on startup.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

from fastapi import FastAPI, Query, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .colors import scale_definition
from .errors import DiecamError, SessionError
from .pipeline import default_compatibility
from .session import AnalysisSession, SessionStore

logger = logging.getLogger(__name__)


def _error_response(exc: DiecamError, status: int) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": exc.to_dict()})


def create_app(persist_dir: str | None = None,
               tools=None, tech=None, compatibility=None) -> FastAPI:
    """Build the service; optional bundle persistence and default context."""
    app = FastAPI(title="diecam", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"])
    store = SessionStore()
    app.state.store = store
    persist = Path(persist_dir) if persist_dir else None
    default_compat = compatibility if compatibility is not None \
        else default_compatibility()

    def save(session: AnalysisSession) -> None:
        if persist is None:
            return
        persist.mkdir(parents=True, exist_ok=True)
        path = persist / f"{session.id}.json"
        path.write_text(session.bundle_json(), encoding="utf-8")
        logger.info("persisted session %s to %s", session.id, path)

    if persist is not None and persist.is_dir():
        for path in sorted(persist.glob("*.json")):
            try:
                doc = json.loads(path.read_text(encoding="utf-8"))
                store.add(AnalysisSession.from_bundle(doc))
                logger.info("restored session from %s", path)
            except (DiecamError, ValueError, KeyError) as exc:
                logger.warning("skipping bundle %s: %s", path, exc)

    @app.exception_handler(DiecamError)
    async def handle_domain_error(request: Request, exc: DiecamError):
        status = 404 if isinstance(exc, SessionError) and \
            "unknown session" in exc.message else 422
        return _error_response(exc, status)

    @app.get("/")
    def health() -> dict:
        return {"service": "diecam", "sessions": len(store)}

    @app.get("/meta/colorscale")
    def colorscale() -> dict:
        return scale_definition()

    @app.get("/sessions")
    def list_sessions() -> list:
        return store.list()

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request, name: str = "") -> dict:
        data = await request.body()
        session = AnalysisSession(data, name=name,
                                  tools=tools, tech=tech,
                                  compatibility=default_compat)
        store.add(session)
        save(session)
        return session.summary()

    @app.post("/sessions/from-bundle", status_code=201)
    async def restore_session(request: Request) -> dict:
        doc = await request.json()
        session = AnalysisSession.from_bundle(doc)
        store.add(session)
        save(session)
        return session.summary()

    @app.get("/sessions/{session_id}")
    def session_summary(session_id: str) -> dict:
        return store.get(session_id).summary()

    @app.get("/sessions/{session_id}/mesh")
    def mesh_document(session_id: str) -> dict:
        return store.get(session_id).mesh_document()

    @app.get("/sessions/{session_id}/contact-map")
    def contact_map_document(
            session_id: str,
            tau_draft: float | None = Query(default=None),
            tau_flat: float | None = Query(default=None)) -> dict:
        return store.get(session_id).contact_doc(tau_draft=tau_draft,
                                                 tau_flat=tau_flat)

    @app.get("/sessions/{session_id}/continuity")
    def continuity(session_id: str,
                   directions: str | None = Query(default=None)) -> dict:
        return store.get(session_id).continuity_doc(directions=directions)

    @app.get("/sessions/{session_id}/segmentation")
    def segmentation(session_id: str) -> dict:
        return store.get(session_id).segmentation_doc()

    @app.get("/sessions/{session_id}/plan")
    def plan(session_id: str) -> dict:
        return store.get(session_id).plan_doc()

    @app.post("/sessions/{session_id}/overrides")
    async def overrides(session_id: str, request: Request) -> dict:
        session = store.get(session_id)
        try:
            patch = await request.json()
        except ValueError as exc:
            return _error_response(
                SessionError(f"override body is not valid JSON: {exc}"), 422)
        result = session.apply_overrides(patch)
        save(session)
        return result

    @app.get("/sessions/{session_id}/bundle")
    def bundle(session_id: str) -> Response:
        content = store.get(session_id).bundle_json()
        return Response(content=content, media_type="application/json")

    return app


def run_server(host: str = "127.0.0.1", port: int = 8000,
               persist_dir: str | None = None, tools=None, tech=None,
               compatibility=None) -> None:
    import uvicorn

    app = create_app(persist_dir=persist_dir, tools=tools, tech=tech,
                     compatibility=compatibility)
    uvicorn.run(app, host=host, port=port, log_level="info")
