"""HTTP service for the interactive improvement loop.

Sessions execute their pipeline on creation and run the analysis pipelines
in background threads; suggestion reads never block on a running analysis
(they report pending entries instead). Session mutations serialize through
the session lock; a generation counter drops analysis results that raced
with a plan edit.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .calls import LatencyConfig
from .corpus import CorpusError, load_corpus, source_schemas
from .plan import PlanError, plan_from_doc
from .session import ALL_SHADOWS, Session, SessionConfig, SessionError, StaleSuggestionError


class CreateSessionRequest(BaseModel):
    plan: dict
    corpus_dir: str


class PlanUpdateRequest(BaseModel):
    plan: dict


def _spawn_shadows(session: Session, sources=ALL_SHADOWS) -> None:
    session.mark_pending(sources)
    generation = session.generation
    snapshot = session.shadow_input()

    def work(source: str) -> None:
        try:
            outcome = session.compute_shadow(source, snapshot)
            session.post_outcome(outcome, generation)
        except Exception:  # pragma: no cover - surfaced via pending removal
            with session.lock:
                session.pending.discard(source)

    for source in sources:
        threading.Thread(target=work, args=(source,), daemon=True).start()


def create_app(
    data_dir: str | None = None,
    *,
    realistic_latency: bool = False,
    latency: LatencyConfig | None = None,
    static_dir: str | None = None,
    background: bool = True,
) -> FastAPI:
    """Build the service. ``background=False`` runs analyses synchronously
    inside the request, which keeps tests deterministic."""
    app = FastAPI(title="shadowpipe")
    sessions: dict[str, Session] = {}
    config_template = SessionConfig(latency=latency or LatencyConfig(), sleep=realistic_latency)

    def get_session(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return session

    def launch(session: Session) -> None:
        if background:
            _spawn_shadows(session)
        else:
            session.mark_pending(ALL_SHADOWS)
            session.run_shadows()

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.post("/sessions")
    def create_session(body: CreateSessionRequest) -> dict:
        directory = Path(body.corpus_dir if data_dir is None else data_dir)
        try:
            bundle = load_corpus(directory)
        except (CorpusError, FileNotFoundError) as e:
            raise HTTPException(status_code=422, detail=str(e)) from e
        try:
            plan = plan_from_doc(body.plan, source_schemas(bundle))
        except PlanError as e:
            raise HTTPException(status_code=422, detail=str(e)) from e
        session = Session(plan, bundle, SessionConfig(
            latency=config_template.latency, sleep=config_template.sleep,
        ))
        sessions[session.id] = session
        launch(session)
        return {"session_id": session.id, "metrics": session.metrics()}

    @app.get("/sessions/{session_id}")
    def get_session_doc(session_id: str) -> dict:
        return get_session(session_id).to_doc()

    @app.get("/sessions/{session_id}/suggestions")
    def get_suggestions(session_id: str) -> list[dict]:
        return get_session(session_id).suggestions_doc()

    @app.post("/sessions/{session_id}/suggestions/{suggestion_id}/apply")
    def apply_suggestion(session_id: str, suggestion_id: str) -> dict:
        session = get_session(session_id)
        try:
            applied = session.apply_suggestion(suggestion_id)
        except StaleSuggestionError as e:
            raise HTTPException(status_code=409, detail=str(e)) from e
        except SessionError as e:
            raise HTTPException(status_code=404 if "unknown" in str(e) else 409, detail=str(e)) from e
        launch(session)
        return {"metrics": session.metrics(), "applied": applied.to_doc()}

    @app.post("/sessions/{session_id}/suggestions/{suggestion_id}/dismiss")
    def dismiss_suggestion(session_id: str, suggestion_id: str) -> dict:
        session = get_session(session_id)
        try:
            session.dismiss_suggestion(suggestion_id)
        except SessionError as e:
            raise HTTPException(status_code=404, detail=str(e)) from e
        return {"ok": True}

    @app.put("/sessions/{session_id}/plan")
    def put_plan(session_id: str, body: PlanUpdateRequest) -> dict:
        session = get_session(session_id)
        try:
            plan = plan_from_doc(body.plan, source_schemas(session.bundle))
        except PlanError as e:
            raise HTTPException(status_code=422, detail=str(e)) from e
        policy, report = session.edit_plan(plan)
        launch(session)
        return {
            "metrics": session.metrics(),
            "policy": policy.to_doc(),
            "maintenance": report,
        }

    @app.get("/sessions/{session_id}/explanations/{suggestion_id}")
    def get_explanations(session_id: str, suggestion_id: str) -> list[dict]:
        session = get_session(session_id)
        try:
            suggestion = session.suggestion(suggestion_id)
        except SessionError as e:
            raise HTTPException(status_code=404, detail=str(e)) from e
        return [t.to_doc() for t in suggestion.explanation]

    @app.exception_handler(SessionError)
    def session_error_handler(_request, exc: SessionError):  # pragma: no cover - safety net
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
