"""HTTP/JSON API over the selection engine.

All bodies are JSON; errors come back as {code, message, detail} with
400 for validation problems, 404 for unknown names/ids, and 409 for
conflicts. Mutations are serialized through a single lock and persisted
immediately; reads work on immutable snapshots, so concurrent GETs never
observe torn state.
"""

from __future__ import annotations

import json
import os
import secrets
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from fastapi import Body, FastAPI, Query, Request
from fastapi.responses import JSONResponse

from . import agent, combine as combine_mod, explain, wire
from .errors import CropSelectError, NotFoundError, ValidationError
from .knowledgebase import (
    NoteEntry,
    ReferenceEntry,
    add_note,
    add_reference,
    list_references,
    load_db,
    save_db,
    upsert_species,
)
from .schema import CriteriaSchema, load_default_schema, parse_schema
from .selection import SelectionStore, evaluate
from .agent import ProfileStore, SessionEvent, record_event

_STATUS = {"NotFound": 404, "Conflict": 409, "DuplicateId": 409}


@dataclass
class ServiceConfig:
    db_path: str
    data_dir: str
    schema_path: str | None = None
    host: str = "127.0.0.1"
    port: int = 8571

    @classmethod
    def from_file(cls, path: str, **overrides) -> "ServiceConfig":
        raw = json.loads(Path(path).read_text("utf-8"))
        raw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**raw)


@dataclass
class Session:
    token: str
    user_id: str
    created_at: datetime
    active_selection: str | None = None


class AppState:
    """Shared mutable state; one writer lock, snapshot reads."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        if config.schema_path:
            self.schema = parse_schema(Path(config.schema_path).read_text("utf-8"))
        else:
            self.schema = load_default_schema()
        self.db = load_db(config.db_path, self.schema)
        data_dir = Path(config.data_dir)
        self.store = SelectionStore(data_dir / "selections")
        self.profiles = ProfileStore(data_dir / "profiles")
        self.sessions: dict[str, Session] = {}
        self.lock = threading.Lock()

    def persist_db(self):
        save_db(self.db, self.config.db_path, self.schema)

    def resolve_user(self, request: Request, user: str | None) -> str:
        token = request.headers.get("X-Session-Token")
        if token and token in self.sessions:
            return self.sessions[token].user_id
        return user or "anonymous"

    def log_event(self, user_id: str, kind) -> None:
        with self.lock:
            profile = self.profiles.load(user_id)
            profile = record_event(profile, SessionEvent(datetime.now(timezone.utc), kind))
            self.profiles.save(profile)


def build_app(config: ServiceConfig) -> FastAPI:
    state = AppState(config)
    app = FastAPI(title="cropselect", version="0.1.0")
    app.state.engine = state

    @app.exception_handler(CropSelectError)
    async def _domain_error(_request, exc: CropSelectError):
        return JSONResponse(status_code=_STATUS.get(exc.code, 400), content=exc.to_wire())

    @app.middleware("http")
    async def _cors(request, call_next):
        response = await call_next(request)
        response.headers["Access-Control-Allow-Origin"] = "*"
        response.headers["Access-Control-Allow-Headers"] = "Content-Type, X-Session-Token"
        response.headers["Access-Control-Allow-Methods"] = "GET, POST, PUT, OPTIONS"
        return response

    @app.post("/sessions")
    def create_session(payload: dict = Body(default={})):
        user_id = payload.get("user_id") or "anonymous"
        session = Session(secrets.token_urlsafe(16), user_id, datetime.now(timezone.utc))
        state.sessions[session.token] = session
        return {
            "token": session.token,
            "user_id": session.user_id,
            "created_at": session.created_at.isoformat(),
        }

    @app.get("/schema")
    def get_schema():
        return wire.schema_to_wire(state.schema)

    @app.get("/species/most-referenced")
    def most_referenced(k: int = Query(default=10)):
        ranked = agent.most_referenced_species(state.profiles.list(), k)
        return {"species": [{"species": n, "count": c} for n, c in ranked]}

    @app.get("/species")
    def list_species(filter: str | None = Query(default=None)):
        views = combine_mod.browse(state.db, state.schema, filter)
        return {"species": [wire.view_to_wire(v) for v in views]}

    @app.get("/species/{name}")
    def get_species(name: str):
        record = state.db.species.get(name)
        if record is None:
            raise NotFoundError(f"no species named {name!r}")
        return wire.species_to_wire(record, state.schema)

    @app.put("/species/{name}")
    def put_species(name: str, payload: dict = Body(...)):
        payload = dict(payload)
        payload.setdefault("name", name)
        if payload["name"] != name:
            raise ValidationError("body name does not match URL")
        record = wire.species_from_wire(payload, state.schema)
        with state.lock:
            state.db = upsert_species(state.db, record, state.schema, author=payload.get("author", "api"))
            state.persist_db()
        return wire.species_to_wire(record, state.schema)

    @app.post("/notes")
    def post_note(payload: dict = Body(...), request: Request = None, user: str | None = Query(default=None)):
        for key in ("author", "target", "body"):
            if not payload.get(key):
                raise ValidationError(f"note needs {key!r}")
        note = NoteEntry(payload["author"], payload["target"], payload["body"], datetime.now(timezone.utc))
        with state.lock:
            state.db = add_note(state.db, note, state.schema)
            state.persist_db()
        state.log_event(state.resolve_user(request, user), agent.NoteAdded(note.target))
        return wire.note_to_wire(note)

    @app.get("/references")
    def get_references(tag: str | None = Query(default=None)):
        refs = list_references(state.db, tag)
        return {"references": [wire.reference_to_wire(r) for r in refs]}

    @app.post("/references")
    def post_reference(payload: dict = Body(...)):
        if not payload.get("id"):
            raise ValidationError("reference needs an 'id'")
        ref = ReferenceEntry(payload["id"], payload.get("citation", ""), frozenset(payload.get("tags", ())))
        with state.lock:
            state.db = add_reference(state.db, ref, state.schema)
            state.persist_db()
        return wire.reference_to_wire(ref)

    @app.post("/select")
    def post_select(payload: dict = Body(default={}), request: Request = None, user: str | None = Query(default=None)):
        query = wire.query_from_wire(payload, state.schema)
        result = evaluate(query, state.db, state.schema, state.store)
        user_id = state.resolve_user(request, user)
        state.log_event(user_id, agent.QueryIssued(query))
        state.log_event(user_id, agent.SelectionSaved(result.id, result.matched))
        token = request.headers.get("X-Session-Token") if request else None
        if token and token in state.sessions:
            state.sessions[token].active_selection = result.id
        return wire.result_to_wire(result, state.schema)

    @app.get("/selections")
    def get_selections():
        return {"selections": [wire.selection_summary_to_wire(r) for r in state.store.list()]}

    @app.get("/selections/{selection_id}")
    def get_selection(selection_id: str):
        return wire.result_to_wire(state.store.load(selection_id), state.schema)

    @app.get("/selections/{selection_id}/why/{species}")
    def get_why(selection_id: str, species: str, request: Request = None,
                user: str | None = Query(default=None), suggest: int = Query(default=3)):
        selection = state.store.load(selection_id)
        explanation = explain.why(species, selection, state.db, state.schema)
        hints = []
        if explanation.failures and suggest > 0:
            hints = explain.why_suggestions(species, selection, state.db, state.schema, suggest)
        state.log_event(state.resolve_user(request, user), agent.WhyAsked(species))
        body = wire.explanation_to_wire(explanation)
        body["hints"] = wire.hints_to_wire(hints)
        return body

    @app.post("/combine")
    def post_combine(payload: dict = Body(...)):
        spec = combine_mod.CombineSpec(tuple(payload.get("operands", ())), payload.get("op", ""))
        result = combine_mod.combine(spec, state.store)
        return wire.result_to_wire(result, state.schema)

    @app.get("/suggest/criteria")
    def get_suggest_criteria(request: Request, user: str | None = Query(default=None), k: int = Query(default=5)):
        user_id = state.resolve_user(request, user)
        profile = state.profiles.load(user_id)
        suggestions = agent.suggest_criteria(profile, state.schema, k)
        return {"user": user_id, "criteria": [wire.criterion_to_wire(c, state.schema) for c in suggestions]}

    @app.get("/suggest/species")
    def get_suggest_species(request: Request, user: str | None = Query(default=None), k: int = Query(default=5)):
        user_id = state.resolve_user(request, user)
        profile = state.profiles.load(user_id)
        names = agent.suggest_species(profile, state.profiles.list(), state.db, state.schema, k)
        return {"user": user_id, "species": names}

    @app.post("/sync")
    def post_sync(payload: dict = Body(...), request: Request = None, user: str | None = Query(default=None)):
        user_id = state.resolve_user(request, user)
        direction = payload.get("direction", "")
        with state.lock:
            profile = state.profiles.load(user_id)
            if payload.get("subset") is not None:
                from dataclasses import replace

                profile = replace(profile, local_subset=frozenset(payload["subset"]))
            profile, db, report = agent.sync_local_subset(profile, state.db, direction, state.schema)
            state.db = db
            state.persist_db()
            state.profiles.save(profile)
        return wire.sync_report_to_wire(report)

    return app


def serve(config: ServiceConfig) -> None:
    """Run the service until interrupted."""
    import uvicorn

    host = os.environ.get("CROPSELECT_BIND", config.host)
    uvicorn.run(build_app(config), host=host, port=config.port, log_level="warning")
