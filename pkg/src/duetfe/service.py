"""HTTP session service for interactive feature transformation.

One in-memory session per uploaded dataset; mutations are serialized per
session (a second conflicting call gets 409) and may carry an
``X-Request-Token`` header so retried requests replay the original
response instead of re-executing.
"""

from __future__ import annotations

import contextlib
import json
import secrets
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, File, Header, Request, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles

from . import agents, dataset, diagnosis, dsl, loop

SESSION_TTL = 3600.0
MAX_HISTORY = 50


class ApiError(Exception):
    STATUS = {
        "BAD_REQUEST": 400,
        "NOT_FOUND": 404,
        "CONFLICT": 409,
        "PARSE_FAILED": 422,
        "BACKEND_FAILED": 502,
    }

    def __init__(self, code: str, message: str):
        self.code = code
        self.message = message
        self.status = self.STATUS[code]
        super().__init__(message)


@dataclass
class SessionEntry:
    id: str
    state: loop.SessionState
    created_at: float = field(default_factory=time.time)
    last_access: float = field(default_factory=time.time)
    lock: threading.Lock = field(default_factory=threading.Lock)
    token_cache: dict = field(default_factory=dict)  # request token -> response
    chat_log: list = field(default_factory=list)
    raw_csv: str = ""
    raw_meta: str = ""


class SessionStore:
    def __init__(self, ttl: float = SESSION_TTL):
        self.ttl = ttl
        self.sessions = {}
        self.lock = threading.Lock()

    def add(self, entry: SessionEntry):
        with self.lock:
            self.sessions[entry.id] = entry

    def get(self, session_id: str) -> SessionEntry:
        self.purge()
        with self.lock:
            entry = self.sessions.get(session_id)
        if entry is None:
            raise ApiError("NOT_FOUND", f"unknown session {session_id}")
        entry.last_access = time.time()
        return entry

    def remove(self, session_id: str):
        with self.lock:
            if session_id not in self.sessions:
                raise ApiError("NOT_FOUND", f"unknown session {session_id}")
            del self.sessions[session_id]

    def purge(self):
        now = time.time()
        with self.lock:
            stale = [k for k, e in self.sessions.items() if now - e.last_access > self.ttl]
            for k in stale:
                del self.sessions[k]

    def snapshot(self, path):
        """Persist dataset payloads so an operator can rebuild sessions."""
        payload = {
            sid: {"csv": e.raw_csv, "meta": e.raw_meta, "created_at": e.created_at}
            for sid, e in self.sessions.items()
        }
        Path(path).write_text(json.dumps(payload), encoding="utf-8")


def make_backend(name: str, config: agents.AgentConfig = None,
                 transcript_path=None):
    config = config or agents.AgentConfig()
    if name == "heuristic":
        return agents.HeuristicBackend()
    if name == "remote":
        return agents.RemoteHttpBackend(config)
    if name == "replay":
        if transcript_path is None:
            raise ValueError("replay backend requires a transcript path")
        return agents.ReplayBackend(agents.Transcript.load(transcript_path))
    raise ValueError(f"unknown backend {name!r}")


def _stats_payload(table):
    per_column, space = diagnosis.summarize(table)
    return json.loads(diagnosis.stats_to_json(per_column, space))


def _columns_payload(table):
    return [
        {
            "name": name,
            "origin": "original" if prov is dataset.ORIGINAL else "generated",
            "expression": None if prov is dataset.ORIGINAL else dsl.render_expr(prov),
        }
        for name, prov in zip(table.column_names, table.provenance)
    ]


def _proposal_payload(pending):
    if pending is None:
        return None
    return {
        "expressions": [dsl.render_expr(e) for e in pending.sequence],
        "preview": [vars(fs) for fs in pending.preview],
    }


def create_app(backend_name: str = "heuristic", config: agents.AgentConfig = None,
               transcript_path=None, static_dir=None,
               snapshot_path=None) -> FastAPI:
    config = config or agents.AgentConfig()
    store = SessionStore()

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        if snapshot_path:
            store.snapshot(snapshot_path)

    app = FastAPI(title="duetfe session service", lifespan=lifespan)
    app.state.store = store

    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(ApiError)
    async def api_error_handler(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status,
                            content={"code": exc.code, "message": exc.message})

    def guarded(entry: SessionEntry):
        if not entry.lock.acquire(blocking=False):
            raise ApiError("CONFLICT", "another operation is in progress on this session")
        return entry.lock

    def with_token(entry: SessionEntry, token, fn):
        """Idempotent-retry support: a repeated token replays the response."""
        if token and token in entry.token_cache:
            return entry.token_cache[token]
        result = fn()
        if token:
            entry.token_cache[token] = result
        return result

    @app.post("/sessions", status_code=201)
    async def create_session(csv: UploadFile = File(...), meta: UploadFile = File(...)):
        csv_text = (await csv.read()).decode("utf-8")
        meta_text = (await meta.read()).decode("utf-8")
        with tempfile.TemporaryDirectory() as tmp:
            data_path = Path(tmp) / "data.csv"
            meta_path = Path(tmp) / "meta.json"
            data_path.write_text(csv_text, encoding="utf-8")
            meta_path.write_text(meta_text, encoding="utf-8")
            try:
                table, labels, ds_meta = dataset.load_csv(data_path, meta_path)
            except (dataset.SchemaError, json.JSONDecodeError, ValueError) as exc:
                raise ApiError("BAD_REQUEST", str(exc))
        state = loop.SessionState(
            table=table,
            meta=ds_meta,
            ops=dsl.DEFAULT_OPERATORS,
            cfg=loop.LoopConfig(backend_name=backend_name, agent=config),
            backend=make_backend(backend_name, config, transcript_path),
            max_history=MAX_HISTORY,
        )
        entry = SessionEntry(id=secrets.token_hex(16), state=state,
                             raw_csv=csv_text, raw_meta=meta_text)
        store.add(entry)
        return {
            "session_id": entry.id,
            "columns": _columns_payload(table),
            "stats": _stats_payload(table),
        }

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        entry = store.get(session_id)
        state = entry.state
        return {
            "session_id": entry.id,
            "columns": _columns_payload(state.table),
            "stats": _stats_payload(state.table),
            "pending_proposal": _proposal_payload(state.pending),
            "history_depth": len(state.history),
            "chat_log": entry.chat_log,
            "created_at": entry.created_at,
        }

    @app.post("/sessions/{session_id}/diagnose")
    def diagnose(session_id: str,
                 x_request_token: str = Header(default=None)):
        entry = store.get(session_id)
        lock = guarded(entry)
        try:
            def step():
                state = entry.state
                stats = diagnosis.summarize(state.table)
                features = loop._current_features(state.table)
                prompt = agents.build_critic_prompt(state.meta, stats, features)
                try:
                    advice = agents.run_critic(state.backend, prompt,
                                               state.cfg.agent, state.transcript)
                except (agents.BackendError, agents.ReplayExhausted) as exc:
                    raise ApiError("BACKEND_FAILED", str(exc))
                payload = {
                    "semantic": list(advice.semantic_advice),
                    "distribution": list(advice.distributional_advice),
                }
                entry.chat_log.append({"role": "critic", "advice": payload})
                return payload
            return with_token(entry, x_request_token, step)
        finally:
            lock.release()

    @app.post("/sessions/{session_id}/instruct")
    async def instruct(session_id: str, request: Request,
                       x_request_token: str = Header(default=None)):
        entry = store.get(session_id)
        body = await request.json()
        text = (body or {}).get("text", "")
        lock = guarded(entry)
        try:
            def step():
                state = entry.state
                if state.pending is not None:
                    raise ApiError("CONFLICT", "a proposal is already pending")
                if not text.strip():
                    raise ApiError("BAD_REQUEST", "instruction text must be non-empty")
                try:
                    proposal = loop.run_conversational_step(state, text)
                except agents.GenerationError as exc:
                    raise ApiError("PARSE_FAILED", str(exc))
                except (agents.BackendError, agents.ReplayExhausted) as exc:
                    raise ApiError("BACKEND_FAILED", str(exc))
                payload = _proposal_payload(proposal)
                entry.chat_log.append({"role": "human", "text": text})
                entry.chat_log.append({"role": "generator", "proposal": payload})
                return payload
            return with_token(entry, x_request_token, step)
        finally:
            lock.release()

    @app.post("/sessions/{session_id}/accept")
    async def accept(session_id: str, request: Request,
                     x_request_token: str = Header(default=None)):
        entry = store.get(session_id)
        body = await request.json()
        indices = (body or {}).get("indices", [])
        lock = guarded(entry)
        try:
            def step():
                state = entry.state
                if state.pending is None:
                    raise ApiError("CONFLICT", "no pending proposal to accept")
                try:
                    report = loop.accept(state, indices)
                except (IndexError, TypeError) as exc:
                    raise ApiError("BAD_REQUEST", str(exc))
                payload = {
                    "accepted": [dsl.render_expr(e) for e in report.accepted],
                    "rejections": [r.to_dict() for r in report.rejections],
                    "columns": _columns_payload(state.table),
                }
                entry.chat_log.append({"role": "system", "accepted": payload["accepted"]})
                return payload
            return with_token(entry, x_request_token, step)
        finally:
            lock.release()

    @app.post("/sessions/{session_id}/undo")
    def undo(session_id: str, x_request_token: str = Header(default=None)):
        entry = store.get(session_id)
        lock = guarded(entry)
        try:
            def step():
                undone = loop.undo(entry.state)
                entry.state.pending = None
                return {"undone": undone,
                        "columns": _columns_payload(entry.state.table)}
            return with_token(entry, x_request_token, step)
        finally:
            lock.release()

    @app.post("/sessions/{session_id}/auto")
    async def auto(session_id: str, request: Request,
                   x_request_token: str = Header(default=None)):
        entry = store.get(session_id)
        body = await request.json()
        iterations = (body or {}).get("iterations", 1)
        lock = guarded(entry)
        try:
            def step():
                if not isinstance(iterations, int) or iterations < 1:
                    raise ApiError("BAD_REQUEST", "iterations must be a positive integer")
                state = entry.state
                if state.pending is not None:
                    raise ApiError("CONFLICT", "resolve the pending proposal first")
                cfg = loop.LoopConfig(
                    iterations=iterations,
                    k_max=state.cfg.k_max,
                    budget_multiplier=state.cfg.budget_multiplier,
                    seed=state.cfg.seed,
                    backend_name=state.cfg.backend_name,
                    agent=state.cfg.agent,
                )
                try:
                    result = loop.run(state.table, state.meta, state.ops, cfg,
                                      state.backend)
                except loop.LoopAborted as exc:
                    raise ApiError("BACKEND_FAILED", str(exc))
                state.history.append(state.table)
                state.table = result.final_table
                state.transcript.records.extend(result.transcript.records)
                rounds = [rec.to_dict() for rec in result.iterations]
                entry.chat_log.append({"role": "system", "auto_rounds": rounds})
                return {"iterations": rounds,
                        "columns": _columns_payload(state.table)}
            return with_token(entry, x_request_token, step)
        finally:
            lock.release()

    @app.get("/sessions/{session_id}/export")
    def export(session_id: str):
        entry = store.get(session_id)
        return PlainTextResponse(entry.state.table.to_csv(), media_type="text/csv")

    @app.delete("/sessions/{session_id}", status_code=204)
    def delete(session_id: str):
        store.remove(session_id)

    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
