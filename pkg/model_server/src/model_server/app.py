"""HTTP surface: health, vocab, sessions, per-step queries, reference decoding.

Wire protocol (JSON over HTTP, UTF-8), protocol version 1:

    GET    /v1/health                 {"status","model_id","protocol"}
    GET    /v1/vocab                  {"size","bos_id","eos_id"}
    POST   /v1/session   {"text"}     {"session_id","truncated","source_len"}
    POST   /v1/step      {"session_id","prefix"}  {"log_probs","representation"}
    POST   /v1/summarize {"text","method","params","n"}  {"summaries"}
    POST   /v1/detokenize {"tokens"}  {"text"}
    DELETE /v1/session/{id}           {}

/v1/detokenize extends the base protocol so that clients driving /v1/step
can render their token ids as text with the server's tokenizer.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from . import decoding

PROTOCOL_VERSION = 1
DEFAULT_SESSION_TTL = 600.0


class SessionRequest(BaseModel):
    text: str


class StepRequest(BaseModel):
    session_id: str
    prefix: list[int]


class SummarizeRequest(BaseModel):
    text: str
    method: str
    params: dict = {}
    n: int = 1


class DetokenizeRequest(BaseModel):
    tokens: list[int]


@dataclass
class Session:
    state: object
    truncated: bool
    source_len: int
    last_used: float = field(default_factory=time.monotonic)


class SessionStore:
    """Sessions keyed by id, evicted after an idle TTL."""

    def __init__(self, ttl: float = DEFAULT_SESSION_TTL):
        self.ttl = ttl
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def _evict(self) -> None:
        cutoff = time.monotonic() - self.ttl
        stale = [sid for sid, s in self._sessions.items() if s.last_used < cutoff]
        for sid in stale:
            del self._sessions[sid]

    def create(self, session: Session) -> str:
        with self._lock:
            self._evict()
            sid = uuid.uuid4().hex
            self._sessions[sid] = session
            return sid

    def get(self, sid: str) -> Session:
        with self._lock:
            self._evict()
            session = self._sessions.get(sid)
            if session is None:
                raise KeyError(sid)
            session.last_used = time.monotonic()
            return session

    def delete(self, sid: str) -> None:
        with self._lock:
            self._sessions.pop(sid, None)

    def __len__(self) -> int:
        with self._lock:
            self._evict()
            return len(self._sessions)


def create_app(backend, session_ttl: float = DEFAULT_SESSION_TTL) -> FastAPI:
    app = FastAPI(title="summarizer model server")
    store = SessionStore(ttl=session_ttl)
    app.state.backend = backend
    app.state.sessions = store

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "model_id": backend.model_id, "protocol": PROTOCOL_VERSION}

    @app.get("/v1/vocab")
    def vocab():
        return {
            "size": backend.vocab_size,
            "bos_id": backend.bos_id,
            "eos_id": backend.eos_id,
        }

    @app.post("/v1/session")
    def open_session(req: SessionRequest):
        encoded = backend.encode(req.text)
        sid = store.create(
            Session(state=encoded.state, truncated=encoded.truncated, source_len=encoded.source_len)
        )
        return {
            "session_id": sid,
            "truncated": encoded.truncated,
            "source_len": encoded.source_len,
        }

    @app.post("/v1/step")
    def step(req: StepRequest):
        try:
            session = store.get(req.session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session {req.session_id!r}")
        for tok in req.prefix:
            if not 0 <= tok < backend.vocab_size:
                raise HTTPException(status_code=400, detail=f"token id {tok} out of range")
        log_probs, representation = backend.step(session.state, req.prefix)
        return {
            "log_probs": [float(v) for v in log_probs],
            "representation": [float(v) for v in representation],
        }

    @app.post("/v1/summarize")
    def summarize(req: SummarizeRequest):
        try:
            summaries = decoding.summarize(backend, req.text, req.method, req.params, req.n)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"summaries": summaries}

    @app.post("/v1/detokenize")
    def detokenize(req: DetokenizeRequest):
        for tok in req.tokens:
            if not 0 <= tok < backend.vocab_size:
                raise HTTPException(status_code=400, detail=f"token id {tok} out of range")
        return {"text": backend.detokenize(req.tokens)}

    @app.delete("/v1/session/{session_id}")
    def close_session(session_id: str):
        store.delete(session_id)
        return {}

    return app
