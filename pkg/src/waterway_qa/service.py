"""HTTP service: sessions over clips, ask, trace inspection, kb maintenance.

Error envelope: 400 for validation problems, 404 for unknown sessions, 502
for backend failures (carrying which role/branch failed when known), 503 when
no knowledge base is available (e.g. mid-reload). Knowledge-base swaps are
atomic: requests see the old or the new base, never a partial one.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .backends import AgentBackends
from .config import SystemConfig
from .dataset import DatasetManifest
from .errors import (
    BackendFailure,
    CaptionUnavailable,
    DatasetValidationError,
    InvalidArgument,
    InvalidState,
    MetricUnavailable,
    ProtocolError,
    ReasoningFailed,
    TransportError,
    WaterwayQAError,
)
from .frames import FrameManifest
from .knowledge import KnowledgeBase, ingest, load_corpus_dir, retrieve
from .pipeline import PipelineConfig
from .routing import RoutePath
from .session import run_ask
from .trace import TraceWriter
from .verification import VerificationConfig

_BACKEND_ERRORS = (
    BackendFailure,
    TransportError,
    ProtocolError,
    ReasoningFailed,
    CaptionUnavailable,
    MetricUnavailable,
)


def _http_error(exc: WaterwayQAError) -> HTTPException:
    if isinstance(exc, _BACKEND_ERRORS):
        return HTTPException(
            status_code=502,
            detail={
                "error": str(exc),
                "role": getattr(exc, "role", None),
                "branch": getattr(exc, "branch", None),
            },
        )
    return HTTPException(status_code=400, detail={"error": str(exc)})


@dataclass
class SessionState:
    session_id: str
    manifest: FrameManifest
    records: list[dict] = field(default_factory=list)


class CreateSessionRequest(BaseModel):
    clip_id: str | None = None
    manifest: dict | None = None


class AskRequest(BaseModel):
    question: str
    overrides: dict | None = None


class DocumentIn(BaseModel):
    name: str
    text: str


class IngestRequest(BaseModel):
    corpus_dir: str | None = None
    documents: list[DocumentIn] | None = None


class Service:
    def __init__(
        self,
        config: SystemConfig,
        backends: AgentBackends,
        kb: KnowledgeBase | None = None,
        dataset: DatasetManifest | None = None,
        trace: TraceWriter | None = None,
        clock: Callable[[], float] = time.monotonic,
    ):
        self.config = config
        self.backends = backends
        self.dataset = dataset
        self.trace = trace
        self.clock = clock
        self._kb = kb
        self._kb_lock = threading.Lock()
        self._reloading = False
        self._sessions: dict[str, SessionState] = {}
        self._sessions_lock = threading.Lock()
        self._counter = 0

    # -- kb ------------------------------------------------------------------

    @property
    def kb(self) -> KnowledgeBase | None:
        with self._kb_lock:
            return self._kb

    def swap_kb(self, new_kb: KnowledgeBase) -> None:
        with self._kb_lock:
            self._kb = new_kb

    def require_kb(self) -> KnowledgeBase:
        with self._kb_lock:
            if self._kb is None:
                raise HTTPException(
                    status_code=503,
                    detail={"error": "knowledge base unavailable"
                            + (" (reload in progress)" if self._reloading else "")},
                )
            return self._kb

    # -- sessions ---------------------------------------------------------------

    def create_session(self, manifest: FrameManifest) -> SessionState:
        with self._sessions_lock:
            self._counter += 1
            state = SessionState(session_id=f"s-{self._counter:04d}", manifest=manifest)
            self._sessions[state.session_id] = state
            return state

    def get_session(self, session_id: str) -> SessionState:
        with self._sessions_lock:
            state = self._sessions.get(session_id)
        if state is None:
            raise HTTPException(status_code=404,
                                detail={"error": f"unknown session {session_id!r}"})
        return state

    def configs_with(self, overrides: dict | None):
        overrides = overrides or {}
        unknown = set(overrides) - {
            "target_k", "top_k", "delta_k", "threshold", "max_retries", "verified_paths",
        }
        if unknown:
            raise InvalidArgument(f"unknown override(s): {sorted(unknown)}")
        pipeline = PipelineConfig(
            target_k=overrides.get("target_k", self.config.ats_target_k),
            top_k=overrides.get("top_k", self.config.rag_top_k),
        )
        verification = VerificationConfig(
            threshold=overrides.get("threshold", self.config.verification_threshold),
            max_retries=overrides.get("max_retries", self.config.verification_max_retries),
            delta_k=overrides.get("delta_k", self.config.rag_delta_k),
        )
        if "verified_paths" in overrides:
            try:
                verified_paths = frozenset(RoutePath(p) for p in overrides["verified_paths"])
            except ValueError as exc:
                raise InvalidArgument(f"verified_paths: {exc}") from None
        else:
            verified_paths = self.config.verified_paths
        return pipeline, verification, verified_paths


def create_app(
    config: SystemConfig,
    backends: AgentBackends,
    kb: KnowledgeBase | None = None,
    dataset: DatasetManifest | None = None,
    trace: TraceWriter | None = None,
    clock: Callable[[], float] = time.monotonic,
) -> FastAPI:
    service = Service(config, backends, kb=kb, dataset=dataset, trace=trace, clock=clock)
    app = FastAPI(title="waterway-qa")
    app.state.service = service

    @app.get("/healthz")
    def healthz():
        base = service.kb
        return {"status": "ok", "kb_chunks": base.size if base else 0,
                "sessions": len(service._sessions)}

    @app.get("/clips")
    def clips():
        if service.dataset is None:
            return {"clips": []}
        return {
            "clips": [
                {
                    "clip_id": clip.clip_id,
                    "frame_count": clip.frame_count,
                    "duration_s": clip.duration_s,
                }
                for clip in service.dataset.clips.values()
            ]
        }

    @app.post("/sessions")
    def create_session(body: CreateSessionRequest):
        if (body.clip_id is None) == (body.manifest is None):
            raise HTTPException(
                status_code=400,
                detail={"error": "provide exactly one of clip_id or manifest"},
            )
        try:
            if body.manifest is not None:
                manifest = FrameManifest.from_dict(body.manifest)
            else:
                if service.dataset is None or body.clip_id not in service.dataset.clips:
                    raise InvalidArgument(f"unknown clip_id {body.clip_id!r}")
                manifest = service.dataset.clips[body.clip_id]
        except WaterwayQAError as exc:
            raise _http_error(exc)
        state = service.create_session(manifest)
        return {"session_id": state.session_id, "clip_id": manifest.clip_id,
                "frame_count": manifest.frame_count, "frames": list(manifest.frames)}

    @app.post("/sessions/{session_id}/ask")
    def ask(session_id: str, body: AskRequest):
        state = service.get_session(session_id)
        try:
            pipeline, verification, verified_paths = service.configs_with(body.overrides)
            result = run_ask(
                body.question,
                state.manifest,
                service.kb,
                service.backends,
                pipeline_config=pipeline,
                verification_config=verification,
                verified_paths=verified_paths,
                session_id=session_id,
                trace=service.trace,
                clock=service.clock,
            )
        except WaterwayQAError as exc:
            raise _http_error(exc)
        state.records.extend(result.stages)
        envelope = result.envelope()
        envelope["session_id"] = session_id
        if service.trace is not None and service.trace.degraded:
            envelope["trace_degraded"] = True
        return envelope

    @app.get("/sessions/{session_id}/trace")
    def trace_of(session_id: str):
        state = service.get_session(session_id)
        return {"session_id": session_id, "records": list(state.records)}

    @app.post("/kb/ingest")
    def kb_ingest(body: IngestRequest):
        if (body.corpus_dir is None) == (body.documents is None):
            raise HTTPException(
                status_code=400,
                detail={"error": "provide exactly one of corpus_dir or documents"},
            )
        service._reloading = True
        try:
            if body.corpus_dir is not None:
                docs = load_corpus_dir(body.corpus_dir)
            else:
                docs = [(d.name, d.text) for d in body.documents]
            new_kb = ingest(docs, service.backends.embedder)
            service.swap_kb(new_kb)
            if service.config.kb_path:
                Path(service.config.kb_path).parent.mkdir(parents=True, exist_ok=True)
                new_kb.save(service.config.kb_path)
        except WaterwayQAError as exc:
            raise _http_error(exc)
        finally:
            service._reloading = False
        return {"chunks": new_kb.size, "documents": len(docs)}

    @app.get("/kb/search")
    def kb_search(q: str, k: int = 4):
        base = service.require_kb()
        try:
            context = retrieve(base, q, k, service.backends.embedder)
        except WaterwayQAError as exc:
            raise _http_error(exc)
        return {
            "hits": [
                {
                    "chunk_id": chunk.chunk_id,
                    "source_doc": chunk.source_doc,
                    "section_label": chunk.section_label,
                    "text": chunk.text,
                    "score": score,
                }
                for chunk, score in context.hits
            ]
        }

    return app
