"""One question, end to end: route, run the branch (verified or not),
summarize, and record every stage in execution order.

This is the single orchestration path shared by the HTTP service, the CLI
``ask`` command, and the evaluation harness, so their envelopes and traces
can never drift apart. The clock is injectable: scripted mock runs use a
frozen clock, making latencies (and therefore whole run files) reproducible.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

from .backends import AgentBackends
from .errors import WaterwayQAError
from .frames import FrameManifest
from .knowledge import KnowledgeBase, RetrievedContext
from .pipeline import AnswerDraft, PipelineConfig, run_branch, summarize
from .routing import RouteDecision, RoutePath, route
from .trace import TraceWriter
from .verification import VerificationConfig, verify

Clock = Callable[[], float]

DEFAULT_VERIFIED_PATHS = frozenset({RoutePath.COMPLEX_REASONING})


def frozen_clock() -> float:
    """Clock for reproducible mock runs: time stands still."""
    return 0.0


@dataclass
class AskResult:
    question: str
    answer: str
    decision: RouteDecision
    verified: bool | None
    retries: int
    score_history: list[dict]
    latency_ms: float
    draft: AnswerDraft
    rules: RetrievedContext | None
    threshold: float | None = None
    stages: list[dict] = field(default_factory=list)

    def envelope(self) -> dict:
        """The response shape served over HTTP; consoles render from this
        alone, so retrieved rules carry their labels and text and the
        verification threshold rides along when the loop ran."""
        return {
            "answer": self.answer,
            "route": self.decision.path.value,
            "used_fallback": self.decision.used_fallback,
            "verified": self.verified,
            "retries": self.retries,
            "score_history": self.score_history,
            "threshold": self.threshold,
            "latency_ms": self.latency_ms,
            "retrieved": [
                {
                    "chunk_id": chunk.chunk_id,
                    "section_label": chunk.section_label,
                    "source_doc": chunk.source_doc,
                    "text": chunk.text,
                    "score": score,
                }
                for chunk, score in (self.rules.hits if self.rules else ())
            ],
        }


def run_ask(
    question: str,
    manifest: FrameManifest | None,
    kb: KnowledgeBase | None,
    backends: AgentBackends,
    pipeline_config: PipelineConfig = PipelineConfig(),
    verification_config: VerificationConfig = VerificationConfig(),
    verified_paths: frozenset[RoutePath] = DEFAULT_VERIFIED_PATHS,
    session_id: str = "cli",
    trace: TraceWriter | None = None,
    clock: Clock = time.monotonic,
) -> AskResult:
    stages: list[dict] = []

    def emit(stage: str, payload: dict) -> None:
        record = {"session_id": session_id, "stage": stage, "ts": clock(), **payload}
        if trace is not None:
            trace.write(record)
            record = trace.redact(record)
        stages.append(record)

    started = clock()
    decision = route(question, backends.router)
    emit("route", {
        "question": question,
        "path": decision.path.value,
        "raw_label": decision.raw_label,
        "used_fallback": decision.used_fallback,
    })

    try:
        if decision.path in verified_paths and kb is not None:
            outcome = verify(
                question,
                manifest,
                kb,
                verification_config,
                backends,
                path=decision.path,
                pipeline_config=pipeline_config,
                on_stage=emit,
            )
            draft = outcome.answer
            verified: bool | None = outcome.verified
            retries = outcome.retries_used
            history = [
                {"score": g.score, "parse_ok": g.parse_ok} for g in outcome.score_history
            ]
            rules = outcome.final_context
        else:
            branch = run_branch(decision, question, manifest, kb, pipeline_config, backends)
            if branch.frame_indices is not None:
                emit("sample", {
                    "indices": list(branch.frame_indices.indices),
                    "requested_k": branch.frame_indices.requested_k,
                })
            if decision.path is RoutePath.COMPLEX_REASONING:
                emit("caption", {
                    "text": branch.scene_caption.text if branch.scene_caption else None,
                    "degraded": branch.caption_degraded,
                })
            if branch.rules is not None:
                emit("retrieve", {
                    "top_k": branch.rules.requested_k,
                    "hits": [
                        {"chunk_id": c.chunk_id, "score": s} for c, s in branch.rules.hits
                    ],
                })
            emit("reason", {
                "prompt": branch.context.render(),
                "final_text": branch.draft.final_text,
                "path": decision.path.value,
            })
            draft = branch.draft
            verified = None
            retries = 0
            history = []
            rules = branch.rules
    except WaterwayQAError as exc:
        exc.branch = getattr(exc, "branch", decision.path.value)
        emit("error", {"error": str(exc), "type": type(exc).__name__,
                       "path": decision.path.value})
        raise

    summary_skips: list[str] = []
    answer = summarize(draft, question, backends.summarizer, on_skip=summary_skips.append)
    emit("summary", {
        "text": answer,
        "skipped": bool(summary_skips),
        **({"skip_reason": summary_skips[0]} if summary_skips else {}),
    })

    return AskResult(
        question=question,
        answer=answer,
        decision=decision,
        verified=verified,
        retries=retries,
        score_history=history,
        latency_ms=(clock() - started) * 1000.0,
        draft=draft,
        rules=rules,
        threshold=verification_config.threshold if verified is not None else None,
        stages=stages,
    )
