"""Self-reflective answer verification: grade, expand retrieval, regenerate.

A grader backend scores each draft answer against the retrieved regulations.
Below the confidence threshold, the retrieval scope widens, the contexts
union, and the reasoner regenerates with the enlarged context — up to the
retry budget. The loop follows the pseudocode literally:

    context <- retrieve(query)
    answer  <- reason(conditioning, context)
    n = 0
    while n < max_retries and not verified:
        score <- grade(question, answer, context)
        if score >= threshold: verified = true
        else: context <- expand(context); answer <- reason(...); n += 1
    return answer            # returned whether or not it verified

Consequences of the literal reading: with max_retries = 0 no grading happens
at all, and when retries exhaust, the last regenerated answer comes back
ungraded (score_history holds max_retries entries). Grading failures count
as score 0 — a broken grader must not block answers; the unverified flag
surfaces the condition.

Verification wraps the full-pipeline path by default; a fast path can opt in,
in which case answer (re)generation keeps that path's conditioning while
grading and expansion work exactly as above.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .backends import AgentBackends, Backend, ChatMessage
from .errors import CaptionUnavailable, InvalidArgument, WaterwayQAError
from .frames import FrameIndexSet, FrameManifest, sample, standardize
from .knowledge import (
    DEFAULT_DELTA_K,
    KnowledgeBase,
    RetrievedContext,
    build_query,
    expand,
    retrieve,
)
from .metrics import extract_score
from .pipeline import (
    AnswerDraft,
    PipelineConfig,
    SceneCaption,
    assemble_context,
    caption,
    reason,
)
from .routing import RoutePath

GRADER_SYSTEM_PROMPT = """\
You audit answers produced by a waterway navigation assistant. Check the
answer for factual consistency with the retrieved regulations and for logical
consistency with the question. Reply with a confidence score between 0 and 1
(e.g. "Score: 0.85") followed by a short rationale.
"""

StageCallback = Callable[[str, dict], None]


@dataclass(frozen=True)
class GradeResult:
    score: float
    rationale: str
    parse_ok: bool

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise InvalidArgument(f"score out of [0, 1]: {self.score}")
        if not self.parse_ok and self.score != 0.0:
            raise InvalidArgument("failed parses must carry score 0")


@dataclass(frozen=True)
class VerificationConfig:
    threshold: float = 0.7
    max_retries: int = 2
    delta_k: int = DEFAULT_DELTA_K

    def __post_init__(self):
        if not 0.0 < self.threshold <= 1.0:
            raise InvalidArgument("threshold must be in (0, 1]")
        if self.max_retries < 0:
            raise InvalidArgument("max_retries must be non-negative")
        if self.delta_k < 1:
            raise InvalidArgument("delta_k must be >= 1")


@dataclass(frozen=True)
class VerifiedAnswer:
    answer: AnswerDraft
    verified: bool
    retries_used: int
    score_history: tuple[GradeResult, ...]
    final_context: RetrievedContext

    def __post_init__(self):
        if self.retries_used < 0:
            raise InvalidArgument("retries_used must be non-negative")
        if self.verified and not self.score_history:
            raise InvalidArgument("a verified answer must have been graded")


def grade(
    question: str,
    answer_text: str,
    context: RetrievedContext,
    grader: Backend,
) -> GradeResult:
    """One grader call; conservative on failure (score 0 triggers a retry)."""
    if not answer_text or not answer_text.strip():
        raise InvalidArgument("answer_text must be non-empty")
    rules = "\n".join(
        f"- ({chunk.section_label or chunk.source_doc}) {chunk.text}"
        for chunk, _ in context.hits
    )
    prompt = (
        f"QUESTION:\n{question}\n\n"
        f"RETRIEVED REGULATIONS:\n{rules or '(none)'}\n\n"
        f"ANSWER UNDER REVIEW:\n{answer_text}\n\n"
        "Give your confidence score."
    )
    try:
        exchange = grader.chat(
            [
                ChatMessage(role="system", text=GRADER_SYSTEM_PROMPT),
                ChatMessage(role="user", text=prompt),
            ]
        )
        raw = exchange.response_text
    except WaterwayQAError as exc:
        return GradeResult(score=0.0, rationale=f"<grader-error: {exc}>", parse_ok=False)
    score = extract_score(raw)
    if score is None:
        return GradeResult(score=0.0, rationale=raw, parse_ok=False)
    return GradeResult(score=score, rationale=raw, parse_ok=True)


def _emit(on_stage: StageCallback | None, stage: str, payload: dict) -> None:
    if on_stage is not None:
        on_stage(stage, payload)


def verify(
    question: str,
    manifest: FrameManifest | None,
    kb: KnowledgeBase,
    config: VerificationConfig,
    backends: AgentBackends,
    path: RoutePath = RoutePath.COMPLEX_REASONING,
    pipeline_config: PipelineConfig = PipelineConfig(),
    on_stage: StageCallback | None = None,
) -> VerifiedAnswer:
    """Run the reflective loop around one routing path's generation."""
    frames: list[str] = []
    indices: FrameIndexSet | None = None
    scene: SceneCaption | None = None

    if path is not RoutePath.FAST_RAG:
        if manifest is None:
            raise InvalidArgument(f"{path.value} verification needs a frame manifest")
        indices = standardize(manifest.frame_count, pipeline_config.target_k)
        frames = sample(manifest, pipeline_config.target_k)
        _emit(on_stage, "sample", {"indices": list(indices.indices),
                                   "requested_k": indices.requested_k})
    if path is RoutePath.COMPLEX_REASONING:
        try:
            scene = caption(frames, backends.captioner, indices)
            _emit(on_stage, "caption", {"text": scene.text, "degraded": False})
        except CaptionUnavailable as exc:
            _emit(on_stage, "caption", {"text": None, "degraded": True, "error": str(exc)})

    query = build_query(question, scene.text if scene else None)
    context = retrieve(kb, query, pipeline_config.top_k, backends.embedder)
    _emit(on_stage, "retrieve", {
        "query_is_caption_conditioned": scene is not None,
        "top_k": context.requested_k,
        "hits": [{"chunk_id": c.chunk_id, "score": s} for c, s in context.hits],
    })

    def regenerate(ctx: RetrievedContext) -> AnswerDraft:
        # the retrieval context always conditions regeneration: expansion is
        # pointless unless the reasoner sees the enlarged rule set
        fused = assemble_context(frames, question, caption=scene, rules=ctx)
        draft = reason(fused, backends.reasoner, path)
        _emit(on_stage, "reason", {"prompt": fused.render(),
                                   "final_text": draft.final_text,
                                   "path": path.value})
        return draft

    answer = regenerate(context)
    retries = 0
    verified = False
    history: list[GradeResult] = []
    while retries < config.max_retries and not verified:
        result = grade(question, answer.final_text, context, backends.grader)
        history.append(result)
        _emit(on_stage, "grade", {"score": result.score, "parse_ok": result.parse_ok,
                                  "attempt": len(history), "rationale": result.rationale})
        if result.score >= config.threshold:
            verified = True
        else:
            context = expand(kb, query, context, config.delta_k, backends.embedder)
            _emit(on_stage, "retrieve", {
                "expanded": True,
                "top_k": context.requested_k,
                "hits": [{"chunk_id": c.chunk_id, "score": s} for c, s in context.hits],
            })
            answer = regenerate(context)
            retries += 1
    return VerifiedAnswer(
        answer=answer,
        verified=verified,
        retries_used=retries,
        score_history=tuple(history),
        final_context=context,
    )
