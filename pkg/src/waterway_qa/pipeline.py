"""Hierarchical reasoning pipeline: caption, fuse, reason, dispatch, summarize.

The reasoner is conditioned on a fused context assembled in a fixed order —
video frames, question, scene description, applicable rules — rendered with
fixed English section headers so prompts are byte-deterministic for golden
traces. Each routing path invokes exactly its own backend set:

    FastVision        frames + question           (no retrieval, no caption)
    FastRag           question + rules            (no frames, no caption)
    ComplexReasoning  frames + caption + rules    (the full pipeline)

Caption failure on the full path degrades to caption-less retrieval instead
of aborting: availability beats completeness for a live assistant, and the
degradation is trace-visible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .backends import AgentBackends, Backend, ChatMessage
from .errors import CaptionUnavailable, InvalidArgument, ReasoningFailed, WaterwayQAError
from .frames import DEFAULT_TARGET_K, FrameIndexSet, FrameManifest, sample, standardize
from .knowledge import (
    DEFAULT_TOP_K,
    KnowledgeBase,
    RetrievedContext,
    build_query,
    retrieve,
)
from .routing import RouteDecision, RoutePath, route

ANSWER_DELIMITER = "===ANSWER==="

CAPTION_SYSTEM_PROMPT = """\
You describe waterway scenes for a navigation assistant. Given key frames from
one clip, write a single concise paragraph covering: vessels and their motion,
navigation marks and signals, the waterway type, and weather or visibility.
Mention only what is visible.
"""

REASONER_SYSTEM_PROMPT = f"""\
You are the reasoning agent of a waterway navigation assistant. Answer the
question about the clip using only the provided context. Work in two labeled
stages:

LEVEL 1 - PERCEPTUAL GROUNDING: align the visible observations with the
applicable rules (identify what things are, in rule terms).

LEVEL 2 - CAUSAL AND PREDICTIVE DEDUCTION: reason step by step about causes,
risks, and predicted developments, staying consistent with the cited rules.

After both stages, write a line containing exactly {ANSWER_DELIMITER} and then
the final answer on the lines after it.
"""

SUMMARY_SYSTEM_PROMPT = """\
You distill a navigation assistant's reasoning into concise, actionable
guidance for a vessel operator. Keep every safety-relevant instruction, drop
the chain of reasoning, and answer in at most two sentences.
"""


@dataclass(frozen=True)
class SceneCaption:
    text: str
    frame_indices_used: FrameIndexSet

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise InvalidArgument("caption text must be non-empty")


@dataclass(frozen=True)
class FusedContext:
    """Ordered conditioning segments; the question is always present."""

    question: str
    frames: tuple[str, ...] = ()
    caption: SceneCaption | None = None
    rules: RetrievedContext | None = None

    def __post_init__(self):
        if not self.question or not self.question.strip():
            raise InvalidArgument("question must be non-empty")
        object.__setattr__(self, "frames", tuple(self.frames))

    def render(self) -> str:
        """Deterministic prompt body; omitted segments render as absent."""
        sections: list[str] = []
        if self.frames:
            listing = "\n".join(f"- {ref}" for ref in self.frames)
            sections.append(f"VIDEO FRAMES:\n{listing}")
        sections.append(f"QUESTION:\n{self.question}")
        if self.caption is not None:
            sections.append(f"SCENE DESCRIPTION:\n{self.caption.text}")
        if self.rules is not None:
            lines = []
            for i, (chunk, _score) in enumerate(self.rules.hits, start=1):
                label = chunk.section_label or chunk.source_doc
                lines.append(f"{i}. ({label}) {chunk.text}")
            sections.append("APPLICABLE RULES:\n" + "\n".join(lines))
        return "\n\n".join(sections)


@dataclass(frozen=True)
class AnswerDraft:
    reasoning_text: str
    final_text: str
    path_taken: RoutePath

    def __post_init__(self):
        if not self.final_text or not self.final_text.strip():
            raise InvalidArgument("final_text must be non-empty")


def caption(
    frames: list[str],
    captioner: Backend,
    indices: FrameIndexSet | None = None,
) -> SceneCaption:
    """One captioner call with every frame attached. Raises CaptionUnavailable
    on backend failure so callers can degrade to caption-less operation."""
    if not frames:
        raise InvalidArgument("caption requires at least one frame")
    if indices is None:
        indices = FrameIndexSet(indices=tuple(range(1, len(frames) + 1)), requested_k=len(frames))
    try:
        exchange = captioner.chat(
            [
                ChatMessage(role="system", text=CAPTION_SYSTEM_PROMPT),
                ChatMessage(role="user", text="Describe the scene in these frames.",
                            frames=tuple(frames)),
            ]
        )
    except WaterwayQAError as exc:
        failure = CaptionUnavailable(f"captioner failed: {exc}")
        failure.role = "captioner"
        raise failure from exc
    text = exchange.response_text.strip()
    if not text:
        failure = CaptionUnavailable("captioner returned an empty description")
        failure.role = "captioner"
        raise failure
    return SceneCaption(text=text, frame_indices_used=indices)


def assemble_context(
    frames: list[str] | tuple[str, ...],
    question: str,
    caption: SceneCaption | None = None,
    rules: RetrievedContext | None = None,
) -> FusedContext:
    return FusedContext(question=question, frames=tuple(frames), caption=caption, rules=rules)


def reason(
    context: FusedContext,
    reasoner: Backend,
    path: RoutePath = RoutePath.COMPLEX_REASONING,
) -> AnswerDraft:
    """Single reasoner call; the response splits on the answer delimiter into
    (reasoning chain, final answer). A missing delimiter means the whole
    response is the final answer."""
    try:
        exchange = reasoner.chat(
            [
                ChatMessage(role="system", text=REASONER_SYSTEM_PROMPT),
                ChatMessage(role="user", text=context.render(), frames=context.frames),
            ]
        )
    except WaterwayQAError as exc:
        failure = ReasoningFailed(f"reasoner failed: {exc}")
        failure.role = "reasoner"
        raise failure from exc
    response = exchange.response_text
    reasoning_text, final_text = "", response.strip()
    if ANSWER_DELIMITER in response:
        before, after = response.split(ANSWER_DELIMITER, 1)
        if after.strip():
            reasoning_text, final_text = before.strip(), after.strip()
    if not final_text:
        failure = ReasoningFailed("reasoner returned an empty response")
        failure.role = "reasoner"
        raise failure
    return AnswerDraft(reasoning_text=reasoning_text, final_text=final_text, path_taken=path)


@dataclass(frozen=True)
class PipelineConfig:
    target_k: int = DEFAULT_TARGET_K
    top_k: int = DEFAULT_TOP_K

    def __post_init__(self):
        if self.target_k < 1 or self.top_k < 1:
            raise InvalidArgument("target_k and top_k must be >= 1")


@dataclass
class BranchOutcome:
    """Everything one branch run produced, for verification and tracing."""

    draft: AnswerDraft
    context: FusedContext
    decision: RouteDecision
    frame_indices: FrameIndexSet | None = None
    scene_caption: SceneCaption | None = None
    rules: RetrievedContext | None = None
    caption_degraded: bool = False


def run_branch(
    decision: RouteDecision,
    question: str,
    manifest: FrameManifest | None,
    kb: KnowledgeBase | None,
    config: PipelineConfig,
    backends: AgentBackends,
) -> BranchOutcome:
    """Execute one routing branch exactly as its path defines it."""
    path = decision.path
    if path is RoutePath.FAST_VISION:
        if manifest is None:
            raise InvalidArgument("FastVision needs a frame manifest")
        indices = standardize(manifest.frame_count, config.target_k)
        frames = sample(manifest, config.target_k)
        context = assemble_context(frames, question)
        draft = reason(context, backends.reasoner, path)
        return BranchOutcome(draft=draft, context=context, decision=decision,
                             frame_indices=indices)

    if path is RoutePath.FAST_RAG:
        if kb is None:
            raise InvalidArgument("FastRag needs a knowledge base")
        rules = retrieve(kb, question, config.top_k, backends.embedder)
        context = assemble_context((), question, rules=rules)
        draft = reason(context, backends.reasoner, path)
        return BranchOutcome(draft=draft, context=context, decision=decision, rules=rules)

    if manifest is None or kb is None:
        raise InvalidArgument("ComplexReasoning needs both a frame manifest and a knowledge base")
    indices = standardize(manifest.frame_count, config.target_k)
    frames = sample(manifest, config.target_k)
    scene: SceneCaption | None = None
    degraded = False
    try:
        scene = caption(frames, backends.captioner, indices)
    except CaptionUnavailable:
        degraded = True
    query = build_query(question, scene.text if scene else None)
    rules = retrieve(kb, query, config.top_k, backends.embedder)
    context = assemble_context(frames, question, caption=scene, rules=rules)
    draft = reason(context, backends.reasoner, path)
    return BranchOutcome(draft=draft, context=context, decision=decision,
                         frame_indices=indices, scene_caption=scene, rules=rules,
                         caption_degraded=degraded)


def dispatch(
    question: str,
    manifest: FrameManifest | None,
    kb: KnowledgeBase | None,
    config: PipelineConfig,
    backends: AgentBackends,
) -> AnswerDraft:
    """Route the question and run the selected branch once (pre-verification)."""
    decision = route(question, backends.router)
    try:
        return run_branch(decision, question, manifest, kb, config, backends).draft
    except WaterwayQAError as exc:
        exc.branch = decision.path.value  # branch identity travels with the error
        exc.args = (f"[{decision.path.value}] {exc}",) + exc.args[1:]
        raise


def summarize(
    draft: AnswerDraft,
    question: str,
    summarizer: Backend,
    on_skip: Callable[[str], None] | None = None,
) -> str:
    """Condense reasoning chain + answer into concise guidance.

    With an empty reasoning chain there is nothing to distill, so the final
    text passes through without a backend call. A summarizer failure also
    passes the final text through (reported via ``on_skip``) — summaries are
    never worth blocking an answer for.
    """
    if not draft.reasoning_text.strip():
        return draft.final_text
    prompt = (
        f"QUESTION:\n{question}\n\n"
        f"REASONING CHAIN:\n{draft.reasoning_text}\n\n"
        f"ANSWER:\n{draft.final_text}\n\n"
        "Distill this into final guidance."
    )
    try:
        exchange = summarizer.chat(
            [
                ChatMessage(role="system", text=SUMMARY_SYSTEM_PROMPT),
                ChatMessage(role="user", text=prompt),
            ]
        )
    except WaterwayQAError as exc:
        if on_skip is not None:
            on_skip(str(exc))
        return draft.final_text
    text = exchange.response_text.strip()
    if not text:
        if on_skip is not None:
            on_skip("summarizer returned empty text")
        return draft.final_text
    return text
