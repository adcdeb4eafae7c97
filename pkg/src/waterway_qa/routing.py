"""Query dispatch: classify each question into one of three inference paths.

The router backend is asked for exactly one canonical label. Anything it
returns that cannot be parsed — or any backend failure — falls back to the
deepest path: in a safety-critical domain over-reasoning is cheaper than
under-reasoning. No exception ever escapes ``route``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .backends import Backend, ChatMessage
from .errors import InvalidArgument, WaterwayQAError


class RoutePath(str, Enum):
    FAST_VISION = "FastVision"
    FAST_RAG = "FastRag"
    COMPLEX_REASONING = "ComplexReasoning"


@dataclass(frozen=True)
class RouteDecision:
    path: RoutePath
    raw_label: str
    used_fallback: bool = False

    def __post_init__(self):
        if self.used_fallback and self.path is not RoutePath.COMPLEX_REASONING:
            raise InvalidArgument("fallback decisions must land on ComplexReasoning")


ROUTER_SYSTEM_PROMPT = """\
You classify one question about a waterway video clip into exactly one inference path.
Answer with a single label and nothing else.

Labels:
- FastVision: instant perceptual checks answerable by looking at the clip.
  Example: "Is there a boat ahead?" -> FastVision
- FastRag: explicit regulation or definition lookups needing no visual input.
  Example: "What does a green buoy signify?" -> FastRag
- ComplexReasoning: causal, predictive, or multi-step navigational reasoning.
  Example: "Predict the collision risk based on current trajectories" -> ComplexReasoning
"""

_CANONICAL = {
    "fastvision": RoutePath.FAST_VISION,
    "fastrag": RoutePath.FAST_RAG,
    "complexreasoning": RoutePath.COMPLEX_REASONING,
}


def parse_route_label(raw: str) -> RoutePath | None:
    """Case-insensitive, whitespace/punctuation tolerant label match."""
    collapsed = re.sub(r"[^a-z]", "", raw.lower())
    return _CANONICAL.get(collapsed)


def route(question: str, router_backend: Backend) -> RouteDecision:
    if not question or not question.strip():
        raise InvalidArgument("question must be non-empty")
    try:
        exchange = router_backend.chat(
            [
                ChatMessage(role="system", text=ROUTER_SYSTEM_PROMPT),
                ChatMessage(role="user", text=question),
            ]
        )
        raw = exchange.response_text
    except WaterwayQAError as exc:
        return RouteDecision(
            path=RoutePath.COMPLEX_REASONING,
            raw_label=f"<backend-error: {exc}>",
            used_fallback=True,
        )
    path = parse_route_label(raw)
    if path is None:
        return RouteDecision(path=RoutePath.COMPLEX_REASONING, raw_label=raw, used_fallback=True)
    return RouteDecision(path=path, raw_label=raw, used_fallback=False)
