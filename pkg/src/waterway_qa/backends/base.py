"""Model-backend abstraction shared by every agent role.

A backend is addressed through a :class:`BackendProfile` (which role it
plays, where it lives, how patient to be) and exposes exactly two verbs:
``chat`` for text/vision completions and ``embed`` for text vectors.
Implementations must be safely shareable across concurrent sessions;
per-profile parallelism is capped by ``max_parallel`` via an internal gate.
"""

from __future__ import annotations

import math
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from ..errors import InvalidArgument, ProtocolError


class Role(str, Enum):
    ROUTER = "router"
    CAPTIONER = "captioner"
    REASONER = "reasoner"
    GRADER = "grader"
    SUMMARIZER = "summarizer"
    EMBEDDER = "embedder"


@dataclass(frozen=True)
class BackendProfile:
    role: Role
    endpoint: str
    model_id: str
    timeout_s: float = 30.0
    max_retries: int = 2
    max_parallel: int = 4

    def __post_init__(self):
        if self.timeout_s <= 0:
            raise InvalidArgument("timeout_s must be positive")
        if self.max_retries < 0:
            raise InvalidArgument("max_retries must be non-negative")
        if self.max_parallel < 1:
            raise InvalidArgument("max_parallel must be >= 1")


@dataclass(frozen=True)
class ChatMessage:
    role: str  # "system" | "user" | "assistant"
    text: str
    frames: tuple[str, ...] = ()

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant"):
            raise InvalidArgument(f"unknown message role {self.role!r}")
        object.__setattr__(self, "frames", tuple(self.frames))


@dataclass(frozen=True)
class ChatExchange:
    messages: tuple[ChatMessage, ...]
    response_text: str
    latency_ms: float
    token_usage: dict | None = None


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]

    @classmethod
    def normalized(cls, raw: Sequence[float]) -> "EmbeddingVector":
        values = [float(v) for v in raw]
        norm = math.sqrt(sum(v * v for v in values))
        if norm == 0.0 or not math.isfinite(norm):
            raise ProtocolError("embedding vector has zero or non-finite norm")
        return cls(values=tuple(v / norm for v in values))

    @property
    def dim(self) -> int:
        return len(self.values)


class Backend(ABC):
    """Template enforcing shared validation and the max_parallel gate.

    Subclasses implement the transport in ``_do_chat`` / ``_do_embed``; the
    public verbs stay uniform so orchestration code never cares whether it
    is talking to a live server or a scripted mock.
    """

    def __init__(self, profile: BackendProfile):
        self.profile = profile
        self._gate = threading.Semaphore(profile.max_parallel)
        self._state_lock = threading.Lock()
        self._in_flight = 0
        self.peak_in_flight = 0
        self._embed_dim: int | None = None

    def chat(self, messages: Sequence[ChatMessage]) -> ChatExchange:
        messages = tuple(messages)
        if not any(m.role == "user" for m in messages):
            raise InvalidArgument("chat requires at least one user message")
        with self._gate:
            self._enter()
            try:
                return self._do_chat(messages)
            finally:
                self._leave()

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        texts = list(texts)
        if not texts:
            raise InvalidArgument("embed requires at least one text")
        if any(not t.strip() for t in texts):
            raise InvalidArgument("embed texts must be non-empty after trimming")
        with self._gate:
            self._enter()
            try:
                vectors = self._do_embed(texts)
            finally:
                self._leave()
        if len(vectors) != len(texts):
            raise ProtocolError(
                f"backend returned {len(vectors)} vectors for {len(texts)} texts"
            )
        dims = {v.dim for v in vectors}
        if len(dims) > 1:
            raise ProtocolError(f"embedding dimensions differ within batch: {sorted(dims)}")
        dim = dims.pop()
        with self._state_lock:
            if self._embed_dim is None:
                self._embed_dim = dim
            elif self._embed_dim != dim:
                raise ProtocolError(
                    f"embedding dimension changed from {self._embed_dim} to {dim}"
                )
        return vectors

    def _enter(self):
        with self._state_lock:
            self._in_flight += 1
            self.peak_in_flight = max(self.peak_in_flight, self._in_flight)

    def _leave(self):
        with self._state_lock:
            self._in_flight -= 1

    @abstractmethod
    def _do_chat(self, messages: tuple[ChatMessage, ...]) -> ChatExchange:
        ...

    @abstractmethod
    def _do_embed(self, texts: list[str]) -> list[EmbeddingVector]:
        ...


@dataclass
class AgentBackends:
    """The six agent roles wired to concrete backends, plus an optional judge
    used only by the evaluation harness."""

    router: Backend
    captioner: Backend
    reasoner: Backend
    grader: Backend
    summarizer: Backend
    embedder: Backend
    judge: Backend | None = None

    def for_role(self, role: Role) -> Backend:
        return getattr(self, role.value)
