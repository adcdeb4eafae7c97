"""Scripted backends for offline runs and deterministic tests.

A :class:`MockScript` is an ordered rule list; the first rule whose role,
call index, and text pattern all match wins. Vectors are supplied explicitly
per text so retrieval tests can construct exact geometry. Lookups are
deterministic: the same script and call sequence always produce the same
transcript. Mock exchanges report zero latency, which keeps scripted runs
byte-reproducible.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import BackendFailure, InvalidArgument
from .base import Backend, BackendProfile, ChatExchange, ChatMessage, EmbeddingVector, Role


@dataclass(frozen=True)
class MockRule:
    """One scripted behavior. ``contains`` may be a single pattern or a list
    that must all appear; chat rules match against the last user message text
    plus any attached frame refs, embed rules against the single text."""

    role: str | None = None
    contains: str | tuple[str, ...] | None = None
    equals: str | None = None
    index: int | None = None
    response: str | None = None
    vector: tuple[float, ...] | None = None

    def __post_init__(self):
        if (self.response is None) == (self.vector is None):
            raise InvalidArgument("a mock rule needs exactly one of response/vector")
        if self.vector is not None:
            object.__setattr__(self, "vector", tuple(float(v) for v in self.vector))
        if isinstance(self.contains, (list, tuple)):
            object.__setattr__(self, "contains", tuple(self.contains))

    def matches(self, role: str, text: str, call_index: int) -> bool:
        if self.role is not None and self.role != role:
            return False
        if self.index is not None and self.index != call_index:
            return False
        if self.equals is not None and self.equals != text:
            return False
        if self.contains is not None:
            patterns = self.contains if isinstance(self.contains, tuple) else (self.contains,)
            if any(p not in text for p in patterns):
                return False
        return True


@dataclass
class MockScript:
    rules: list[MockRule] = field(default_factory=list)
    default_response: str | None = None
    default_vector: tuple[float, ...] | None = None

    def chat_response(self, role: str, text: str, call_index: int) -> str:
        for rule in self.rules:
            if rule.response is not None and rule.matches(role, text, call_index):
                return rule.response
        if self.default_response is not None:
            return self.default_response
        raise BackendFailure(
            f"mock script has no chat rule for role={role!r} call={call_index}", role=role
        )

    def embed_vector(self, role: str, text: str, call_index: int) -> tuple[float, ...]:
        for rule in self.rules:
            if rule.vector is not None and rule.matches(role, text, call_index):
                return rule.vector
        if self.default_vector is not None:
            return self.default_vector
        raise BackendFailure(
            f"mock script has no vector rule for text {text[:60]!r}", role=role
        )

    @classmethod
    def from_dict(cls, raw: dict) -> "MockScript":
        rules = [
            MockRule(
                role=r.get("role"),
                contains=r.get("contains"),
                equals=r.get("equals"),
                index=r.get("index"),
                response=r.get("response"),
                vector=tuple(r["vector"]) if r.get("vector") is not None else None,
            )
            for r in raw.get("rules", [])
        ]
        dv = raw.get("default_vector")
        return cls(
            rules=rules,
            default_response=raw.get("default_response"),
            default_vector=tuple(dv) if dv is not None else None,
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "MockScript":
        p = Path(path)
        if not p.is_file():
            raise InvalidArgument(f"mock script not found: {p}")
        try:
            return cls.from_dict(json.loads(p.read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise InvalidArgument(f"mock script {p} is not valid JSON: {exc}") from exc


def sequential_rules(role: str, responses: list[str]) -> list[MockRule]:
    """One rule per call index, for grader-style scripted sequences."""
    return [MockRule(role=role, index=i, response=text) for i, text in enumerate(responses)]


class MockBackend(Backend):
    """Backend driven entirely by a :class:`MockScript`.

    Records every exchange for capture-style assertions; ``delay_s`` lets
    concurrency tests hold calls in flight.
    """

    def __init__(
        self,
        profile: BackendProfile,
        script: MockScript,
        delay_s: float = 0.0,
        script_role: str | None = None,
    ):
        super().__init__(profile)
        self.script = script
        self.delay_s = delay_s
        # rules match this name; lets two backends share a profile role but
        # answer to different script rules (e.g. grader vs judge)
        self.script_role = script_role or profile.role.value
        self.exchanges: list[ChatExchange] = []
        self.embedded_texts: list[str] = []
        self._chat_calls = 0
        self._embed_calls = 0

    @property
    def chat_call_count(self) -> int:
        return self._chat_calls

    @property
    def embed_call_count(self) -> int:
        return self._embed_calls

    def _do_chat(self, messages: tuple[ChatMessage, ...]) -> ChatExchange:
        if self.delay_s:
            time.sleep(self.delay_s)
        with self._state_lock:
            call_index = self._chat_calls
            self._chat_calls += 1
        # match on the last user message plus attached frame refs: system
        # prompts are fixed boilerplate and would swallow every pattern
        last_user = next(m for m in reversed(messages) if m.role == "user")
        frame_refs = [ref for m in messages for ref in m.frames]
        text = "\n".join([last_user.text] + frame_refs)
        response = self.script.chat_response(self.script_role, text, call_index)
        exchange = ChatExchange(messages=messages, response_text=response, latency_ms=0.0)
        with self._state_lock:
            self.exchanges.append(exchange)
        return exchange

    def _do_embed(self, texts: list[str]) -> list[EmbeddingVector]:
        if self.delay_s:
            time.sleep(self.delay_s)
        out = []
        for text in texts:
            with self._state_lock:
                call_index = self._embed_calls
                self._embed_calls += 1
                self.embedded_texts.append(text)
            raw = self.script.embed_vector(self.script_role, text, call_index)
            out.append(EmbeddingVector.normalized(raw))
        return out


def mock_profile(role: Role, max_parallel: int = 8) -> BackendProfile:
    return BackendProfile(
        role=role,
        endpoint="mock://local",
        model_id="scripted",
        timeout_s=5.0,
        max_retries=0,
        max_parallel=max_parallel,
    )
