"""HTTP backend speaking the OpenAI-compatible chat/embeddings JSON shape.

Locally hosted multimodal servers commonly expose this wire format, and it is
isolated behind this module so alternates can be added without touching
orchestration code. Frames are attached as base64 data-URL image parts, which
keeps the server stateless and clips portable.

Retry policy: timeouts, connection errors, HTTP 429 and 5xx are treated as
transient and retried up to ``max_retries`` with exponential backoff. A
transport failure that survives every retry raises ``TransportError``; a
non-2xx status raises ``BackendFailure`` carrying the status; a 2xx body that
does not match the wire shape raises ``ProtocolError`` without retrying.

Credentials: when ``WATERWAY_QA_API_KEY`` (or the per-role
``WATERWAY_QA_<ROLE>_API_KEY``) is set, it is sent as a bearer token.
"""

from __future__ import annotations

import base64
import os
import time
from pathlib import Path

import httpx

from ..errors import BackendFailure, ProtocolError, TransportError
from .base import Backend, BackendProfile, ChatExchange, ChatMessage, EmbeddingVector

_IMAGE_MIME = {
    ".png": "image/png",
    ".gif": "image/gif",
    ".webp": "image/webp",
    ".bmp": "image/bmp",
}
_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


def _frame_to_image_part(ref: str) -> dict:
    path = Path(ref)
    try:
        payload = base64.b64encode(path.read_bytes()).decode("ascii")
    except OSError as exc:
        raise BackendFailure(f"cannot read frame {ref!r}: {exc}") from exc
    mime = _IMAGE_MIME.get(path.suffix.lower(), "image/jpeg")
    return {"type": "image_url", "image_url": {"url": f"data:{mime};base64,{payload}"}}


def _message_to_wire(message: ChatMessage) -> dict:
    if not message.frames:
        return {"role": message.role, "content": message.text}
    parts: list[dict] = [{"type": "text", "text": message.text}]
    parts.extend(_frame_to_image_part(ref) for ref in message.frames)
    return {"role": message.role, "content": parts}


class HttpBackend(Backend):
    def __init__(self, profile: BackendProfile, backoff_s: float = 0.25):
        super().__init__(profile)
        self.backoff_s = backoff_s
        self._client = httpx.Client(timeout=profile.timeout_s)

    def close(self):
        self._client.close()

    def _headers(self) -> dict:
        key = os.environ.get(
            f"WATERWAY_QA_{self.profile.role.value.upper()}_API_KEY"
        ) or os.environ.get("WATERWAY_QA_API_KEY")
        headers = {"Content-Type": "application/json"}
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post(self, path: str, body: dict) -> dict:
        url = self.profile.endpoint.rstrip("/") + path
        last_transport: Exception | None = None
        last_status: httpx.Response | None = None
        for attempt in range(self.profile.max_retries + 1):
            if attempt:
                time.sleep(self.backoff_s * 2 ** (attempt - 1))
            try:
                response = self._client.post(url, json=body, headers=self._headers())
            except (httpx.TimeoutException, httpx.TransportError) as exc:
                last_transport = exc
                continue
            if response.status_code in _RETRYABLE_STATUS:
                last_status = response
                last_transport = None
                continue
            if response.status_code < 200 or response.status_code >= 300:
                raise BackendFailure(
                    f"{self.profile.role.value} backend answered {response.status_code}",
                    role=self.profile.role.value,
                    status=response.status_code,
                )
            try:
                return response.json()
            except ValueError as exc:
                raise ProtocolError(
                    f"{self.profile.role.value} backend returned non-JSON body"
                ) from exc
        if last_transport is not None:
            raise TransportError(
                f"{self.profile.role.value} backend unreachable after "
                f"{self.profile.max_retries + 1} attempts: {last_transport}"
            )
        assert last_status is not None
        raise BackendFailure(
            f"{self.profile.role.value} backend answered {last_status.status_code} "
            f"after {self.profile.max_retries + 1} attempts",
            role=self.profile.role.value,
            status=last_status.status_code,
        )

    def _do_chat(self, messages: tuple[ChatMessage, ...]) -> ChatExchange:
        body = {
            "model": self.profile.model_id,
            "messages": [_message_to_wire(m) for m in messages],
        }
        started = time.perf_counter()
        raw = self._post("/chat/completions", body)
        latency_ms = (time.perf_counter() - started) * 1000.0
        try:
            text = raw["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"malformed chat completion body: {raw!r:.200}") from exc
        if not isinstance(text, str):
            raise ProtocolError("chat completion content is not a string")
        usage = raw.get("usage") if isinstance(raw.get("usage"), dict) else None
        return ChatExchange(
            messages=messages, response_text=text, latency_ms=latency_ms, token_usage=usage
        )

    def _do_embed(self, texts: list[str]) -> list[EmbeddingVector]:
        raw = self._post("/embeddings", {"model": self.profile.model_id, "input": texts})
        try:
            items = raw["data"]
            ordered = sorted(items, key=lambda item: item.get("index", 0))
            return [EmbeddingVector.normalized(item["embedding"]) for item in ordered]
        except (KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed embeddings body: {raw!r:.200}") from exc
