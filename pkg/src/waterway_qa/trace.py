"""Append-only JSONL trace of pipeline stages.

One JSON object per line, flushed per stage so a crash loses at most the
final partial line — which readers tolerate. Writes are serialized per sink;
concurrent sessions interleave lines but each record carries its session_id
and per-session order is preserved by the callers' sequential stage flow.

Prompt bodies and rationales are stored as short digests by default; a sink
opened with full_payloads=True keeps them verbatim.
"""

from __future__ import annotations

import hashlib
import json
import threading
from pathlib import Path

from .errors import InvalidArgument

# payload keys holding bulky text, redacted to digests unless full_payloads
_BULKY_KEYS = ("prompt", "rationale")


def short_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


class TraceWriter:
    def __init__(self, path: str | Path, full_payloads: bool = False):
        self.path = Path(path)
        self.full_payloads = full_payloads
        self._lock = threading.Lock()
        self.degraded = False
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def write(self, record: dict) -> None:
        """Append one stage record; IO failures degrade tracing instead of
        failing the request (callers can surface ``degraded``)."""
        record = self.redact(record)
        line = json.dumps(record, sort_keys=True, ensure_ascii=False)
        try:
            with self._lock:
                with self.path.open("a", encoding="utf-8") as sink:
                    sink.write(line + "\n")
                    sink.flush()
        except OSError:
            self.degraded = True

    def redact(self, record: dict) -> dict:
        if self.full_payloads:
            return record
        out = dict(record)
        for key in _BULKY_KEYS:
            if isinstance(out.get(key), str):
                out[key + "_sha"] = short_digest(out.pop(key))
        return out


def read_trace(path: str | Path) -> list[dict]:
    """Parse a JSONL trace; a truncated final line is dropped, garbage
    earlier in the file is an error."""
    p = Path(path)
    if not p.exists():
        return []
    raw_lines = p.read_text(encoding="utf-8").splitlines()
    records: list[dict] = []
    for i, line in enumerate(raw_lines):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError:
            if i == len(raw_lines) - 1:
                break
            raise InvalidArgument(f"trace {p} corrupt at line {i + 1}")
    return records
