"""Key-frame selection over pre-extracted clip frames.

A clip arrives as an ordered manifest of frame image files. Variable-length
clips are normalized to a fixed budget of K key frames by projecting K evenly
spaced positions onto [1, N]:

    index_k = floor((k - 1) / (K - 1) * (N - 1)) + 1,  k = 1..K

so the first and last frames are always kept when K >= 2. Duplicate raw
indices (K > N) are dropped rather than repeated: a repeated frame adds no
information and inflates downstream cost. K = 1 selects the first frame.

Frames are never decoded here; manifests point at image files extracted
upstream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import InvalidArgument

DEFAULT_TARGET_K = 8


@dataclass(frozen=True)
class FrameManifest:
    """An ordered sequence of frame references for one clip (1-based positions)."""

    clip_id: str
    frames: tuple[str, ...]
    duration_s: float | None = None
    fps: float | None = None

    def __post_init__(self):
        if not self.frames:
            raise InvalidArgument(f"clip {self.clip_id!r}: manifest must list at least one frame")
        if len(set(self.frames)) != len(self.frames):
            raise InvalidArgument(f"clip {self.clip_id!r}: frame references must be unique")
        if self.duration_s is not None and self.duration_s < 0:
            raise InvalidArgument(f"clip {self.clip_id!r}: duration_s must be non-negative")
        if self.fps is not None and self.fps <= 0:
            raise InvalidArgument(f"clip {self.clip_id!r}: fps must be positive")
        object.__setattr__(self, "frames", tuple(self.frames))

    @property
    def frame_count(self) -> int:
        return len(self.frames)

    def to_dict(self) -> dict:
        out: dict = {"clip_id": self.clip_id, "frames": list(self.frames)}
        if self.duration_s is not None:
            out["duration_s"] = self.duration_s
        if self.fps is not None:
            out["fps"] = self.fps
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "FrameManifest":
        try:
            return cls(
                clip_id=str(raw["clip_id"]),
                frames=tuple(str(f) for f in raw["frames"]),
                duration_s=raw.get("duration_s"),
                fps=raw.get("fps"),
            )
        except KeyError as exc:
            raise InvalidArgument(f"frame manifest missing field {exc.args[0]!r}") from exc


@dataclass(frozen=True)
class FrameIndexSet:
    """Strictly increasing 1-based key-frame indices chosen for a clip."""

    indices: tuple[int, ...]
    requested_k: int

    def __post_init__(self):
        if self.requested_k < 1:
            raise InvalidArgument("requested_k must be positive")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise InvalidArgument("indices must be strictly increasing")
        if len(self.indices) > self.requested_k:
            raise InvalidArgument("more indices than requested_k")
        object.__setattr__(self, "indices", tuple(self.indices))

    def __len__(self) -> int:
        return len(self.indices)


def standardize(frame_count: int, target_k: int) -> FrameIndexSet:
    """Select up to ``target_k`` evenly spaced 1-based indices in [1, frame_count].

    Raw positions are floor((k-1)/(K-1)*(N-1)) + 1; duplicates collapse, so
    fewer than K indices come back when K > N. K = 1 picks the first frame.
    """
    n, k = frame_count, target_k
    if n < 1:
        raise InvalidArgument(f"frame_count must be >= 1, got {n}")
    if k < 1:
        raise InvalidArgument(f"target_k must be >= 1, got {k}")
    if k == 1:
        return FrameIndexSet(indices=(1,), requested_k=1)
    seen: set[int] = set()
    picked: list[int] = []
    for step in range(k):
        idx = step * (n - 1) // (k - 1) + 1
        if idx not in seen:
            seen.add(idx)
            picked.append(idx)
    return FrameIndexSet(indices=tuple(picked), requested_k=k)


def sample(manifest: FrameManifest, target_k: int = DEFAULT_TARGET_K) -> list[str]:
    """Return the manifest's frames at the standardized key positions, in order."""
    chosen = standardize(manifest.frame_count, target_k)
    return [manifest.frames[i - 1] for i in chosen.indices]


def load_manifest(path: str | Path) -> FrameManifest:
    """Read a frame manifest JSON file (clip_id, ordered frame paths, optional fps/duration)."""
    p = Path(path)
    if not p.is_file():
        raise InvalidArgument(f"frame manifest not found: {p}")
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidArgument(f"frame manifest {p} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise InvalidArgument(f"frame manifest {p} must be a JSON object")
    return FrameManifest.from_dict(raw)


def save_manifest(manifest: FrameManifest, path: str | Path) -> None:
    Path(path).write_text(json.dumps(manifest.to_dict(), indent=2) + "\n", encoding="utf-8")
