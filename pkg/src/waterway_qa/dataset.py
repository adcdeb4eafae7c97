"""Dataset manifest loading, validation, and descriptive statistics.

A dataset is a single JSON manifest: a list of clips (frame manifests) and a
list of QA samples referencing them by clip_id. Validation collects every
violation before raising, with messages naming the offending sample or clip.

Answer-type classification for the stats summary is a documented lexical
heuristic: leading yes/no makes a yes-no answer, a numeral or small number
word makes a counting answer, anything else is descriptive.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import DatasetValidationError, InvalidArgument
from .frames import FrameManifest
from .metrics import tokenize


class QACategory(str, Enum):
    PERCEPTION = "Perception"
    SCENE_UNDERSTANDING = "SceneUnderstanding"
    CAUSAL_PREDICTIVE = "CausalPredictive"
    ACTION_INTERACTION = "ActionInteraction"
    KNOWLEDGE_DRIVEN = "KnowledgeDriven"


class Waterway(str, Enum):
    RIVER = "River"
    LAKE = "Lake"
    CANAL = "Canal"
    MOAT = "Moat"
    HARBOR = "Harbor"
    SEA = "Sea"


class Split(str, Enum):
    TRAIN = "train"
    TEST = "test"


@dataclass(frozen=True)
class QASample:
    sample_id: str
    clip_id: str
    question: str
    reference_answer: str
    category: QACategory
    waterway: Waterway
    split: Split

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "clip_id": self.clip_id,
            "question": self.question,
            "reference_answer": self.reference_answer,
            "category": self.category.value,
            "waterway": self.waterway.value,
            "split": self.split.value,
        }


@dataclass
class DatasetManifest:
    samples: list[QASample]
    clips: dict[str, FrameManifest]

    def split_samples(self, split: Split) -> list[QASample]:
        return [s for s in self.samples if s.split is split]


_SAMPLE_FIELDS = (
    "sample_id", "clip_id", "question", "reference_answer", "category", "waterway", "split",
)


def _parse_enum(enum_cls, raw, where: str, errors: list[str]):
    try:
        return enum_cls(raw)
    except ValueError:
        allowed = ", ".join(e.value for e in enum_cls)
        errors.append(f"{where}: unknown value {raw!r}; allowed: {allowed}")
        return None


def load_dataset(path: str | Path) -> DatasetManifest:
    p = Path(path)
    if not p.is_file():
        raise InvalidArgument(f"dataset manifest not found: {p}")
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidArgument(f"dataset manifest {p} is not valid JSON: {exc}") from exc
    return parse_dataset(raw)


def parse_dataset(raw: dict) -> DatasetManifest:
    errors: list[str] = []
    if not isinstance(raw, dict):
        raise DatasetValidationError(["manifest root must be a JSON object"])

    clips: dict[str, FrameManifest] = {}
    for i, clip_raw in enumerate(raw.get("clips", [])):
        where = f"clips[{i}]"
        if not isinstance(clip_raw, dict):
            errors.append(f"{where}: must be an object")
            continue
        clip_id = clip_raw.get("clip_id", "<missing>")
        try:
            manifest = FrameManifest.from_dict(clip_raw)
        except InvalidArgument as exc:
            errors.append(f"{where} (clip_id={clip_id!r}): {exc}")
            continue
        if manifest.clip_id in clips:
            errors.append(f"{where}: duplicate clip_id {manifest.clip_id!r}")
            continue
        clips[manifest.clip_id] = manifest

    samples: list[QASample] = []
    seen_ids: set[str] = set()
    for i, sample_raw in enumerate(raw.get("samples", [])):
        where = f"samples[{i}]"
        if not isinstance(sample_raw, dict):
            errors.append(f"{where}: must be an object")
            continue
        sample_id = sample_raw.get("sample_id")
        if sample_id:
            where = f"{where} (sample_id={sample_id!r})"
        missing = [f for f in _SAMPLE_FIELDS if not sample_raw.get(f)]
        if missing:
            errors.append(f"{where}: missing or empty field(s): {', '.join(missing)}")
            continue
        if sample_id in seen_ids:
            errors.append(f"{where}: duplicate sample_id")
            continue
        seen_ids.add(sample_id)
        category = _parse_enum(QACategory, sample_raw["category"], f"{where}.category", errors)
        waterway = _parse_enum(Waterway, sample_raw["waterway"], f"{where}.waterway", errors)
        split = _parse_enum(Split, sample_raw["split"], f"{where}.split", errors)
        clip_id = sample_raw["clip_id"]
        if clip_id not in clips:
            errors.append(f"{where}: references unknown clip_id {clip_id!r}")
            continue
        if None in (category, waterway, split):
            continue
        samples.append(
            QASample(
                sample_id=sample_id,
                clip_id=clip_id,
                question=sample_raw["question"],
                reference_answer=sample_raw["reference_answer"],
                category=category,
                waterway=waterway,
                split=split,
            )
        )

    if errors:
        raise DatasetValidationError(errors)
    if not samples:
        raise DatasetValidationError(["manifest contains no samples"])
    return DatasetManifest(samples=samples, clips=clips)


def save_dataset(manifest: DatasetManifest, path: str | Path) -> None:
    payload = {
        "clips": [clip.to_dict() for clip in manifest.clips.values()],
        "samples": [s.to_dict() for s in manifest.samples],
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


_NUMBER_WORDS = {
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve",
}


def classify_answer_type(answer: str) -> str:
    tokens = tokenize(answer)
    if tokens and tokens[0] in ("yes", "no"):
        return "yes_no"
    if any(t.isdigit() for t in tokens) or any(t in _NUMBER_WORDS for t in tokens[:3]):
        return "count"
    return "descriptive"


@dataclass(frozen=True)
class StatsSummary:
    sample_count: int
    clip_count: int
    per_category: dict[str, int]
    per_waterway: dict[str, int]
    per_split: dict[str, int]
    answer_types: dict[str, int]
    mean_question_words: float
    mean_answer_words: float
    duration_min_s: float | None
    duration_mean_s: float | None
    duration_max_s: float | None

    def to_dict(self) -> dict:
        return {
            "sample_count": self.sample_count,
            "clip_count": self.clip_count,
            "per_category": dict(sorted(self.per_category.items())),
            "per_waterway": dict(sorted(self.per_waterway.items())),
            "per_split": dict(sorted(self.per_split.items())),
            "answer_types": dict(sorted(self.answer_types.items())),
            "mean_question_words": self.mean_question_words,
            "mean_answer_words": self.mean_answer_words,
            "duration_min_s": self.duration_min_s,
            "duration_mean_s": self.duration_mean_s,
            "duration_max_s": self.duration_max_s,
        }

    def render_text(self) -> str:
        lines = [
            f"samples: {self.sample_count}   clips: {self.clip_count}",
            f"mean question length: {self.mean_question_words:.2f} words",
            f"mean answer length:   {self.mean_answer_words:.2f} words",
            "per category: " + ", ".join(f"{k}={v}" for k, v in sorted(self.per_category.items())),
            "per waterway: " + ", ".join(f"{k}={v}" for k, v in sorted(self.per_waterway.items())),
            "per split:    " + ", ".join(f"{k}={v}" for k, v in sorted(self.per_split.items())),
            "answer types: " + ", ".join(f"{k}={v}" for k, v in sorted(self.answer_types.items())),
        ]
        if self.duration_mean_s is not None:
            lines.append(
                f"clip duration (s): min {self.duration_min_s:.2f}"
                f" / mean {self.duration_mean_s:.2f} / max {self.duration_max_s:.2f}"
            )
        return "\n".join(lines)


def compute_stats(manifest: DatasetManifest) -> StatsSummary:
    q_lengths = [len(tokenize(s.question)) for s in manifest.samples]
    a_lengths = [len(tokenize(s.reference_answer)) for s in manifest.samples]
    durations = [c.duration_s for c in manifest.clips.values() if c.duration_s is not None]
    return StatsSummary(
        sample_count=len(manifest.samples),
        clip_count=len(manifest.clips),
        per_category=dict(Counter(s.category.value for s in manifest.samples)),
        per_waterway=dict(Counter(s.waterway.value for s in manifest.samples)),
        per_split=dict(Counter(s.split.value for s in manifest.samples)),
        answer_types=dict(Counter(classify_answer_type(s.reference_answer) for s in manifest.samples)),
        mean_question_words=sum(q_lengths) / len(q_lengths),
        mean_answer_words=sum(a_lengths) / len(a_lengths),
        duration_min_s=min(durations) if durations else None,
        duration_mean_s=sum(durations) / len(durations) if durations else None,
        duration_max_s=max(durations) if durations else None,
    )
