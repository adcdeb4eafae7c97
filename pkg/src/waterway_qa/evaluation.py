"""Batch evaluation harness: run the pipeline over a dataset split, score
predictions against references, and render the report tables.

Per-sample failures are recorded, not fatal; aggregates are macro-averages of
per-sample scores except CIDEr, which is corpus-level by definition (each
partition — overall, one category, one waterway — is treated as its own
corpus). Every aggregate is recomputable from the per-sample records, and
record order is canonical (by sample_id) regardless of evaluation
concurrency, so scripted-mock runs serialize byte-for-byte.

The judge column is optional: with no judge backend (or an unusable judge
reply) it reports as unavailable, never as zero.
"""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .backends import AgentBackends
from .dataset import DatasetManifest, QACategory, QASample, Split, Waterway
from .errors import InvalidArgument, InvalidState, MetricUnavailable, WaterwayQAError
from .knowledge import KnowledgeBase
from .metrics import MetricReport, cider, judge_score, pair_scores, tokenize
from .pipeline import PipelineConfig
from .routing import RoutePath
from .session import DEFAULT_VERIFIED_PATHS, Clock, run_ask
from .trace import TraceWriter
from .verification import VerificationConfig

PAIR_METRICS = ("rouge1", "rouge2", "rougeL", "bleu1", "bleu2", "bleu3", "bleu4", "meteor")


@dataclass
class SampleRecord:
    sample_id: str
    clip_id: str
    category: str
    waterway: str
    question: str
    reference: str
    prediction: str | None = None
    route: str | None = None
    used_fallback: bool = False
    verified: bool | None = None
    retries: int = 0
    score_history: list[dict] = field(default_factory=list)
    retrieved: list[dict] = field(default_factory=list)
    latency_ms: float = 0.0
    failed: bool = False
    error: str | None = None
    scores: dict | None = None
    judge: float | None = None
    judge_error: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "SampleRecord":
        return cls(**raw)


@dataclass
class EvalRun:
    records: list[SampleRecord]
    aggregates: dict
    wallclock: dict

    def to_dict(self) -> dict:
        return {
            "records": [r.to_dict() for r in self.records],
            "aggregates": self.aggregates,
            "wallclock": self.wallclock,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    @classmethod
    def from_dict(cls, raw: dict) -> "EvalRun":
        return cls(
            records=[SampleRecord.from_dict(r) for r in raw["records"]],
            aggregates=raw["aggregates"],
            wallclock=raw["wallclock"],
        )

    @classmethod
    def load(cls, path: str | Path) -> "EvalRun":
        p = Path(path)
        if not p.is_file():
            raise InvalidArgument(f"eval run file not found: {p}")
        return cls.from_dict(json.loads(p.read_text(encoding="utf-8")))


def _group_aggregate(records: list[SampleRecord]) -> dict:
    scored = [r for r in records if not r.failed and r.scores is not None]
    out: dict = {"count": len(records), "scored": len(scored), "failed": len(records) - len(scored)}
    if scored:
        corpus_score, _ = cider(
            [tokenize(r.prediction or "") for r in scored],
            [[tokenize(r.reference)] for r in scored],
        )
        judged = [r.judge for r in scored if r.judge is not None]
        report = MetricReport(
            **{name: sum(r.scores[name] for r in scored) / len(scored) for name in PAIR_METRICS},
            cider=corpus_score,
            judge_score=sum(judged) / len(judged) if judged else None,
        )
        out.update(report.to_dict())
        out["mean_latency_ms"] = sum(r.latency_ms for r in scored) / len(scored)
    return out


def aggregate_records(records: list[SampleRecord]) -> dict:
    """Pure recomputation of every aggregate from per-sample records."""
    per_category = {
        category.value: _group_aggregate(
            [r for r in records if r.category == category.value]
        )
        for category in QACategory
        if any(r.category == category.value for r in records)
    }
    per_waterway = {
        waterway.value: _group_aggregate(
            [r for r in records if r.waterway == waterway.value]
        )
        for waterway in Waterway
        if any(r.waterway == waterway.value for r in records)
    }
    return {
        "overall": _group_aggregate(records),
        "per_category": per_category,
        "per_waterway": per_waterway,
    }


def run_eval(
    manifest: DatasetManifest,
    kb: KnowledgeBase | None,
    backends: AgentBackends,
    split: Split = Split.TEST,
    pipeline_config: PipelineConfig = PipelineConfig(),
    verification_config: VerificationConfig = VerificationConfig(),
    verified_paths: frozenset[RoutePath] = DEFAULT_VERIFIED_PATHS,
    concurrency: int = 1,
    trace: TraceWriter | None = None,
    clock: Clock = time.monotonic,
    resume_from: EvalRun | None = None,
) -> EvalRun:
    if concurrency < 1:
        raise InvalidArgument("concurrency must be >= 1")
    samples = manifest.split_samples(split)
    if not samples:
        raise InvalidArgument(f"no samples in split {split.value!r}")

    done: dict[str, SampleRecord] = {}
    if resume_from is not None:
        done = {
            r.sample_id: r
            for r in resume_from.records
            if not r.failed and r.scores is not None
        }

    def evaluate(sample: QASample) -> SampleRecord:
        record = SampleRecord(
            sample_id=sample.sample_id,
            clip_id=sample.clip_id,
            category=sample.category.value,
            waterway=sample.waterway.value,
            question=sample.question,
            reference=sample.reference_answer,
        )
        try:
            result = run_ask(
                sample.question,
                manifest.clips[sample.clip_id],
                kb,
                backends,
                pipeline_config=pipeline_config,
                verification_config=verification_config,
                verified_paths=verified_paths,
                session_id=sample.sample_id,
                trace=trace,
                clock=clock,
            )
        except WaterwayQAError as exc:
            record.failed = True
            record.error = str(exc)
            return record
        record.prediction = result.answer
        record.route = result.decision.path.value
        record.used_fallback = result.decision.used_fallback
        record.verified = result.verified
        record.retries = result.retries
        record.score_history = result.score_history
        record.retrieved = [
            {"chunk_id": chunk.chunk_id, "score": score}
            for chunk, score in (result.rules.hits if result.rules else ())
        ]
        record.latency_ms = result.latency_ms
        record.scores = pair_scores(result.answer, sample.reference_answer)
        if backends.judge is not None:
            try:
                record.judge = judge_score(
                    sample.question, result.answer, sample.reference_answer, backends.judge
                )
            except MetricUnavailable as exc:
                record.judge_error = str(exc)
        return record

    todo = [s for s in samples if s.sample_id not in done]
    started = clock()
    if concurrency == 1 or len(todo) <= 1:
        fresh = [evaluate(s) for s in todo]
    else:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            fresh = list(pool.map(evaluate, todo))
    total_s = clock() - started

    records = sorted(
        list(done.values()) + fresh, key=lambda r: r.sample_id
    )
    if all(r.failed for r in records):
        raise InvalidState("no samples were evaluable: every sample failed")
    return EvalRun(
        records=records,
        aggregates=aggregate_records(records),
        wallclock={"total_s": total_s, "evaluated": len(fresh), "resumed": len(done)},
    )


# --- report rendering ------------------------------------------------------------


_OVERALL_COLUMNS = list(PAIR_METRICS) + ["cider", "judge_score"]
_CATEGORY_SHORT = {
    "Perception": "P",
    "SceneUnderstanding": "S",
    "CausalPredictive": "C",
    "ActionInteraction": "A",
    "KnowledgeDriven": "R",
}


def _fmt(value) -> str:
    if value is None:
        return "n/a"
    return f"{value:.4f}"


def _text_table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [
        max(len(headers[i]), *(len(row[i]) for row in rows)) if rows else len(headers[i])
        for i in range(len(headers))
    ]
    def line(cells):
        return "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(cells)).rstrip()
    sep = "-" * (sum(widths) + 2 * (len(widths) - 1))
    return "\n".join([line(headers), sep] + [line(row) for row in rows])


def render_overall_table(run: EvalRun) -> str:
    overall = run.aggregates["overall"]
    headers = ["metric", "value"]
    rows = [[name, _fmt(overall.get(name))] for name in _OVERALL_COLUMNS]
    rows.append(["samples", str(overall["count"])])
    rows.append(["failed", str(overall["failed"])])
    return _text_table(headers, rows)


def render_category_table(run: EvalRun) -> str:
    """Judge score and per-question time for each category column."""
    per_category = run.aggregates["per_category"]
    headers = ["measure"] + [
        _CATEGORY_SHORT[c.value] for c in QACategory if c.value in per_category
    ] + ["Time(s)"]
    present = [c.value for c in QACategory if c.value in per_category]
    judge_cells = [_fmt(per_category[c].get("judge_score")) for c in present]
    scored = [per_category[c] for c in present if per_category[c].get("mean_latency_ms") is not None]
    overall_time = (
        sum(g["mean_latency_ms"] * g["scored"] for g in scored)
        / max(1, sum(g["scored"] for g in scored))
        / 1000.0
        if scored
        else None
    )
    rows = [["judge_score"] + judge_cells + [_fmt(overall_time)]]
    rows.append(
        ["count"] + [str(per_category[c]["count"]) for c in present] + [""]
    )
    return _text_table(headers, rows)


def render_waterway_table(run: EvalRun) -> str:
    per_waterway = run.aggregates["per_waterway"]
    present = [w.value for w in Waterway if w.value in per_waterway]
    headers = ["measure"] + present
    rows = [
        ["judge_score"] + [_fmt(per_waterway[w].get("judge_score")) for w in present],
        ["count"] + [str(per_waterway[w]["count"]) for w in present],
    ]
    return _text_table(headers, rows)


def render_report_text(run: EvalRun) -> str:
    return "\n\n".join(
        [
            "== overall metrics ==",
            render_overall_table(run),
            "== per-category (judge score) ==",
            render_category_table(run),
            "== per-waterway (judge score) ==",
            render_waterway_table(run),
        ]
    ) + "\n"


def render_report_csv(run: EvalRun) -> str:
    """Machine-readable flat CSV: section,key,metric,value — parses back into
    the aggregates it came from."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["section", "key", "metric", "value"])

    def emit(section, key, group):
        for name in _OVERALL_COLUMNS + ["count", "scored", "failed", "mean_latency_ms"]:
            if name in group:
                value = group[name]
                writer.writerow([section, key, name, "" if value is None else repr(value)])

    emit("overall", "-", run.aggregates["overall"])
    for key, group in run.aggregates["per_category"].items():
        emit("per_category", key, group)
    for key, group in run.aggregates["per_waterway"].items():
        emit("per_waterway", key, group)
    return buffer.getvalue()


def parse_report_csv(text: str) -> dict:
    """Inverse of render_report_csv, for round-trip checks."""
    out: dict = {"overall": {}, "per_category": {}, "per_waterway": {}}
    reader = csv.reader(io.StringIO(text))
    next(reader)  # header
    for section, key, metric, value in reader:
        parsed = None if value == "" else (
            int(value) if metric in ("count", "scored", "failed") else float(value)
        )
        if section == "overall":
            out["overall"][metric] = parsed
        else:
            out[section].setdefault(key, {})[metric] = parsed
    return out
