"""Command-line interface.

Exit codes: 0 success, 1 validation problem (bad arguments, files, config,
dataset), 2 backend/transport failure. `--mock-script` forces every backend
onto deterministic scripted mocks and freezes the latency clock, so eval
outputs are byte-reproducible; no network is touched in that mode.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click

from .backends import MockScript
from .config import SystemConfig, build_backends, load_config
from .dataset import Split, compute_stats, load_dataset
from .errors import (
    BackendFailure,
    CaptionUnavailable,
    ConfigError,
    DatasetValidationError,
    InvalidArgument,
    InvalidState,
    MetricUnavailable,
    ProtocolError,
    ReasoningFailed,
    TransportError,
    WaterwayQAError,
)
from .evaluation import EvalRun, render_report_csv, render_report_text, run_eval
from .frames import load_manifest
from .knowledge import KnowledgeBase, ingest, load_corpus_dir, retrieve
from .pipeline import PipelineConfig
from .session import frozen_clock, run_ask
from .trace import TraceWriter
from .verification import VerificationConfig

# usage errors should not collide with backend-failure exit code 2
click.UsageError.exit_code = 1

_VALIDATION_ERRORS = (
    InvalidArgument,
    InvalidState,
    ConfigError,
    DatasetValidationError,
)
_BACKEND_ERRORS = (
    BackendFailure,
    TransportError,
    ProtocolError,
    ReasoningFailed,
    CaptionUnavailable,
    MetricUnavailable,
)


def _fail(exc: WaterwayQAError) -> None:
    click.echo(f"error: {exc}", err=True)
    if isinstance(exc, _BACKEND_ERRORS):
        sys.exit(2)
    sys.exit(1)


class Runtime:
    """Everything a subcommand needs, resolved lazily from the global flags."""

    def __init__(self, config_path: str | None, mock_script_path: str | None,
                 trace_path: str | None, trace_full: bool = False):
        self.config = load_config(config_path) if config_path else SystemConfig()
        self.mock_script = (
            MockScript.from_file(mock_script_path) if mock_script_path else None
        )
        self._trace_override = trace_path
        self._trace_full = trace_full
        self._backends = None

    @property
    def backends(self):
        if self._backends is None:
            self._backends = build_backends(self.config, self.mock_script)
        return self._backends

    @property
    def clock(self):
        return frozen_clock if self.mock_script is not None else time.monotonic

    def trace_writer(self) -> TraceWriter | None:
        path = self._trace_override or self.config.trace_path
        if not path:
            return None
        return TraceWriter(path, full_payloads=self._trace_full or self.config.trace_full)

    def load_kb(self, required: bool) -> KnowledgeBase | None:
        if self.config.kb_path and Path(self.config.kb_path).is_file():
            return KnowledgeBase.load(self.config.kb_path)
        if self.config.corpus_dir:
            docs = load_corpus_dir(self.config.corpus_dir)
            return ingest(docs, self.backends.embedder)
        if required:
            raise InvalidArgument(
                "no knowledge base: configure [kb].path or [kb].corpus_dir, or run `kb ingest`"
            )
        return None

    def pipeline_config(self) -> PipelineConfig:
        return PipelineConfig(target_k=self.config.ats_target_k, top_k=self.config.rag_top_k)

    def verification_config(self) -> VerificationConfig:
        return VerificationConfig(
            threshold=self.config.verification_threshold,
            max_retries=self.config.verification_max_retries,
            delta_k=self.config.rag_delta_k,
        )


@click.group()
@click.option("--config", "config_path", type=str, default=None, help="TOML config file.")
@click.option("--mock-script", "mock_script_path", type=str, default=None,
              help="JSON mock script; forces all backends to scripted mocks.")
@click.option("--trace", "trace_path", type=str, default=None,
              help="Override the JSONL trace path.")
@click.option("--trace-full", is_flag=True, default=False,
              help="Store full prompt bodies in the trace instead of digests.")
@click.pass_context
def main(ctx, config_path, mock_script_path, trace_path, trace_full):
    """Question answering over waterway video clips, grounded in regulations."""
    try:
        ctx.obj = Runtime(config_path, mock_script_path, trace_path, trace_full)
    except WaterwayQAError as exc:
        _fail(exc)


@main.command()
@click.option("--clip", "clip_path", required=True, type=str, help="Frame manifest JSON.")
@click.argument("question")
@click.pass_obj
def ask(rt: Runtime, clip_path, question):
    """Answer one question about one clip."""
    try:
        manifest = load_manifest(clip_path)
        kb = rt.load_kb(required=False)
        result = run_ask(
            question,
            manifest,
            kb,
            rt.backends,
            pipeline_config=rt.pipeline_config(),
            verification_config=rt.verification_config(),
            verified_paths=rt.config.verified_paths,
            session_id=f"cli-{manifest.clip_id}",
            trace=rt.trace_writer(),
            clock=rt.clock,
        )
    except WaterwayQAError as exc:
        _fail(exc)
    click.echo(json.dumps(result.envelope(), indent=2, sort_keys=True))


@main.command(name="eval")
@click.option("--dataset", "dataset_path", type=str, default=None)
@click.option("--split", type=click.Choice(["train", "test"]), default="test")
@click.option("--out", "out_path", type=str, default=None, help="Write the EvalRun JSON here.")
@click.option("--report", "report_path", type=str, default=None, help="Write the text report here.")
@click.option("--csv", "csv_path", type=str, default=None, help="Write the CSV report here.")
@click.option("--concurrency", type=int, default=1)
@click.option("--resume", "resume_path", type=str, default=None,
              help="Existing EvalRun JSON; already-scored samples are kept.")
@click.pass_obj
def eval_command(rt: Runtime, dataset_path, split, out_path, report_path, csv_path,
                 concurrency, resume_path):
    """Evaluate a dataset split and render the report tables."""
    try:
        path = dataset_path or rt.config.dataset_path
        if not path:
            raise InvalidArgument("no dataset: pass --dataset or configure [dataset].path")
        manifest = load_dataset(path)
        kb = rt.load_kb(required=False)
        resume = EvalRun.load(resume_path) if resume_path else None
        run = run_eval(
            manifest,
            kb,
            rt.backends,
            split=Split(split),
            pipeline_config=rt.pipeline_config(),
            verification_config=rt.verification_config(),
            verified_paths=rt.config.verified_paths,
            concurrency=concurrency,
            trace=rt.trace_writer(),
            clock=rt.clock,
            resume_from=resume,
        )
    except WaterwayQAError as exc:
        _fail(exc)
    if out_path:
        run.save(out_path)
    text = render_report_text(run)
    if report_path:
        Path(report_path).write_text(text, encoding="utf-8")
    if csv_path:
        Path(csv_path).write_text(render_report_csv(run), encoding="utf-8")
    click.echo(text, nl=False)


@main.group()
def kb():
    """Knowledge-base maintenance."""


@kb.command(name="ingest")
@click.option("--corpus", "corpus_dir", type=str, default=None, help="Directory of .txt/.md files.")
@click.option("--out", "out_path", type=str, default=None, help="Where to persist the kb JSON.")
@click.pass_obj
def kb_ingest(rt: Runtime, corpus_dir, out_path):
    """Chunk and embed a regulation corpus."""
    try:
        directory = corpus_dir or rt.config.corpus_dir
        if not directory:
            raise InvalidArgument("no corpus: pass --corpus or configure [kb].corpus_dir")
        docs = load_corpus_dir(directory)
        base = ingest(docs, rt.backends.embedder)
        destination = out_path or rt.config.kb_path
        if destination:
            Path(destination).parent.mkdir(parents=True, exist_ok=True)
            base.save(destination)
    except WaterwayQAError as exc:
        _fail(exc)
    click.echo(f"ingested {base.size} chunks from {len(docs)} document(s)"
               + (f" -> {destination}" if destination else ""))


@kb.command(name="search")
@click.argument("query")
@click.option("-k", "top_k", type=int, default=4)
@click.pass_obj
def kb_search(rt: Runtime, query, top_k):
    """Search the knowledge base."""
    try:
        base = rt.load_kb(required=True)
        context = retrieve(base, query, top_k, rt.backends.embedder)
    except WaterwayQAError as exc:
        _fail(exc)
    for chunk, score in context.hits:
        label = chunk.section_label or chunk.source_doc
        click.echo(f"{score:+.4f}  {chunk.chunk_id}  ({label})  {chunk.text}")


@main.command()
@click.option("--dataset", "dataset_path", type=str, default=None)
@click.option("--json", "as_json", is_flag=True, default=False)
@click.pass_obj
def stats(rt: Runtime, dataset_path, as_json):
    """Descriptive statistics for a dataset manifest."""
    try:
        path = dataset_path or rt.config.dataset_path
        if not path:
            raise InvalidArgument("no dataset: pass --dataset or configure [dataset].path")
        summary = compute_stats(load_dataset(path))
    except WaterwayQAError as exc:
        _fail(exc)
    if as_json:
        click.echo(json.dumps(summary.to_dict(), indent=2, sort_keys=True))
    else:
        click.echo(summary.render_text())


@main.command()
@click.option("--host", type=str, default=None)
@click.option("--port", type=int, default=None)
@click.pass_obj
def serve(rt: Runtime, host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    try:
        dataset = load_dataset(rt.config.dataset_path) if rt.config.dataset_path else None
        app = create_app(
            rt.config,
            rt.backends,
            kb=rt.load_kb(required=False),
            dataset=dataset,
            trace=rt.trace_writer(),
            clock=rt.clock,
        )
    except WaterwayQAError as exc:
        _fail(exc)
    uvicorn.run(
        app,
        host=host or rt.config.service_host,
        port=port or rt.config.service_port,
        log_level="warning",
    )


if __name__ == "__main__":
    main()
