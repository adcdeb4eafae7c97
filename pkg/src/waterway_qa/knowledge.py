"""Regulation corpus ingestion and dense top-K cosine retrieval.

The corpus (e.g. a COLREGs extract) is split into rule chunks, embedded once,
and searched with an exact exhaustive cosine scan. No ANN index: regulation
corpora are small (hundreds to thousands of chunks) and exactness is what
makes retrieval oracle-testable. Ties break by ascending chunk_id so runs are
reproducible.

A knowledge base is immutable after ingest; retrievals are unrestricted
concurrently, and re-ingest builds a new value rather than mutating.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .backends import Backend
from .errors import InvalidArgument, InvalidState

DEFAULT_TOP_K = 4
DEFAULT_DELTA_K = 4

QUERY_CAPTION_SEPARATOR = "\n"

_HEADING = re.compile(r"^#{1,6}\s+(.*\S)\s*$")
_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")


@dataclass(frozen=True)
class RuleChunk:
    chunk_id: str
    source_doc: str
    text: str
    section_label: str | None = None

    def __post_init__(self):
        if not self.text:
            raise InvalidArgument(f"chunk {self.chunk_id!r} has empty text")


class KnowledgeBase:
    """Embedded rule chunks plus their unit-norm embedding matrix (M x d)."""

    def __init__(self, chunks: list[RuleChunk], embeddings: np.ndarray, embedder_id: str):
        matrix = np.asarray(embeddings, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != len(chunks):
            raise InvalidArgument(
                f"need one embedding per chunk: {matrix.shape} vs {len(chunks)} chunks"
            )
        norms = np.linalg.norm(matrix, axis=1)
        if matrix.shape[0] and not np.allclose(norms, 1.0, atol=1e-6):
            raise InvalidArgument("knowledge-base embeddings must be unit-norm")
        ids = [c.chunk_id for c in chunks]
        if len(set(ids)) != len(ids):
            raise InvalidArgument("chunk_ids must be unique within a knowledge base")
        self.chunks: tuple[RuleChunk, ...] = tuple(chunks)
        self.matrix = matrix
        self.embedder_id = embedder_id

    @property
    def size(self) -> int:
        return len(self.chunks)

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1]) if self.size else 0

    def to_dict(self) -> dict:
        return {
            "embedder_id": self.embedder_id,
            "chunks": [
                {
                    "chunk_id": c.chunk_id,
                    "source_doc": c.source_doc,
                    "section_label": c.section_label,
                    "text": c.text,
                }
                for c in self.chunks
            ],
            "embeddings": [[float(x) for x in row] for row in self.matrix],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def from_dict(cls, raw: dict) -> "KnowledgeBase":
        chunks = [
            RuleChunk(
                chunk_id=c["chunk_id"],
                source_doc=c["source_doc"],
                section_label=c.get("section_label"),
                text=c["text"],
            )
            for c in raw["chunks"]
        ]
        return cls(chunks, np.array(raw["embeddings"], dtype=np.float64), raw["embedder_id"])

    @classmethod
    def load(cls, path: str | Path) -> "KnowledgeBase":
        p = Path(path)
        if not p.is_file():
            raise InvalidArgument(f"knowledge base file not found: {p}")
        return cls.from_dict(json.loads(p.read_text(encoding="utf-8")))


@dataclass(frozen=True)
class RetrievedContext:
    hits: tuple[tuple[RuleChunk, float], ...]
    requested_k: int

    def __post_init__(self):
        if self.requested_k < 1:
            raise InvalidArgument("requested_k must be positive")
        scores = [score for _, score in self.hits]
        if any(b > a for a, b in zip(scores, scores[1:])):
            raise InvalidArgument("hit scores must be non-increasing")
        ids = [chunk.chunk_id for chunk, _ in self.hits]
        if len(set(ids)) != len(ids):
            raise InvalidArgument("duplicate chunk_ids in retrieved context")
        if len(self.hits) > self.requested_k:
            raise InvalidArgument("more hits than requested_k")

    @property
    def chunk_ids(self) -> tuple[str, ...]:
        return tuple(chunk.chunk_id for chunk, _ in self.hits)

    def __len__(self) -> int:
        return len(self.hits)


@dataclass(frozen=True)
class ChunkingConfig:
    max_chars: int = 800
    overlap_chars: int = 80

    def __post_init__(self):
        if self.overlap_chars < 0 or self.max_chars <= self.overlap_chars:
            raise InvalidArgument("need max_chars > overlap_chars >= 0")


def _tile(text: str, max_chars: int, overlap: int) -> list[str]:
    pieces = []
    start = 0
    while True:
        end = min(start + max_chars, len(text))
        pieces.append(text[start:end])
        if end == len(text):
            return pieces
        start = end - overlap


def _pack_sentences(paragraph: str, max_chars: int, overlap: int) -> list[str]:
    chunks: list[str] = []
    current = ""
    for sentence in _SENTENCE_SPLIT.split(paragraph):
        candidate = sentence if not current else current + " " + sentence
        if len(candidate) <= max_chars:
            current = candidate
            continue
        if current:
            chunks.append(current)
            tail = current[-overlap:] if overlap else ""
            current = (tail + " " + sentence) if tail else sentence
        else:
            current = sentence
        if len(current) > max_chars:
            tiles = _tile(current, max_chars, overlap)
            chunks.extend(tiles[:-1])
            current = tiles[-1]
    if current:
        chunks.append(current)
    return chunks


def split_document(text: str, chunking: ChunkingConfig) -> list[tuple[str | None, str]]:
    """Split one document into (section_label, chunk_text) pairs.

    Paragraphs (blank-line separated) are the unit; oversized paragraphs are
    split at sentence boundaries with trailing-context overlap. Markdown ATX
    headings label the chunks that follow them and are not chunks themselves.
    """
    out: list[tuple[str | None, str]] = []
    label: str | None = None
    for paragraph in re.split(r"\n\s*\n", text):
        paragraph = paragraph.strip()
        if not paragraph:
            continue
        heading = _HEADING.match(paragraph)
        if heading and "\n" not in paragraph:
            label = heading.group(1)
            continue
        paragraph = re.sub(r"\s*\n\s*", " ", paragraph)
        if len(paragraph) <= chunking.max_chars:
            out.append((label, paragraph))
        else:
            for piece in _pack_sentences(paragraph, chunking.max_chars, chunking.overlap_chars):
                out.append((label, piece))
    return out


def ingest(
    documents: list[tuple[str, str]],
    embedder: Backend,
    chunking: ChunkingConfig = ChunkingConfig(),
) -> KnowledgeBase:
    """Chunk, embed, and assemble a knowledge base.

    Aborts with the embedder's BackendFailure if embedding fails; an empty
    (all-whitespace) corpus is rejected up front.
    """
    if not any(text.strip() for _, text in documents):
        raise InvalidArgument("corpus is empty: no document has non-whitespace content")
    chunks: list[RuleChunk] = []
    for source, text in documents:
        for i, (label, piece) in enumerate(split_document(text, chunking)):
            chunks.append(
                RuleChunk(
                    chunk_id=f"{source}#{i:04d}",
                    source_doc=source,
                    section_label=label,
                    text=piece,
                )
            )
    if not chunks:
        raise InvalidArgument("corpus produced no chunks")
    vectors = embedder.embed([c.text for c in chunks])
    matrix = np.array([v.values for v in vectors], dtype=np.float64)
    return KnowledgeBase(chunks, matrix, embedder.profile.model_id)


def load_corpus_dir(directory: str | Path) -> list[tuple[str, str]]:
    """Read every .txt/.md file under a directory as (file name, text), sorted."""
    root = Path(directory)
    if not root.is_dir():
        raise InvalidArgument(f"corpus directory not found: {root}")
    docs = [
        (p.name, p.read_text(encoding="utf-8"))
        for p in sorted(root.iterdir())
        if p.suffix.lower() in (".txt", ".md") and p.is_file()
    ]
    if not docs:
        raise InvalidArgument(f"no .txt or .md corpus files in {root}")
    return docs


def build_query(question: str, caption: str | None = None) -> str:
    """Concatenate the question with the scene caption so retrieval is
    conditioned on the live visual context when one exists."""
    if not question or not question.strip():
        raise InvalidArgument("question must be non-empty")
    if caption and caption.strip():
        return question + QUERY_CAPTION_SEPARATOR + caption
    return question


def _embed_query(kb: KnowledgeBase, query_text: str, embedder: Backend) -> np.ndarray:
    (vector,) = embedder.embed([query_text])
    if kb.size and vector.dim != kb.dim:
        raise InvalidState(
            f"query embedding dim {vector.dim} != knowledge base dim {kb.dim}"
        )
    return np.asarray(vector.values, dtype=np.float64)


def _ranked(kb: KnowledgeBase, scores: np.ndarray) -> list[int]:
    return sorted(range(kb.size), key=lambda i: (-scores[i], kb.chunks[i].chunk_id))


def retrieve(
    kb: KnowledgeBase, query_text: str, top_k: int, embedder: Backend
) -> RetrievedContext:
    """Exhaustive cosine scan; descending score, ties by ascending chunk_id."""
    if kb.size == 0:
        raise InvalidArgument("knowledge base is empty")
    if top_k < 1:
        raise InvalidArgument("top_k must be >= 1")
    query = _embed_query(kb, query_text, embedder)
    scores = kb.matrix @ query
    order = _ranked(kb, scores)[:top_k]
    hits = tuple((kb.chunks[i], float(scores[i])) for i in order)
    return RetrievedContext(hits=hits, requested_k=top_k)


def expand(
    kb: KnowledgeBase,
    query_text: str,
    existing: RetrievedContext,
    delta_k: int,
    embedder: Backend,
) -> RetrievedContext:
    """Widen the retrieval scope and union with what we already hold.

    The chunk set never shrinks; chunks re-found by the wider scan carry their
    fresh scores, ones only in ``existing`` keep their old scores.
    """
    if delta_k < 1:
        raise InvalidArgument("delta_k must be >= 1")
    wider_k = existing.requested_k + delta_k
    wider = retrieve(kb, query_text, wider_k, embedder)
    merged: dict[str, tuple[RuleChunk, float]] = {
        chunk.chunk_id: (chunk, score) for chunk, score in wider.hits
    }
    for chunk, score in existing.hits:
        merged.setdefault(chunk.chunk_id, (chunk, score))
    ordered = sorted(merged.values(), key=lambda pair: (-pair[1], pair[0].chunk_id))
    return RetrievedContext(hits=tuple(ordered), requested_k=wider_k)
