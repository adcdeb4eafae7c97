"""Question answering over waterway video clips: adaptive routing, regulation
retrieval, hierarchical reasoning, and self-reflective verification, with an
evaluation harness, HTTP service, and CLI."""

__version__ = "0.1.0"

from .backends import (
    AgentBackends,
    Backend,
    BackendProfile,
    ChatExchange,
    ChatMessage,
    EmbeddingVector,
    HttpBackend,
    MockBackend,
    MockRule,
    MockScript,
    Role,
)
from .dataset import DatasetManifest, QACategory, QASample, Split, Waterway, compute_stats, load_dataset
from .evaluation import EvalRun, run_eval
from .frames import FrameIndexSet, FrameManifest, sample, standardize
from .knowledge import KnowledgeBase, RetrievedContext, RuleChunk, build_query, expand, ingest, retrieve
from .metrics import MetricReport, bleu, cider, judge_score, meteor_lite, rouge_l, rouge_n, tokenize
from .pipeline import AnswerDraft, FusedContext, PipelineConfig, SceneCaption, assemble_context, caption, dispatch, reason, summarize
from .routing import RouteDecision, RoutePath, route
from .session import AskResult, run_ask
from .verification import GradeResult, VerificationConfig, VerifiedAnswer, grade, verify
