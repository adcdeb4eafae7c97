import numpy as np
import pytest

from waterway_qa.backends import MockBackend, MockRule, MockScript, Role, mock_profile
from waterway_qa.knowledge import KnowledgeBase, RuleChunk


def geometry_embedder(mapping: dict[str, tuple[float, ...]], **script_kwargs) -> MockBackend:
    """Embedder mock with an explicit text -> raw-vector table."""
    rules = [MockRule(equals=text, vector=vec) for text, vec in mapping.items()]
    return MockBackend(mock_profile(Role.EMBEDDER), MockScript(rules=rules, **script_kwargs))


def kb_from_vectors(vectors, ids=None, embedder_id="scripted") -> KnowledgeBase:
    """Knowledge base straight from unit-normalized vectors, skipping embedding calls."""
    matrix = np.asarray(vectors, dtype=np.float64)
    matrix = matrix / np.linalg.norm(matrix, axis=1, keepdims=True)
    ids = ids or [f"kb#{i:04d}" for i in range(matrix.shape[0])]
    chunks = [
        RuleChunk(chunk_id=cid, source_doc="kb", text=f"rule text {cid}") for cid in ids
    ]
    return KnowledgeBase(chunks, matrix, embedder_id)


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
