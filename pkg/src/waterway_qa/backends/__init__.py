from .base import (
    AgentBackends,
    Backend,
    BackendProfile,
    ChatExchange,
    ChatMessage,
    EmbeddingVector,
    Role,
)
from .mock import MockBackend, MockRule, MockScript, mock_profile, sequential_rules
from .openai_http import HttpBackend

__all__ = [
    "AgentBackends",
    "Backend",
    "BackendProfile",
    "ChatExchange",
    "ChatMessage",
    "EmbeddingVector",
    "HttpBackend",
    "MockBackend",
    "MockRule",
    "MockScript",
    "Role",
    "mock_profile",
    "sequential_rules",
]
