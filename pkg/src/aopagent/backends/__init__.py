from .asr import FileTranscriptProvider, parse_transcript
from .base import (
    BUILD_TEMPERATURE,
    DEFAULT_CONTEXT_BUDGET,
    LOOP_TEMPERATURE,
    BackendConfig,
    Backends,
    ChatBackend,
    ChatMessage,
    ChatRequest,
    EmbeddingBackend,
    MediaAttachment,
    normalize_rows,
)
from .mock import (
    BagOfWordsEmbedder,
    HashEmbedder,
    ReplayChatBackend,
    ScriptedChatBackend,
    SequenceChatBackend,
)
from .heuristic import HeuristicOmniBackend
from .openai_http import ContextBudgetError, OpenAICompatibleClient

__all__ = [
    "BUILD_TEMPERATURE",
    "DEFAULT_CONTEXT_BUDGET",
    "LOOP_TEMPERATURE",
    "BackendConfig",
    "Backends",
    "BagOfWordsEmbedder",
    "ChatBackend",
    "ChatMessage",
    "ChatRequest",
    "ContextBudgetError",
    "EmbeddingBackend",
    "FileTranscriptProvider",
    "HashEmbedder",
    "HeuristicOmniBackend",
    "MediaAttachment",
    "OpenAICompatibleClient",
    "ReplayChatBackend",
    "ScriptedChatBackend",
    "SequenceChatBackend",
    "normalize_rows",
    "parse_transcript",
]
