"""LLM gateway: structured-output client, model profiles, prompts, backends."""

from .client import LlmClient, LlmSession, StructuredRequest
from .errors import ContractViolation, LlmFailure, MissingFixture, Timeout, TransportError
from .mock import MockBackend, mock_backend
from .profiles import ModelProfile, TokenUsage, estimate_cost, load_profiles
from .prompts import MissingPrompt, PromptSet, RenderError, load_prompts

__all__ = [
    "ContractViolation",
    "LlmClient",
    "LlmFailure",
    "LlmSession",
    "MissingFixture",
    "MissingPrompt",
    "MockBackend",
    "ModelProfile",
    "PromptSet",
    "RenderError",
    "StructuredRequest",
    "Timeout",
    "TokenUsage",
    "TransportError",
    "estimate_cost",
    "load_profiles",
    "load_prompts",
    "mock_backend",
]
