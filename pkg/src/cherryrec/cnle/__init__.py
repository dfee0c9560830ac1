"""Content-aware preference evaluation: prompts, mock and remote evaluators."""

from .mock import MockEvaluator, evaluate_mock, preference_tokens
from .protocol import (
    BEHAVIORAL,
    COLLECTION_FOCUS,
    DOMAIN_FOCUS,
    INTEREST_ROLE,
    MAX_CANDIDATES,
    PROTOCOL,
    TASKS,
    EvaluationRequest,
    EvaluationResponse,
    PromptTask,
    choose_task,
    render_prompt,
    request_from_wire,
    request_to_wire,
    response_to_wire,
    summarize_profile,
    validate_response,
)
from .remote import FallbackEvaluator, RemoteEvaluator
from ..text import truncate_title

__all__ = [
    "BEHAVIORAL",
    "COLLECTION_FOCUS",
    "DOMAIN_FOCUS",
    "INTEREST_ROLE",
    "MAX_CANDIDATES",
    "PROTOCOL",
    "TASKS",
    "EvaluationRequest",
    "EvaluationResponse",
    "FallbackEvaluator",
    "MockEvaluator",
    "PromptTask",
    "RemoteEvaluator",
    "choose_task",
    "evaluate_mock",
    "preference_tokens",
    "render_prompt",
    "request_from_wire",
    "request_to_wire",
    "response_to_wire",
    "summarize_profile",
    "truncate_title",
    "validate_response",
]
