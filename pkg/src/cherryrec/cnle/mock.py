"""Deterministic stand-in for the fine-tuned evaluator."""

from __future__ import annotations

from collections.abc import Sequence

from ..text import jaccard, token_set, tokenize
from .protocol import EvaluationRequest, EvaluationResponse, validate_response


def preference_tokens(profile_summary: str) -> frozenset[str]:
    """Tokens of the role, focus and history lines of a request's profile field."""
    texts = []
    for line in profile_summary.splitlines():
        if line.startswith("role:"):
            texts.append(line[len("role:"):])
        elif line.startswith("domain_focus:"):
            texts.append(line[len("domain_focus:"):])
        elif line.startswith("- "):
            texts.append(line[2:])
    return token_set(texts)


def evaluate_mock(request: EvaluationRequest) -> EvaluationResponse:
    """Score candidates by title overlap with the user's stated preferences.

    Overlaps are rescaled so the best candidate gets 1.0; if nothing overlaps
    every candidate gets 0.5.
    """
    prefs = preference_tokens(request.profile)
    raw = [(nid, jaccard(frozenset(tokenize(title)), prefs)) for nid, title in request.candidates]
    top = max(v for _, v in raw)
    if top > 0.0:
        scores = [(nid, v / top) for nid, v in raw]
    else:
        scores = [(nid, 0.5) for nid, _ in raw]
    return validate_response(request, EvaluationResponse.from_scores(scores))


class MockEvaluator:
    name = "mock"

    def evaluate(self, request: EvaluationRequest) -> EvaluationResponse:
        return evaluate_mock(request)

    def evaluate_many(self, requests: Sequence[EvaluationRequest]) -> list[EvaluationResponse]:
        return [evaluate_mock(r) for r in requests]

    def close(self) -> None:
        pass
