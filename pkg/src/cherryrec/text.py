"""Tokenization and set similarity shared by retrieval and the mock evaluator."""

from __future__ import annotations

import re
from collections.abc import Iterable

_WORD_RE = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Lowercase alphanumeric runs of at least two characters, in order."""
    return [t for t in _WORD_RE.findall(text.lower()) if len(t) >= 2]


def token_set(texts: Iterable[str]) -> frozenset[str]:
    out: set[str] = set()
    for text in texts:
        out.update(tokenize(text))
    return frozenset(out)


def jaccard(a: frozenset | set, b: frozenset | set) -> float:
    """|a ∩ b| / |a ∪ b|, with 0.0 for two empty sets."""
    inter = len(a & b)
    union = len(a) + len(b) - inter
    return inter / union if union > 0 else 0.0


def truncate_title(title: str, cap: int = 32) -> str:
    """Keep the first ``cap`` whitespace-separated tokens of ``title``.

    Titles at or under the cap are returned unchanged (including their
    original spacing); longer ones are re-joined with single spaces.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    parts = title.split()
    if len(parts) <= cap:
        return title
    return " ".join(parts[:cap])
