"""Leave-one-out splits, rank metrics at k and the effective-retrieval-subset report."""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

from .core import Interaction, InteractionSequence
from .errors import ContractError


@dataclass(frozen=True, slots=True)
class EvalSplit:
    user_id: str
    train: tuple[Interaction, ...]
    validation: Interaction
    test: Interaction


def leave_one_out_split(
    sequences: Mapping[str, InteractionSequence] | Iterable[InteractionSequence],
    max_length: int | None = None,
) -> tuple[list[EvalSplit], int]:
    """Last click -> test, second to last -> validation, the rest -> train.

    ``max_length`` keeps only that many most recent clicks before splitting.
    Users with fewer than three clicks are excluded; their count is returned.
    """
    seqs = sequences.values() if isinstance(sequences, Mapping) else sequences
    splits, excluded = [], 0
    for seq in sorted(seqs, key=lambda s: s.user_id):
        clicks = seq.clicks()
        if max_length is not None:
            clicks = clicks[-max_length:]
        if len(clicks) < 3:
            excluded += 1
            continue
        splits.append(EvalSplit(seq.user_id, clicks[:-2], clicks[-2], clicks[-1]))
    return splits, excluded


def metrics_at_k(ranked: Sequence[str], truth: str, k: int) -> tuple[float, float, float]:
    """(MRR@k, NDCG@k, Recall@k) for a single relevant item.

    With r the 1-based rank of ``truth``: 1/r, 1/log2(r+1) and 1 when r <= k,
    all zero otherwise (including when ``truth`` is absent).
    """
    if k < 1:
        raise ContractError("k must be >= 1")
    if len(set(ranked)) != len(ranked):
        raise ContractError("ranked list contains duplicate ids")
    for r, nid in enumerate(ranked[:k], start=1):
        if nid == truth:
            return 1.0 / r, 1.0 / math.log2(r + 1), 1.0
    return 0.0, 0.0, 0.0


@dataclass(frozen=True, slots=True)
class UserResult:
    user_id: str
    retrieved: bool  # truth among the stage-1 top candidates
    ranked: tuple[str, ...]
    truth: str


@dataclass(frozen=True, slots=True)
class EvalReport:
    k: int
    users: int
    excluded: int
    mrr: float
    ndcg: float
    recall: float
    coverage: float
    subset_mrr: float | None
    subset_ndcg: float | None
    subset_recall: float | None

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "users": self.users,
            "excluded": self.excluded,
            "overall": {"mrr": self.mrr, "ndcg": self.ndcg, "recall": self.recall},
            "effective_subset": {
                "coverage": self.coverage,
                "mrr": self.subset_mrr,
                "ndcg": self.subset_ndcg,
                "recall": self.subset_recall,
            },
        }

    def table(self) -> str:
        def fmt(v):
            return "   n/a" if v is None else f"{v:.4f}"
        return (
            f"{'':>18} {'MRR@' + str(self.k):>8} {'NDCG@' + str(self.k):>8} {'Recall@' + str(self.k):>9}\n"
            f"{'all users':>18} {fmt(self.mrr):>8} {fmt(self.ndcg):>8} {fmt(self.recall):>9}\n"
            f"{'effective subset':>18} {fmt(self.subset_mrr):>8} {fmt(self.subset_ndcg):>8} "
            f"{fmt(self.subset_recall):>9}\n"
            f"users={self.users} excluded={self.excluded} coverage={self.coverage:.4f}"
        )


def effective_subset(results: Iterable[UserResult], k: int = 5, excluded: int = 0) -> EvalReport:
    """Metrics over all users (missed retrievals score 0) and over the retrieved subset."""
    rows = sorted(results, key=lambda r: r.user_id)
    totals = [0.0, 0.0, 0.0]
    subset = [0.0, 0.0, 0.0]
    n_subset = 0
    for res in rows:
        if not res.retrieved:
            continue
        m = metrics_at_k(list(res.ranked), res.truth, k)
        n_subset += 1
        for i in range(3):
            totals[i] += m[i]
            subset[i] += m[i]
    n = len(rows)
    overall = [t / n if n else 0.0 for t in totals]
    sub = [s / n_subset for s in subset] if n_subset else [None, None, None]
    return EvalReport(
        k=k, users=n, excluded=excluded,
        mrr=overall[0], ndcg=overall[1], recall=overall[2],
        coverage=n_subset / n if n else 0.0,
        subset_mrr=sub[0], subset_ndcg=sub[1], subset_recall=sub[2],
    )
