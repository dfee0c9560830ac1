"""Domain types and chronological sequence construction."""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .errors import ContractError

log = logging.getLogger(__name__)

CLICKED = "clicked"
SHOWN = "shown_not_clicked"
_CLICK_VERBS = frozenset({"clicked", "click", "1"})

_TIME_FORMATS = ("%m/%d/%Y %I:%M:%S %p",)  # MIND's native behaviors format


def parse_timestamp(value: int | float | str) -> int:
    """Normalize epoch seconds or an ISO-8601 string to integer UTC epoch seconds.

    Naive datetimes are taken as UTC. Sub-second precision is discarded.
    Raises ``ValueError`` for anything unparseable.
    """
    if isinstance(value, bool):
        raise ValueError(f"not a timestamp: {value!r}")
    if isinstance(value, (int, float)):
        if not math.isfinite(value):
            raise ValueError(f"not a timestamp: {value!r}")
        return int(math.floor(value))
    text = str(value).strip()
    if not text:
        raise ValueError("empty timestamp")
    try:
        return int(math.floor(float(text)))
    except ValueError:
        pass
    iso = text[:-1] + "+00:00" if text.endswith("Z") else text
    try:
        dt = datetime.fromisoformat(iso)
    except ValueError:
        for fmt in _TIME_FORMATS:
            try:
                dt = datetime.strptime(text, fmt)
                break
            except ValueError:
                continue
        else:
            raise ValueError(f"unparseable timestamp: {text!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(math.floor(dt.timestamp()))


def normalize_action(action: str) -> str:
    """Map a source-data verb onto {clicked, shown_not_clicked}."""
    return CLICKED if str(action).strip().lower() in _CLICK_VERBS else SHOWN


@dataclass(frozen=True, slots=True)
class NewsItem:
    id: str
    title: str
    category: str
    source: str = ""
    publish_time: int | None = None
    body: str | None = None
    subcategory: str | None = None
    click_count: int = 0
    impression_count: int = 0

    def __post_init__(self) -> None:
        if not self.id:
            raise ContractError("news id must be non-empty")
        if not 0 <= self.click_count <= self.impression_count:
            raise ContractError(
                f"{self.id}: need impression_count >= click_count >= 0, "
                f"got {self.impression_count}/{self.click_count}"
            )


@dataclass(frozen=True, slots=True)
class Interaction:
    """One entry of a user's sequence; ``impression_id`` is None for history-only clicks."""

    news_id: str
    timestamp: int
    label: str
    impression_id: str | None = None

    @property
    def clicked(self) -> bool:
        return self.label == CLICKED


@dataclass(frozen=True, slots=True)
class InteractionSequence:
    user_id: str
    items: tuple[Interaction, ...]

    def __post_init__(self) -> None:
        for a, b in zip(self.items, self.items[1:]):
            if b.timestamp < a.timestamp:
                raise ContractError(f"sequence for {self.user_id} is not chronological")

    @property
    def length(self) -> int:
        """|S_u|: the number of clicked items."""
        return sum(1 for it in self.items if it.clicked)

    def clicks(self) -> tuple[Interaction, ...]:
        return tuple(it for it in self.items if it.clicked)

    def clicked_ids(self) -> list[str]:
        return [it.news_id for it in self.items if it.clicked]


@dataclass(frozen=True, slots=True)
class UserProfile:
    user_id: str
    role_positioning: str = ""
    domain_focus: tuple[str, ...] = ()
    collection_list: tuple[str, ...] = ()
    behavior_history: tuple[Interaction, ...] = ()

    def __post_init__(self) -> None:
        if not self.user_id:
            raise ContractError("user id must be non-empty")
        for a, b in zip(self.behavior_history, self.behavior_history[1:]):
            if b.timestamp < a.timestamp:
                raise ContractError(f"behavior history for {self.user_id} is not sorted")

    def clicked_history(self) -> list[Interaction]:
        return [it for it in self.behavior_history if it.clicked]


@dataclass(frozen=True, slots=True)
class ScoredCandidate:
    news_id: str
    knrs_features: tuple[float, float, float, float, float]
    knrs_value: float
    cnle_score: float | None = None
    vans_prediction: float | None = None

    def __post_init__(self) -> None:
        if len(self.knrs_features) != 5:
            raise ContractError("knrs_features must have five components")
        if any(not 0.0 <= f <= 1.0 for f in self.knrs_features):
            raise ContractError(f"{self.news_id}: feature outside [0, 1]: {self.knrs_features}")


@dataclass(frozen=True, slots=True)
class BehaviorRecord:
    """One raw behavior row before validation: timestamp may still be text."""

    user_id: str
    news_id: str
    timestamp: int | float | str
    action: str = CLICKED
    impression_id: str | None = None


@dataclass(slots=True)
class SequenceStats:
    records: int = 0
    dropped_unknown: int = 0
    rejected_timestamp: int = 0
    diagnostics: list[str] = field(default_factory=list)


def build_sequences(
    catalog: Mapping[str, NewsItem] | Iterable[str],
    behaviors: Iterable[BehaviorRecord],
) -> tuple[dict[str, InteractionSequence], SequenceStats]:
    """Group raw behavior records into chronological per-user sequences.

    Records naming news ids outside ``catalog`` are dropped and counted;
    records with unparseable timestamps are rejected with a diagnostic.
    Equal timestamps keep their input order.
    """
    known = catalog if isinstance(catalog, Mapping) else frozenset(catalog)
    stats = SequenceStats()
    per_user: dict[str, list[Interaction]] = defaultdict(list)
    for rec in behaviors:
        stats.records += 1
        if rec.news_id not in known:
            stats.dropped_unknown += 1
            continue
        try:
            ts = parse_timestamp(rec.timestamp)
        except ValueError as exc:
            stats.rejected_timestamp += 1
            msg = f"record {stats.records} ({rec.user_id}, {rec.news_id}): {exc}"
            stats.diagnostics.append(msg)
            log.warning("rejected behavior %s", msg)
            continue
        per_user[rec.user_id].append(
            Interaction(rec.news_id, ts, normalize_action(rec.action), rec.impression_id)
        )
    if stats.dropped_unknown:
        log.info("dropped %d behavior records with unknown news ids", stats.dropped_unknown)
    sequences = {
        uid: InteractionSequence(uid, tuple(sorted(items, key=lambda it: it.timestamp)))
        for uid, items in sorted(per_user.items())
    }
    return sequences, stats


def sequence_records(seq: InteractionSequence) -> list[BehaviorRecord]:
    """Inverse of :func:`build_sequences` for one user."""
    return [
        BehaviorRecord(seq.user_id, it.news_id, it.timestamp, it.label, it.impression_id)
        for it in seq.items
    ]


def truncate_history(seq: InteractionSequence, cap: int) -> InteractionSequence:
    """The most recent ``cap`` clicked items of ``seq``, oldest first."""
    if cap < 1:
        raise ContractError("history cap must be >= 1")
    return InteractionSequence(seq.user_id, seq.clicks()[-cap:])
