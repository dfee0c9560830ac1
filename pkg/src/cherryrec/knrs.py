"""Knowledge-aware rapid selection: five value features, linear fusion, two-stage cut.

The five features of a (user, item) pair, each in [0, 1]:

* relevance   -- Jaccard overlap of the user's focus/history tokens and the item's
                 category, subcategory and title tokens
* credibility -- per-source lookup, 0.5 for unknown sources
* timeliness  -- 2 ** (-age / half_life)
* attention   -- clicks / (impressions + smoothing) over a recency window
* novelty     -- 1 - max title similarity to the user's recent clicks

The catalog scan runs in :mod:`cherryrec.kernels`; :func:`compute_value_features`
is the scalar reference and the hook for custom feature functions.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import kernels
from .core import InteractionSequence, NewsItem, ScoredCandidate, UserProfile
from .errors import ContractError, DataError
from .text import jaccard, token_set

log = logging.getLogger(__name__)

UNKNOWN_SOURCE_CREDIBILITY = 0.5
FEATURE_NAMES = ("relevance", "credibility", "timeliness", "attention", "novelty")


@dataclass(frozen=True, slots=True)
class KnrsWeights:
    w1: float = 0.2
    w2: float = 0.2
    w3: float = 0.2
    w4: float = 0.2
    w5: float = 0.2

    def __post_init__(self) -> None:
        ws = self.as_tuple()
        if any(not math.isfinite(w) or w < 0 for w in ws) or not any(w > 0 for w in ws):
            raise ContractError(f"weights must be finite, non-negative and not all zero: {ws}")

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.w1, self.w2, self.w3, self.w4, self.w5)

    @classmethod
    def of(cls, values: Sequence[float]) -> KnrsWeights:
        if len(values) != 5:
            raise ContractError("exactly five weights are required")
        return cls(*(float(v) for v in values))


@dataclass(slots=True)
class PopularitySignals:
    """Click and impression counts per news id over a recency window."""

    window_hours: float
    clicks: Mapping[str, int] = field(default_factory=dict)
    impressions: Mapping[str, int] = field(default_factory=dict)
    _aligned: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if not self.window_hours > 0:
            raise ContractError("window length must be > 0")

    def counts(self, news_id: str) -> tuple[int, int]:
        return self.clicks.get(news_id, 0), self.impressions.get(news_id, 0)

    def aligned(self, index: CatalogIndex) -> tuple[np.ndarray, np.ndarray]:
        key = id(index)
        if key not in self._aligned:
            c = np.array([self.clicks.get(n, 0) for n in index.ids], dtype=np.float64)
            i = np.array([self.impressions.get(n, 0) for n in index.ids], dtype=np.float64)
            self._aligned[key] = (c, i)
        return self._aligned[key]

    @classmethod
    def from_catalog(cls, catalog: Mapping[str, NewsItem], window_hours: float = 168.0) -> PopularitySignals:
        """Lifetime totals stored on the items (no windowing)."""
        return cls(
            window_hours,
            {n: it.click_count for n, it in catalog.items()},
            {n: it.impression_count for n, it in catalog.items()},
        )


class EventIndex:
    """Time-sorted click/impression events for windowed popularity queries."""

    def __init__(self, sequences: Iterable[InteractionSequence], index: CatalogIndex):
        times, rows, clicked = [], [], []
        for seq in sequences:
            for it in seq.items:
                row = index.row.get(it.news_id)
                if row is None:
                    continue
                times.append(it.timestamp)
                rows.append(row)
                clicked.append(it.clicked)
        order = np.argsort(np.asarray(times, dtype=np.float64), kind="stable")
        self.times = np.asarray(times, dtype=np.float64)[order]
        self.rows = np.asarray(rows, dtype=np.int64)[order]
        self.clicked = np.asarray(clicked, dtype=bool)[order]
        self.index = index

    def signals(self, now: float, window_hours: float) -> PopularitySignals:
        """Counts over events in ``[now - window, now)``; ``now`` itself is excluded."""
        lo = np.searchsorted(self.times, now - window_hours * 3600.0, side="left")
        hi = np.searchsorted(self.times, now, side="left")
        n = len(self.index.ids)
        rows = self.rows[lo:hi]
        imps = np.bincount(rows, minlength=n).astype(np.float64)
        clicks = np.bincount(rows[self.clicked[lo:hi]], minlength=n).astype(np.float64)
        signals = PopularitySignals(
            window_hours,
            _SparseCounts(self.index.ids, self.index.row, clicks),
            _SparseCounts(self.index.ids, self.index.row, imps),
        )
        signals._aligned[id(self.index)] = (clicks, imps)
        return signals


class _SparseCounts(Mapping):
    """Read-only id -> count view over an array aligned with a CatalogIndex."""

    def __init__(self, ids: Sequence[str], row: Mapping[str, int], counts: np.ndarray):
        self._ids = ids
        self._row = row
        self._counts = counts

    def __getitem__(self, key: str) -> int:
        return int(self._counts[self._row[key]])

    def __iter__(self):
        return iter(self._ids)

    def __len__(self) -> int:
        return len(self._ids)


def load_credibility(path=None) -> dict[str, float]:
    """Read a ``source<TAB>score`` table; ``None`` loads the bundled default."""
    if path is None:
        text = resources.files("cherryrec").joinpath("data/credibility.tsv").read_text("utf-8")
        where = "bundled credibility table"
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise DataError(f"cannot read credibility table {path}: {exc}") from exc
        where = str(path)
    table = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.split("\t")
        try:
            source, score = cols[0].strip(), float(cols[1])
        except (IndexError, ValueError):
            raise DataError(f"{where}:{line_no}: expected 'source<TAB>score'") from None
        if not 0.0 <= score <= 1.0:
            raise DataError(f"{where}:{line_no}: score {score} outside [0, 1]")
        table[source] = score
    return table


def user_tokens(profile: UserProfile, recent_history: Iterable[NewsItem]) -> frozenset[str]:
    return token_set(list(profile.domain_focus) + [h.title for h in recent_history])


def item_tokens(item: NewsItem) -> frozenset[str]:
    return token_set([item.category, item.subcategory or "", item.title])


def compute_value_features(
    user: UserProfile,
    item: NewsItem,
    signals: PopularitySignals,
    now: float,
    recent_history: Sequence[NewsItem],
    *,
    credibility: Mapping[str, float] | None = None,
    half_life_hours: float = 24.0,
    smoothing: float = 10.0,
) -> tuple[float, float, float, float, float]:
    """Scalar reference for the five value features of ``item`` for ``user``."""
    relevance = jaccard(user_tokens(user, recent_history), item_tokens(item))

    trust = (credibility or {}).get(item.source, UNKNOWN_SOURCE_CREDIBILITY)

    dt = now - item.publish_time
    if dt < 0:
        log.warning("%s published %ss after now; timeliness clamped to 1.0", item.id, -dt)
    timeliness = math.pow(2.0, -dt / (half_life_hours * 3600.0)) if dt > 0 else 1.0

    clicks, imps = signals.counts(item.id)
    denom = imps + smoothing
    attention = min(1.0, max(0.0, clicks / denom)) if denom > 0 else 0.0

    if recent_history:
        title = token_set([item.title])
        novelty = 1.0 - max(jaccard(title, token_set([h.title])) for h in recent_history)
    else:
        novelty = 1.0
    return (relevance, trust, timeliness, attention, novelty)


def value_score(features: Sequence[float], weights: KnrsWeights) -> float:
    """Weighted sum of the five features."""
    if len(features) != 5:
        raise ContractError("value_score expects five features")
    total = 0.0
    for w, f in zip(weights.as_tuple(), features):
        total += w * f
    return total


def survivor_count(n: int, keep_fraction: float) -> int:
    """ceil(keep_fraction * n), robust to binary rounding of the product."""
    if not 0.0 < keep_fraction <= 1.0:
        raise ContractError("keep_fraction must be in (0, 1]")
    return min(n, math.ceil(round(keep_fraction * n, 9)))


def _csr(sets: Sequence[Iterable[int]]) -> tuple[np.ndarray, np.ndarray]:
    indptr = np.zeros(len(sets) + 1, dtype=np.int64)
    chunks = []
    for i, s in enumerate(sets):
        arr = np.array(sorted(set(s)), dtype=np.int32)
        chunks.append(arr)
        indptr[i + 1] = indptr[i] + len(arr)
    indices = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int32)
    return indptr, indices.astype(np.int32)


class CatalogIndex:
    """Token and metadata arrays for a catalog; rows are in ascending id order."""

    def __init__(self, catalog: Mapping[str, NewsItem], credibility: Mapping[str, float] | None = None):
        self.catalog = catalog
        self.ids = sorted(catalog)
        self.row = {n: i for i, n in enumerate(self.ids)}
        items = [catalog[n] for n in self.ids]
        rel_tokens = [item_tokens(it) for it in items]
        title_tokens = [token_set([it.title]) for it in items]
        vocab: dict[str, int] = {}
        for toks in rel_tokens:
            for t in sorted(toks):
                vocab.setdefault(t, len(vocab))
        self.vocab = vocab
        self.rel_indptr, self.rel_indices = _csr([[vocab[t] for t in s] for s in rel_tokens])
        self.title_indptr, self.title_indices = _csr([[vocab[t] for t in s] for s in title_tokens])
        cred = credibility or {}
        self.credibility = np.array(
            [cred.get(it.source, UNKNOWN_SOURCE_CREDIBILITY) for it in items], dtype=np.float64
        )
        if any(it.publish_time is None for it in items):
            raise ContractError("every catalog item needs a publish time")
        self.publish_time = np.array([it.publish_time for it in items], dtype=np.float64)

    def rows_of(self, news_ids: Iterable[str]) -> np.ndarray:
        return np.array([self.row[n] for n in news_ids], dtype=np.int64)

    def query(self, tokens: frozenset[str]) -> tuple[np.ndarray, int]:
        ids = sorted(self.vocab[t] for t in tokens if t in self.vocab)
        return np.array(ids, dtype=np.int32), len(tokens)


FeatureFn = Callable[..., tuple[float, float, float, float, float]]


@dataclass(slots=True)
class KnrsSettings:
    weights: KnrsWeights = field(default_factory=KnrsWeights)
    half_life_hours: float = 24.0
    smoothing: float = 10.0
    keep_fraction: float = 0.05
    top_k: int = 20
    window_hours: float = 168.0
    history_cap: int = 20

    def __post_init__(self) -> None:
        if not self.half_life_hours > 0:
            raise ContractError("half_life_hours must be > 0")
        if self.smoothing < 0:
            raise ContractError("smoothing must be >= 0")
        survivor_count(1, self.keep_fraction)
        if self.top_k < 1:
            raise ContractError("top_k must be >= 1")


class KnowledgeSelector:
    """Scores a catalog for one user at a time and applies the two-stage cut.

    ``feature_fn`` replaces the built-in features; it receives the same
    arguments as :func:`compute_value_features` and disables the compiled scan.
    """

    def __init__(
        self,
        catalog: Mapping[str, NewsItem],
        settings: KnrsSettings | None = None,
        credibility: Mapping[str, float] | None = None,
        feature_fn: FeatureFn | None = None,
        index: CatalogIndex | None = None,
    ):
        self.settings = settings or KnrsSettings()
        self.credibility = dict(credibility or {})
        self.index = index or CatalogIndex(catalog, self.credibility)
        self.catalog = self.index.catalog
        self.feature_fn = feature_fn
        self._weights = np.array(self.settings.weights.as_tuple(), dtype=np.float64)

    def recent_history(self, profile: UserProfile) -> list[NewsItem]:
        clicked = [it.news_id for it in profile.clicked_history() if it.news_id in self.catalog]
        return [self.catalog[n] for n in clicked[-self.settings.history_cap:]]

    def score_rows(
        self,
        rows: np.ndarray,
        profile: UserProfile,
        now: float,
        signals: PopularitySignals,
        recent_history: Sequence[NewsItem],
    ) -> tuple[np.ndarray, np.ndarray]:
        """Feature matrix (len(rows) x 5) and values for catalog ``rows``."""
        s = self.settings
        rows = np.ascontiguousarray(rows, dtype=np.int64)
        feats = np.zeros((len(rows), 5), dtype=np.float64)
        values = np.zeros(len(rows), dtype=np.float64)
        if self.feature_fn is not None:
            for i, r in enumerate(rows.tolist()):
                f = self.feature_fn(
                    profile, self.catalog[self.index.ids[r]], signals, now, recent_history,
                    credibility=self.credibility, half_life_hours=s.half_life_hours, smoothing=s.smoothing,
                )
                feats[i] = f
                values[i] = value_score(f, s.weights)
            return feats, values
        query, qsize = self.index.query(user_tokens(profile, recent_history))
        hist_rows = self.index.rows_of(h.id for h in recent_history)
        clicks, imps = signals.aligned(self.index)
        kernels.score_rows(
            rows, self.index.rel_indptr, self.index.rel_indices,
            self.index.title_indptr, self.index.title_indices,
            query, qsize, hist_rows,
            self.index.credibility, self.index.publish_time, clicks, imps,
            float(now), s.half_life_hours * 3600.0, float(s.smoothing), self._weights,
            feats, values,
        )
        return feats, values

    def features_for(
        self,
        profile: UserProfile,
        news_ids: Sequence[str],
        now: float,
        signals: PopularitySignals,
        recent_history: Sequence[NewsItem] | None = None,
    ) -> tuple[np.ndarray, np.ndarray]:
        hist = self.recent_history(profile) if recent_history is None else recent_history
        return self.score_rows(self.index.rows_of(news_ids), profile, now, signals, hist)

    def select(
        self,
        profile: UserProfile,
        now: float,
        signals: PopularitySignals,
        recent_history: Sequence[NewsItem] | None = None,
        exclude: Iterable[str] = (),
    ) -> list[ScoredCandidate]:
        """Filter to the top ``keep_fraction`` by value, return the best ``top_k``.

        Items the user clicked, ids in ``exclude`` and items published after
        ``now`` are removed before scoring.
        """
        return self._ranked(profile, now, signals, recent_history, exclude, self.settings.top_k)

    def survivors(
        self,
        profile: UserProfile,
        now: float,
        signals: PopularitySignals,
        recent_history: Sequence[NewsItem] | None = None,
    ) -> list[str]:
        """Ids passing the keep_fraction filter, best first (before the top_k cut)."""
        return [c.news_id for c in self._ranked(profile, now, signals, recent_history, (), None)]

    def _ranked(self, profile, now, signals, recent_history, exclude, limit) -> list[ScoredCandidate]:
        s = self.settings
        hist = self.recent_history(profile) if recent_history is None else list(recent_history)
        banned = {it.news_id for it in profile.clicked_history()}
        banned.update(exclude)
        mask = self.index.publish_time <= now
        for n in banned:
            r = self.index.row.get(n)
            if r is not None:
                mask[r] = False
        rows = np.flatnonzero(mask).astype(np.int64)
        if len(rows) == 0:
            return []
        feats, values = self.score_rows(rows, profile, now, signals, hist)
        keep = survivor_count(len(rows), s.keep_fraction)
        if limit is not None:
            keep = min(keep, limit)
        # rows ascend by id, so a stable sort on -value breaks ties by id
        order = np.argsort(-values, kind="stable")[:keep]
        return [
            ScoredCandidate(
                self.index.ids[rows[i]],
                tuple(float(v) for v in feats[i]),
                float(values[i]),
            )
            for i in order.tolist()
        ]


def select_candidates(
    user: UserProfile,
    catalog: Mapping[str, NewsItem],
    signals: PopularitySignals,
    now: float,
    keep_fraction: float = 0.05,
    top_k: int = 20,
    *,
    weights: KnrsWeights | None = None,
    credibility: Mapping[str, float] | None = None,
    half_life_hours: float = 24.0,
    smoothing: float = 10.0,
    recent_history: Sequence[NewsItem] | None = None,
) -> list[ScoredCandidate]:
    """One-shot convenience wrapper around :class:`KnowledgeSelector`."""
    settings = KnrsSettings(
        weights=weights or KnrsWeights(),
        half_life_hours=half_life_hours,
        smoothing=smoothing,
        keep_fraction=keep_fraction,
        top_k=top_k,
        window_hours=signals.window_hours,
    )
    return KnowledgeSelector(catalog, settings, credibility).select(user, now, signals, recent_history)


__all__ = [
    "FEATURE_NAMES",
    "CatalogIndex",
    "EventIndex",
    "KnowledgeSelector",
    "KnrsSettings",
    "KnrsWeights",
    "PopularitySignals",
    "compute_value_features",
    "load_credibility",
    "select_candidates",
    "survivor_count",
    "value_score",
]
