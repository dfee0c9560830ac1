"""End-to-end engine: candidate selection -> preference evaluation -> ensemble ranking.

Also builds the supervised training set from logged impressions, trains the
ranking model and runs the leave-one-out evaluation. Every query is answered
"as of" a point in a user's sequence: the profile only contains earlier events
and popularity counts only cover the window before ``now``.
"""

from __future__ import annotations

import json
import logging
import os
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .cnle import FallbackEvaluator, MockEvaluator, RemoteEvaluator, choose_task, render_prompt
from .cnle.protocol import MAX_CANDIDATES, EvaluationRequest
from .config import CnleConfig, EngineConfig
from .core import InteractionSequence, NewsItem, ScoredCandidate, UserProfile
from .errors import ContractError, DataError, EvaluatorError, NotFoundError, PipelineError
from .evaluation import EvalReport, EvalSplit, UserResult, effective_subset, leave_one_out_split
from .ingest import DatasetSnapshot, domain_focus
from .knrs import FEATURE_NAMES, EventIndex, KnowledgeSelector, PopularitySignals, load_credibility
from .vans import (
    EnsembleModel,
    PolyModel,
    Standardizer,
    VansModel,
    fit_auxiliary,
    select_fusion_weights,
    train_poly,
)

log = logging.getLogger(__name__)

MODEL_FEATURES = FEATURE_NAMES + ("cnle",)
MODEL_FILE = "vans_model.json"
REPORT_FILE = "train_report.json"
CONFIG_FILE = "engine_config.json"


def make_evaluator(cfg: CnleConfig):
    if cfg.evaluator == "mock":
        return MockEvaluator()
    remote = RemoteEvaluator(cfg.endpoint, timeout=cfg.timeout, retries=cfg.retries, concurrency=cfg.concurrency)
    return FallbackEvaluator(remote) if cfg.fallback_to_mock else remote


@dataclass(frozen=True, slots=True)
class QueryContext:
    profile: UserProfile
    now: float
    signals: PopularitySignals
    history: tuple[NewsItem, ...]


@dataclass(slots=True)
class _Job:
    """Candidates of one query whose feature rows are built together."""

    ctx: QueryContext
    news_ids: list[str]
    tag: str
    labels: list[float] = field(default_factory=list)


@dataclass(frozen=True, slots=True)
class Impression:
    impression_id: str
    start: int  # position of the first record in the sequence
    end: int  # position after the last record
    timestamp: int
    news_ids: tuple[str, ...]
    labels: tuple[float, ...]


def impressions_of(seq: InteractionSequence) -> list[Impression]:
    """Group a sequence's records by impression id, in order of first appearance."""
    groups: dict[str, list[int]] = {}
    for pos, it in enumerate(seq.items):
        if it.impression_id is not None:
            groups.setdefault(it.impression_id, []).append(pos)
    out = []
    for imp, positions in groups.items():
        seen: dict[str, float] = {}
        for p in positions:
            it = seq.items[p]
            seen[it.news_id] = max(seen.get(it.news_id, 0.0), 1.0 if it.clicked else 0.0)
        out.append(Impression(imp, positions[0], positions[-1] + 1, seq.items[positions[0]].timestamp,
                              tuple(seen), tuple(seen.values())))
    return out


def _position(seq: InteractionSequence, target) -> int:
    for pos, it in enumerate(seq.items):
        if it is target:
            return pos
    raise ContractError("interaction not found in its sequence")


class Engine:
    """Holds a snapshot plus the three stages; thread-safe for concurrent queries."""

    def __init__(
        self,
        snapshot: DatasetSnapshot,
        config: EngineConfig | None = None,
        model: VansModel | None = None,
        evaluator=None,
    ):
        self.snapshot = snapshot
        self.config = config or EngineConfig()
        credibility = load_credibility(self.config.knrs.credibility_table or None)
        self.selector = KnowledgeSelector(snapshot.catalog, self.config.knrs_settings(), credibility)
        self.events = EventIndex(snapshot.sequences.values(), self.selector.index)
        self.titles = {nid: item.title for nid, item in snapshot.catalog.items()}
        self.evaluator = evaluator if evaluator is not None else make_evaluator(self.config.cnle)
        self.model = model
        self.as_of = snapshot.as_of

    # --- query context ---------------------------------------------------------

    def context(self, user_id: str, upto: int | None = None, now: float | None = None) -> QueryContext:
        """Query state for ``user_id`` using only the first ``upto`` sequence records."""
        base = self.snapshot.profiles.get(user_id)
        if base is None:
            raise NotFoundError(f"unknown user {user_id!r}")
        profile = base
        if upto is not None:
            items = self.snapshot.sequences[user_id].items[:upto]
            clicked = [it.news_id for it in items if it.clicked]
            profile = replace(base, behavior_history=items, domain_focus=domain_focus(clicked, self.snapshot.catalog))
        now = self.as_of if now is None else now
        signals = self.events.signals(now, self.config.knrs.window_hours)
        return QueryContext(profile, now, signals, tuple(self.selector.recent_history(profile)))

    # --- stages --------------------------------------------------------------------

    def retrieve(self, ctx: QueryContext) -> list[ScoredCandidate]:
        try:
            return self.selector.select(ctx.profile, ctx.now, ctx.signals, ctx.history)
        except ContractError as exc:
            raise PipelineError("knrs", str(exc)) from exc

    def _requests(self, job: _Job) -> list[EvaluationRequest]:
        cfg = self.config
        task = choose_task(job.ctx.profile, cfg.cnle.prefer_collection)
        out = []
        for c, start in enumerate(range(0, len(job.news_ids), MAX_CANDIDATES)):
            chunk = job.news_ids[start:start + MAX_CANDIDATES]
            out.append(render_prompt(
                task, job.ctx.profile, [(n, self.titles[n]) for n in chunk], self.titles,
                request_id=f"{job.tag}.{c}", history_cap=cfg.history_cap, title_cap=cfg.title_token_cap,
            ))
        return out

    def feature_rows(self, jobs: Sequence[_Job]) -> np.ndarray:
        """Raw (relevance .. novelty, cnle) rows for every job's candidates, jobs concatenated."""
        blocks, requests, owners = [], [], []
        for j, job in enumerate(jobs):
            feats, _ = self.selector.features_for(job.ctx.profile, job.news_ids, job.ctx.now,
                                                  job.ctx.signals, job.ctx.history)
            blocks.append(np.hstack([feats, np.zeros((len(feats), 1))]))
            for req in self._requests(job):
                requests.append(req)
                owners.append(j)
        try:
            responses = self.evaluator.evaluate_many(requests)
        except EvaluatorError as exc:
            raise PipelineError("cnle", str(exc)) from exc
        for j, resp in zip(owners, responses):
            col = {n: i for i, n in enumerate(jobs[j].news_ids)}
            for nid, score in resp.scores:
                blocks[j][col[nid], 5] = score
        return np.vstack(blocks) if blocks else np.zeros((0, len(MODEL_FEATURES)))

    def _rank_jobs(self, jobs: Sequence[_Job], candidates: Sequence[list[ScoredCandidate]]) -> list[list[ScoredCandidate]]:
        if self.model is None:
            raise PipelineError("vans", "no trained model loaded")
        live = [j for j, job in enumerate(jobs) if job.news_ids]
        rows = self.feature_rows([jobs[j] for j in live])
        out: list[list[ScoredCandidate]] = [[] for _ in jobs]
        offset = 0
        for j in live:
            cands = candidates[j]
            raw = rows[offset:offset + len(cands)]
            offset += len(cands)
            try:
                scores = self.model.score(raw)
            except (ValueError, FloatingPointError) as exc:
                raise PipelineError("vans", str(exc)) from exc
            scored = [replace(c, cnle_score=float(r[5]), vans_prediction=float(s))
                      for c, r, s in zip(cands, raw, scores)]
            out[j] = sorted(scored, key=lambda c: (-c.vans_prediction, c.news_id))
        return out

    # --- serving -------------------------------------------------------------------

    def recommend(self, user_id: str, k: int = 10, now: float | None = None) -> list[ScoredCandidate]:
        """Top ``k`` items for ``user_id``, best first, with every stage's score filled in."""
        return self.recommend_many([user_id], k, now)[user_id]

    def recommend_many(self, user_ids: Sequence[str], k: int = 10, now: float | None = None) -> dict[str, list[ScoredCandidate]]:
        if k < 1:
            raise ContractError("k must be >= 1")
        jobs, candidates = [], []
        for uid in user_ids:
            ctx = self.context(uid, now=now)
            cands = self.retrieve(ctx)
            jobs.append(_Job(ctx, [c.news_id for c in cands], f"rec.{uid}"))
            candidates.append(cands)
        ranked = self._rank_jobs(jobs, candidates)
        return {uid: r[:k] for uid, r in zip(user_ids, ranked)}

    def close(self) -> None:
        self.evaluator.close()


# --- training ----------------------------------------------------------------------

@dataclass(slots=True)
class TrainResult:
    model: VansModel
    report: dict


def _history_cut(seq: InteractionSequence, target) -> tuple[int, Impression | None]:
    """Records visible before ``target``: everything ahead of its impression."""
    pos = _position(seq, target)
    if target.impression_id is None:
        return pos, None
    for imp in impressions_of(seq):
        if imp.impression_id == target.impression_id:
            return imp.start, imp
    return pos, None


def _impression_jobs(engine: Engine, split: EvalSplit) -> tuple[list[_Job], _Job | None]:
    seq = engine.snapshot.sequences[split.user_id]
    val_cut, val_imp = _history_cut(seq, split.validation)
    first_kept = _position(seq, split.train[0]) if split.train else 0
    train = []
    for imp in impressions_of(seq):
        if imp.end <= val_cut and imp.end > first_kept:
            ctx = engine.context(split.user_id, upto=imp.start, now=imp.timestamp)
            train.append(_Job(ctx, list(imp.news_ids), f"train.{split.user_id}.{imp.impression_id}", list(imp.labels)))
    val = None
    if val_imp is not None:
        ctx = engine.context(split.user_id, upto=val_imp.start, now=val_imp.timestamp)
        val = _Job(ctx, list(val_imp.news_ids), f"val.{split.user_id}.{val_imp.impression_id}", list(val_imp.labels))
    return train, val


def train(snapshot: DatasetSnapshot, config: EngineConfig | None = None, evaluator=None) -> TrainResult:
    """Fit the ranking model on logged impressions before each user's validation click."""
    config = config or EngineConfig()
    engine = Engine(snapshot, config, evaluator=evaluator)
    splits, excluded = leave_one_out_split(snapshot.sequences, config.eval.max_length)
    train_jobs, val_jobs = [], []
    for split in splits:
        t, v = _impression_jobs(engine, split)
        train_jobs.extend(t)
        if v is not None:
            val_jobs.append(v)
    if not train_jobs:
        raise DataError("no training impressions: need users with logged impressions before their last two clicks")
    x = engine.feature_rows(train_jobs)
    y = np.array([lab for job in train_jobs for lab in job.labels], dtype=np.float64)
    log.info("training rows: %d (%d positive) from %d impressions", len(y), int(y.sum()), len(train_jobs))

    scaler = Standardizer.fit(x)
    xs = scaler.transform(x)
    validation, groups, ndcg_groups = None, [], 0
    if val_jobs:
        xv = scaler.transform(engine.feature_rows(val_jobs))
        yv = np.array([lab for job in val_jobs for lab in job.labels], dtype=np.float64)
        validation = (xv, yv)
        offset = 0
        for job in val_jobs:
            order = sorted(range(len(job.news_ids)), key=lambda i: job.news_ids[i])
            groups.append(np.array([offset + i for i in order], dtype=np.int64))
            offset += len(job.news_ids)
        ndcg_groups = len(groups)
    else:
        log.warning("no validation impressions; fusion weights default to the polynomial model alone")

    v = config.vans
    poly = train_poly(
        PolyModel(n=len(MODEL_FEATURES), learning_rate=v.learning_rate, l2=v.l2, epochs=v.epochs),
        xs, y, validation, eval_every=v.eval_every, patience=v.patience,
    )
    forest, svr = fit_auxiliary(
        xs, y, trees=v.trees, max_depth=v.max_depth, seed=config.seed, epsilon=v.svr_epsilon,
        l2=v.l2, learning_rate=v.learning_rate, epochs=v.epochs, validation=validation,
        eval_every=v.eval_every, patience=v.patience,
    )
    weights = select_fusion_weights(poly, forest, svr, *(validation or (None, None)), groups, k=config.eval.k)
    report = {
        "users": len(splits),
        "excluded_users": excluded,
        "train_impressions": len(train_jobs),
        "train_rows": int(len(y)),
        "train_positives": int(y.sum()),
        "validation_impressions": ndcg_groups,
        "validation_rows": 0 if validation is None else int(len(validation[1])),
        "poly_epochs_run": poly.epochs_run,
        "fusion_weights": list(weights),
    }
    meta = {"config": config.to_dict(), "training": report}
    model = VansModel(scaler, EnsembleModel(poly, forest, svr, weights), MODEL_FEATURES, meta)
    engine.close()
    return TrainResult(model, report)


def save_models(result: TrainResult, directory: str | os.PathLike, config: EngineConfig) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    result.model.save(out / MODEL_FILE)
    for name, payload in ((REPORT_FILE, result.report), (CONFIG_FILE, config.to_dict())):
        with open(out / name, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return out


def load_models(directory: str | os.PathLike) -> tuple[VansModel, EngineConfig]:
    """The model and the config it was trained with."""
    root = Path(directory)
    model = VansModel.load(root / MODEL_FILE)
    try:
        with open(root / CONFIG_FILE, encoding="utf-8") as fh:
            config = EngineConfig.from_dict(json.load(fh))
    except FileNotFoundError:
        config = EngineConfig()
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read {root / CONFIG_FILE}: {exc}") from exc
    return model, config


# --- evaluation -----------------------------------------------------------------------

@dataclass(slots=True)
class EvalOutcome:
    report: EvalReport
    random_recall: float  # expected Recall@k of a uniformly random ranking of the eligible pool
    results: list[UserResult]

    def to_json(self) -> dict:
        out = self.report.to_json()
        out["random_baseline"] = {"recall": self.random_recall}
        return out


def evaluate(
    snapshot: DatasetSnapshot,
    model: VansModel,
    config: EngineConfig | None = None,
    evaluator=None,
    users: Iterable[str] | None = None,
) -> EvalOutcome:
    """Leave-one-out evaluation on each user's last click.

    The query is issued at the test click's time with the history that precedes
    its impression. A user whose test item is missed by candidate selection
    scores zero overall and is left out of the effective subset.
    """
    config = config or EngineConfig()
    engine = Engine(snapshot, config, model, evaluator)
    splits, excluded = leave_one_out_split(snapshot.sequences, config.eval.max_length)
    if users is not None:
        wanted = set(users)
        splits = [s for s in splits if s.user_id in wanted]
    k = config.eval.k
    jobs, candidates, random_total = [], [], 0.0
    for split in splits:
        seq = snapshot.sequences[split.user_id]
        cut, _ = _history_cut(seq, split.test)
        ctx = engine.context(split.user_id, upto=cut, now=split.test.timestamp)
        cands = engine.retrieve(ctx)
        jobs.append(_Job(ctx, [c.news_id for c in cands], f"eval.{split.user_id}"))
        candidates.append(cands)
        random_total += _random_recall(engine, ctx, split.test.news_id, k)
    ranked = engine._rank_jobs(jobs, candidates)
    results = [
        UserResult(split.user_id, split.test.news_id in job.news_ids, tuple(c.news_id for c in r), split.test.news_id)
        for split, job, r in zip(splits, jobs, ranked)
    ]
    engine.close()
    report = effective_subset(results, k=k, excluded=excluded)
    return EvalOutcome(report, random_total / len(splits) if splits else 0.0, results)


def _random_recall(engine: Engine, ctx: QueryContext, truth: str, k: int) -> float:
    """Expected Recall@k when the whole eligible pool is shuffled uniformly."""
    index = engine.selector.index
    eligible = index.publish_time <= ctx.now
    for it in ctx.profile.clicked_history():
        r = index.row.get(it.news_id)
        if r is not None:
            eligible[r] = False
    pool = int(eligible.sum())
    r = index.row.get(truth)
    if pool == 0 or r is None or not eligible[r]:
        return 0.0
    return min(k, pool) / pool
