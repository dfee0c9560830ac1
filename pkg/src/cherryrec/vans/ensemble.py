"""Standardization, weighted fusion of the three regressors, fusion-weight search, ranking."""

from __future__ import annotations

import json
import math
import os
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError, DataError
from ..evaluation import metrics_at_k
from .forest import RandomForest
from .poly import PolyModel, predict_poly
from .svr import LinearSVR

MODEL_FORMAT_VERSION = 1


@dataclass(slots=True)
class Standardizer:
    """Column means and population standard deviations from the training rows."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> Standardizer:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or len(x) < 1:
            raise ContractError("standardize needs at least one row")
        return cls(x.mean(axis=0), x.std(axis=0))

    def transform(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        safe = np.where(self.std > 0, self.std, 1.0)
        return np.where(self.std > 0, (x - self.mean) / safe, 0.0)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> Standardizer:
        return cls(np.array(d["mean"], dtype=np.float64), np.array(d["std"], dtype=np.float64))


def standardize(x: np.ndarray) -> tuple[np.ndarray, Standardizer]:
    """(x - mean) / std per column; zero-variance columns become 0."""
    scaler = Standardizer.fit(x)
    return scaler.transform(x), scaler


def check_fusion_weights(weights: Sequence[float]) -> tuple[float, float, float]:
    if len(weights) != 3:
        raise ContractError("fusion needs three weights")
    a, b, g = (float(w) for w in weights)
    if min(a, b, g) < 0 or not math.isclose(a + b + g, 1.0, abs_tol=1e-9):
        raise ContractError(f"fusion weights must be non-negative and sum to 1, got {(a, b, g)}")
    return a, b, g


def _fuse(weights, preds):
    """Weighted sum that skips zero weights, so (1, 0, 0) returns the first input untouched."""
    out = None
    for w, p in zip(weights, preds):
        if w == 0.0:
            continue
        term = p() if w == 1.0 else w * p()
        out = term if out is None else out + term
    return out


@dataclass(slots=True)
class EnsembleModel:
    poly: PolyModel
    forest: RandomForest
    svr: LinearSVR
    weights: tuple[float, float, float] = (1.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        self.weights = check_fusion_weights(self.weights)

    def predict(self, x_std: np.ndarray) -> np.ndarray:
        """CherryRec score for each row of already-standardized features."""
        x_std = np.asarray(x_std, dtype=np.float64)
        return _fuse(self.weights, (lambda: self.poly.predict(x_std),
                                    lambda: self.forest.predict(x_std),
                                    lambda: self.svr.predict(x_std)))

    def to_dict(self) -> dict:
        return {"weights": list(self.weights), "poly": self.poly.to_dict(),
                "forest": self.forest.to_dict(), "svr": self.svr.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> EnsembleModel:
        return cls(PolyModel.from_dict(d["poly"]), RandomForest.from_dict(d["forest"]),
                   LinearSVR.from_dict(d["svr"]), tuple(d["weights"]))


def ensemble_predict(model: EnsembleModel, x) -> float:
    """Fused score of one standardized feature vector."""
    x = np.asarray(x, dtype=np.float64)
    return _fuse(model.weights, (lambda: predict_poly(model.poly, x),
                                 lambda: float(model.forest.predict(x[None, :])[0]),
                                 lambda: float(model.svr.predict(x[None, :])[0])))


def fit_auxiliary(
    x: np.ndarray,
    y: np.ndarray,
    *,
    trees: int = 16,
    max_depth: int = 4,
    seed: int = 0,
    epsilon: float = 0.1,
    l2: float = 0.01,
    learning_rate: float = 0.001,
    epochs: int = 500,
    validation: tuple[np.ndarray, np.ndarray] | None = None,
    eval_every: int = 50,
    patience: int = 20,
) -> tuple[RandomForest, LinearSVR]:
    forest = RandomForest.fit(x, y, n_trees=trees, max_depth=max_depth, seed=seed)
    svr = LinearSVR.fit(x, y, epsilon=epsilon, l2=l2, learning_rate=learning_rate, epochs=epochs,
                        validation=validation, eval_every=eval_every, patience=patience)
    return forest, svr


def fusion_grid(step: int = 10) -> list[tuple[float, float, float]]:
    """Simplex points with spacing 1/step, largest poly weight first, then largest forest weight."""
    return [(i / step, j / step, (step - i - j) / step)
            for i in range(step, -1, -1) for j in range(step - i, -1, -1)]


def _group_ndcg(scores: np.ndarray, y: np.ndarray, groups: Sequence[np.ndarray], k: int) -> float:
    total, count = 0.0, 0
    for rows in groups:
        rows = np.asarray(rows, dtype=np.int64)
        clicked = rows[y[rows] == 1]
        for truth in clicked.tolist():
            pool = rows[(y[rows] != 1) | (rows == truth)]
            order = pool[np.argsort(-scores[pool], kind="stable")]
            total += metrics_at_k(order.tolist(), truth, k)[1]
            count += 1
    return total / count if count else 0.0


def select_fusion_weights(
    poly: PolyModel,
    forest: RandomForest,
    svr: LinearSVR,
    x_val: np.ndarray | None,
    y_val: np.ndarray | None,
    groups: Sequence[Iterable[int]] | None,
    k: int = 5,
) -> tuple[float, float, float]:
    """Grid-search the (poly, forest, svr) weights on the 0.1-spaced simplex by validation NDCG@k.

    ``groups`` lists row indices of ``x_val`` per impression, in tie-break
    order; rows labelled 1 are the relevant items. Ties go to the larger poly weight,
    then the larger forest weight. Without validation data the poly model alone is used.
    """
    if x_val is None or y_val is None or not groups or len(x_val) == 0:
        return (1.0, 0.0, 0.0)
    x_val = np.asarray(x_val, dtype=np.float64)
    y_val = np.asarray(y_val, dtype=np.float64)
    groups = [np.asarray(list(g), dtype=np.int64) for g in groups]
    preds = (poly.predict(x_val), forest.predict(x_val), svr.predict(x_val))
    best, best_score = (1.0, 0.0, 0.0), -math.inf
    for weights in fusion_grid():
        fused = _fuse(weights, tuple((lambda p=p: p) for p in preds))
        score = _group_ndcg(fused, y_val, groups, k)
        if score > best_score:
            best, best_score = weights, score
    return best


def order_by_score(scores: Mapping[str, float] | Iterable[tuple[str, float]]) -> list[str]:
    """Ids by descending score, ties by ascending id."""
    pairs = scores.items() if isinstance(scores, Mapping) else scores
    return [nid for nid, _ in sorted(pairs, key=lambda p: (-p[1], p[0]))]


def rank_candidates(model: EnsembleModel, news_ids: Sequence[str], x_std: np.ndarray) -> list[tuple[str, float]]:
    """The final sequence: (id, CherryRec score), best first, ties by id."""
    if len(news_ids) == 0:
        return []
    scores = model.predict(x_std)
    return sorted(zip(news_ids, (float(s) for s in scores)), key=lambda p: (-p[1], p[0]))


@dataclass(slots=True)
class VansModel:
    """Everything needed to score raw (five value features, cnle) rows: scaler, ensemble, provenance."""

    scaler: Standardizer
    ensemble: EnsembleModel
    feature_names: tuple[str, ...] = ()
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.ensemble.poly.n

    def score(self, raw: np.ndarray) -> np.ndarray:
        return self.ensemble.predict(self.scaler.transform(raw))

    def rank(self, news_ids: Sequence[str], raw: np.ndarray) -> list[tuple[str, float]]:
        if len(news_ids) == 0:
            return []
        return rank_candidates(self.ensemble, news_ids, self.scaler.transform(raw))

    def to_dict(self) -> dict:
        return {"format_version": MODEL_FORMAT_VERSION, "n": self.n,
                "feature_names": list(self.feature_names), "standardization": self.scaler.to_dict(),
                "ensemble": self.ensemble.to_dict(), "meta": self.meta}

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")

    @classmethod
    def load(cls, path: str | os.PathLike) -> VansModel:
        try:
            with open(path, encoding="utf-8") as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read model {path}: {exc}") from exc
        if d.get("format_version") != MODEL_FORMAT_VERSION:
            raise DataError(f"{path}: unsupported model format {d.get('format_version')!r}")
        return cls(Standardizer.from_dict(d["standardization"]), EnsembleModel.from_dict(d["ensemble"]),
                   tuple(d["feature_names"]), d.get("meta", {}))
