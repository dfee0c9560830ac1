"""Bagged regression trees."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import kernels

MIN_GAIN = 1e-12


@dataclass(slots=True)
class RegressionTree:
    """Array-encoded binary tree; ``feature == -1`` marks a leaf."""

    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[float] = field(default_factory=list)

    def _add(self, value: float) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        return len(self.value) - 1

    @classmethod
    def constant(cls, value: float) -> RegressionTree:
        tree = cls()
        tree._add(value)
        return tree

    @classmethod
    def fit(cls, x: np.ndarray, y: np.ndarray, rows: np.ndarray, *, max_depth: int = 4,
            max_features: int | None = None, rng: np.random.Generator | None = None) -> RegressionTree:
        n = x.shape[1]
        k = n if max_features is None else max(1, min(n, max_features))
        tree = cls()
        stack = [(np.asarray(rows, dtype=np.int64), 0, None, False)]
        while stack:
            node_rows, depth, parent, is_right = stack.pop()
            ys = y[node_rows]
            node = tree._add(float(ys.mean()))
            if parent is not None:
                (tree.right if is_right else tree.left)[parent] = node
            if depth >= max_depth or len(node_rows) < 2 or ys.min() == ys.max():
                continue
            if k == n or rng is None:
                feats = np.arange(n, dtype=np.int64)
            else:
                feats = np.sort(rng.choice(n, size=k, replace=False)).astype(np.int64)
            f, thr, _ = kernels.best_split(x, y, node_rows, feats, MIN_GAIN)
            if f < 0:
                continue
            go_left = x[node_rows, f] <= thr
            tree.feature[node] = int(f)
            tree.threshold[node] = float(thr)
            # right pushed first so the left subtree gets the lower node ids
            stack.append((node_rows[~go_left], depth + 1, node, True))
            stack.append((node_rows[go_left], depth + 1, node, False))
        return tree

    @property
    def depth(self) -> int:
        def walk(i):
            return 0 if self.feature[i] < 0 else 1 + max(walk(self.left[i]), walk(self.right[i]))
        return walk(0)

    def predict(self, x: np.ndarray) -> np.ndarray:
        feature = np.asarray(self.feature)
        threshold = np.asarray(self.threshold)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        value = np.asarray(self.value)
        node = np.zeros(len(x), dtype=np.int64)
        idx = np.arange(len(x))
        while True:
            f = feature[node]
            inner = f >= 0
            if not inner.any():
                break
            fi = np.where(inner, f, 0)
            go_left = x[idx, fi] <= threshold[node]
            node = np.where(inner, np.where(go_left, left[node], right[node]), node)
        return value[node]

    def to_dict(self) -> dict:
        return {"feature": self.feature, "threshold": self.threshold, "left": self.left,
                "right": self.right, "value": self.value}

    @classmethod
    def from_dict(cls, d: dict) -> RegressionTree:
        return cls(list(d["feature"]), list(d["threshold"]), list(d["left"]), list(d["right"]), list(d["value"]))


@dataclass(slots=True)
class RandomForest:
    trees: list[RegressionTree] = field(default_factory=list)
    n_trees: int = 16
    max_depth: int = 4
    bootstrap: bool = True

    @classmethod
    def fit(cls, x: np.ndarray, y: np.ndarray, *, n_trees: int = 16, max_depth: int = 4,
            seed: int = 0, bootstrap: bool = True) -> RandomForest:
        """Each tree sees a bootstrap resample and ceil(sqrt(n)) random features per split."""
        x = np.ascontiguousarray(x, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.float64)
        m, n = x.shape
        forest = cls(n_trees=n_trees, max_depth=max_depth, bootstrap=bootstrap)
        if m < 2:
            const = float(y.mean()) if m else 0.0
            forest.trees = [RegressionTree.constant(const)]
            return forest
        rng = np.random.default_rng(seed)
        max_features = math.ceil(math.sqrt(n))
        for _ in range(n_trees):
            rows = rng.integers(0, m, size=m) if bootstrap else np.arange(m)
            forest.trees.append(
                RegressionTree.fit(x, y, np.sort(rows), max_depth=max_depth, max_features=max_features, rng=rng)
            )
        return forest

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        total = np.zeros(len(x), dtype=np.float64)
        for tree in self.trees:
            total += tree.predict(x)
        return total / len(self.trees)

    def to_dict(self) -> dict:
        return {"n_trees": self.n_trees, "max_depth": self.max_depth, "bootstrap": self.bootstrap,
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d: dict) -> RandomForest:
        return cls([RegressionTree.from_dict(t) for t in d["trees"]], d["n_trees"], d["max_depth"], d["bootstrap"])

