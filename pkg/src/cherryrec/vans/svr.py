"""Linear epsilon-insensitive regression fitted by subgradient descent."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import DivergenceError


@dataclass(slots=True)
class LinearSVR:
    w: np.ndarray
    b: float = 0.0
    epsilon: float = 0.1

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) @ self.w + self.b

    @classmethod
    def fit(
        cls,
        x: np.ndarray,
        y: np.ndarray,
        *,
        epsilon: float = 0.1,
        l2: float = 0.01,
        learning_rate: float = 0.001,
        epochs: int = 500,
        validation: tuple[np.ndarray, np.ndarray] | None = None,
        eval_every: int = 50,
        patience: int = 20,
    ) -> LinearSVR:
        """Minimize sum(max(0, |x.w + b - y| - epsilon)) + l2 * |w|^2.

        Starts from zero and steps by ``learning_rate / m`` times the
        subgradient. Fewer than two rows, or a constant target, give the
        constant predictor mean(y).
        """
        x = np.ascontiguousarray(x, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.float64)
        m, n = x.shape
        w = np.zeros(n, dtype=np.float64)
        if m < 2 or y.min() == y.max():
            return cls(w, float(y.mean()) if m else 0.0, epsilon)
        b = 0.0
        grad_w = np.empty(n, dtype=np.float64)
        step = learning_rate / m
        best, best_val, stale = None, math.inf, 0
        for epoch in range(1, epochs + 1):
            loss, grad_b = kernels.svr_loss_grad(x, w, b, y, epsilon, l2, grad_w)
            if not math.isfinite(loss):
                raise DivergenceError(f"SVR loss became non-finite at epoch {epoch}; lower the learning rate")
            w -= step * grad_w
            b -= step * grad_b
            if validation is not None and (epoch % eval_every == 0 or epoch == epochs):
                r = np.abs(validation[0] @ w + b - validation[1]) - epsilon
                val = float(r[r > 0].sum())
                if val < best_val:
                    best, best_val, stale = (w.copy(), b), val, 0
                else:
                    stale += 1
                    if stale >= patience:
                        break
        if best is not None:
            w, b = best
        return cls(w, float(b), epsilon)

    def to_dict(self) -> dict:
        return {"w": self.w.tolist(), "b": self.b, "epsilon": self.epsilon}

    @classmethod
    def from_dict(cls, d: dict) -> LinearSVR:
        return cls(np.array(d["w"], dtype=np.float64), d["b"], d["epsilon"])
