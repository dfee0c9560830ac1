"""Second-order polynomial regression (pairwise interactions) trained by gradient descent."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .. import kernels
from ..errors import ContractError, DivergenceError

log = logging.getLogger(__name__)


def n_terms(n: int) -> int:
    """Expanded length: intercept, n linear terms, n(n-1)/2 pairwise products."""
    return 1 + n + n * (n - 1) // 2


def expand_polynomial(x: np.ndarray) -> np.ndarray:
    """``[1, x_1..x_n, x_1x_2, x_1x_3, ..., x_{n-1}x_n]`` for a vector or each row of a matrix."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    m, n = x.shape
    if n < 1:
        raise ContractError("need at least one feature")
    out = np.empty((m, n_terms(n)), dtype=np.float64)
    out[:, 0] = 1.0
    out[:, 1 : n + 1] = x
    col = n + 1
    for i in range(n):
        for j in range(i + 1, n):
            out[:, col] = x[:, i] * x[:, j]
            col += 1
    return out[0] if single else out


@dataclass(slots=True)
class PolyModel:
    n: int
    coef: np.ndarray = None
    learning_rate: float = 0.001
    l2: float = 0.01
    epochs: int = 500
    epochs_run: int = 0
    history: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        if self.coef is None:
            self.coef = np.zeros(n_terms(self.n), dtype=np.float64)
        self.coef = np.asarray(self.coef, dtype=np.float64)
        if self.coef.shape != (n_terms(self.n),):
            raise ContractError(f"expected {n_terms(self.n)} coefficients for n={self.n}, got {self.coef.shape}")
        if not self.learning_rate > 0 or self.l2 < 0 or self.epochs < 0:
            raise ContractError("need learning_rate > 0, l2 >= 0, epochs >= 0")

    @property
    def intercept(self) -> float:
        return float(self.coef[0])

    @property
    def linear(self) -> np.ndarray:
        return self.coef[1 : self.n + 1]

    @property
    def interactions(self) -> np.ndarray:
        return self.coef[self.n + 1 :]

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.n:
            raise ContractError(f"expected an (m, {self.n}) matrix, got shape {x.shape}")
        return expand_polynomial(x) @ self.coef

    def to_dict(self) -> dict:
        return {"n": self.n, "coef": self.coef.tolist(), "learning_rate": self.learning_rate,
                "l2": self.l2, "epochs": self.epochs, "epochs_run": self.epochs_run}

    @classmethod
    def from_dict(cls, d: dict) -> PolyModel:
        return cls(d["n"], np.array(d["coef"], dtype=np.float64), d["learning_rate"], d["l2"],
                   d["epochs"], d.get("epochs_run", 0))


def predict_poly(model: PolyModel, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.n,):
        raise ContractError(f"expected {model.n} features, got shape {x.shape}")
    return float(expand_polynomial(x) @ model.coef)


def loss_and_grad(coef: np.ndarray, terms: np.ndarray, y: np.ndarray, l2: float) -> tuple[float, np.ndarray]:
    """L = sum (terms @ coef - y)^2 + l2 * sum(coef[1:]^2) and its gradient."""
    grad = np.empty_like(coef)
    loss = kernels.poly_loss_grad(
        np.ascontiguousarray(terms, dtype=np.float64), np.ascontiguousarray(coef, dtype=np.float64),
        np.ascontiguousarray(y, dtype=np.float64), float(l2), grad,
    )
    return float(loss), grad


def train_poly(
    model: PolyModel,
    x: np.ndarray,
    y: np.ndarray,
    validation: tuple[np.ndarray, np.ndarray] | None = None,
    *,
    eval_every: int = 50,
    patience: int = 20,
) -> PolyModel:
    """Full-batch gradient descent on the penalized squared loss.

    Each step moves by ``learning_rate / m`` times the gradient of L (the
    intercept is not penalized). With ``validation`` the squared error there is
    checked every ``eval_every`` epochs and after the last one; training stops
    after ``patience`` checks without improvement and the best checkpoint is
    returned.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.n or len(y) != len(x):
        raise ContractError(f"expected (m, {model.n}) features and m labels")
    if len(y) == 0:
        raise ContractError("no training rows")
    terms = np.ascontiguousarray(expand_polynomial(x))
    coef = model.coef.copy()
    step = model.learning_rate / len(y)
    grad = np.empty_like(coef)
    history: list[float] = []
    if validation is not None:
        phi_val = expand_polynomial(np.asarray(validation[0], dtype=np.float64))
        y_val = np.asarray(validation[1], dtype=np.float64)
    best_coef, best_val, stale = None, math.inf, 0
    epoch = 0
    for epoch in range(1, model.epochs + 1):
        loss = kernels.poly_loss_grad(terms, coef, y, model.l2, grad)
        if not math.isfinite(loss):
            raise DivergenceError(
                f"training loss became non-finite at epoch {epoch}; "
                f"try a learning rate below {model.learning_rate:g}"
            )
        history.append(loss)
        coef -= step * grad
        if not np.all(np.isfinite(coef)):
            raise DivergenceError(f"coefficients became non-finite at epoch {epoch}; lower the learning rate")
        if validation is not None and (epoch % eval_every == 0 or epoch == model.epochs):
            r = phi_val @ coef - y_val
            val = float(r @ r)
            if val < best_val:
                best_coef, best_val, stale = coef.copy(), val, 0
            else:
                stale += 1
                if stale >= patience:
                    log.info("early stop at epoch %d (best validation SSE %.6g)", epoch, best_val)
                    break
    return replace(model, coef=best_coef if best_coef is not None else coef, epochs_run=epoch, history=history)
