"""Value-aware scoring: polynomial regression + forest + linear SVR, fused and ranked."""

from .ensemble import (
    EnsembleModel,
    Standardizer,
    VansModel,
    check_fusion_weights,
    ensemble_predict,
    fit_auxiliary,
    fusion_grid,
    order_by_score,
    rank_candidates,
    select_fusion_weights,
    standardize,
)
from .forest import RandomForest, RegressionTree
from .poly import PolyModel, expand_polynomial, loss_and_grad, n_terms, predict_poly, train_poly
from .svr import LinearSVR

__all__ = [
    "EnsembleModel",
    "LinearSVR",
    "PolyModel",
    "RandomForest",
    "RegressionTree",
    "Standardizer",
    "VansModel",
    "check_fusion_weights",
    "ensemble_predict",
    "expand_polynomial",
    "fit_auxiliary",
    "fusion_grid",
    "loss_and_grad",
    "n_terms",
    "order_by_score",
    "predict_poly",
    "rank_candidates",
    "select_fusion_weights",
    "standardize",
    "train_poly",
]
