"""Gradient-boosted trees on binary logistic loss.

Each round fits a depth-bounded regression tree to the residuals ``y - p``;
leaves take the second-order step ``sum(residuals) / sum(p * (1 - p))`` and the
ensemble updates ``F += learning_rate * tree``. The initial score is the
log-odds of the training base rate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .logreg import sigmoid
from .tree import TreeNode, train_regression_tree, tree_predict

DEFAULT_TREE_DEPTH = 6


@dataclass
class GbdtModel:
    trees: list[TreeNode]
    learning_rate: float
    n_estimators: int
    initial_log_odds: float
    max_tree_depth: int = DEFAULT_TREE_DEPTH
    n_columns: int = 0
    feature_names: tuple[str, ...] = ()
    _gains: np.ndarray = field(default=None, repr=False)

    def importance_gains(self) -> np.ndarray:
        return self._gains.copy()


def train_gbdt(X, y, n_estimators: int, learning_rate: float,
               max_tree_depth: int = DEFAULT_TREE_DEPTH,
               feature_names: tuple[str, ...] = ()) -> GbdtModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    if n < 2 or len(np.unique(y)) < 2:
        raise ValueError("training needs at least two rows with both classes present")
    base = float(y.mean())
    f0 = float(np.log(base / (1.0 - base)))
    scores = np.full(n, f0)
    trees: list[TreeNode] = []
    gains = np.zeros(d)
    for _ in range(n_estimators):
        p = sigmoid(scores)
        residuals = y - p
        hess = p * (1.0 - p)
        root, tree_gains = train_regression_tree(X, residuals, hess,
                                                 max_depth=max_tree_depth)
        gains += tree_gains
        trees.append(root)
        scores = scores + learning_rate * tree_predict(root, X)
    return GbdtModel(trees=trees, learning_rate=learning_rate, n_estimators=n_estimators,
                     initial_log_odds=f0, max_tree_depth=max_tree_depth, n_columns=d,
                     feature_names=tuple(feature_names), _gains=gains)


def gbdt_raw_scores(model: GbdtModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if model.n_columns and X.shape[1] != model.n_columns:
        raise ValueError(f"expected {model.n_columns} columns, got {X.shape[1]}")
    scores = np.full(len(X), model.initial_log_odds)
    for root in model.trees:
        scores = scores + model.learning_rate * tree_predict(root, X)
    return scores


def gbdt_predict_proba(model: GbdtModel, X: np.ndarray) -> np.ndarray:
    return sigmoid(gbdt_raw_scores(model, X))


def log_loss(y: np.ndarray, p: np.ndarray, eps: float = 1e-12) -> float:
    p = np.clip(np.asarray(p, dtype=np.float64), eps, 1.0 - eps)
    y = np.asarray(y, dtype=np.float64)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))
