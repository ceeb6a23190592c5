"""Validation-accuracy grid search over the fixed hyperparameter grids.

Candidates are visited from most regularized to least (smaller C, smaller
depth, larger min split, fewer trees, smaller learning rate) and only a
strictly better validation accuracy displaces the incumbent, so ties resolve
toward stronger regularization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gbdt import gbdt_predict_proba, train_gbdt
from .logreg import logreg_predict_proba, train_logreg
from .tree import train_dtree, tree_predict

LOGREG_C_GRID = (0.001, 0.01, 0.1, 1.0, 10.0, 100.0)
DTREE_DEPTH_GRID = (3, 4, 5)
DTREE_MIN_SPLIT_GRID = (2, 3, 4, 5, 7, 10)
GBDT_N_GRID = (50, 100, 200)
GBDT_LR_GRID = (0.01, 0.1, 0.3)

FAMILIES = ("logreg", "dtree", "gbdt")


@dataclass
class GridPoint:
    params: dict
    val_accuracy: float


@dataclass
class GridSearchResult:
    family: str
    model: object
    params: dict
    val_accuracy: float
    report: list[GridPoint]


def _accuracy(y: np.ndarray, scores: np.ndarray) -> float:
    return float(np.mean((scores >= 0.5).astype(np.int64) == y))


def _candidates(family: str):
    if family == "logreg":
        return [{"C": c} for c in LOGREG_C_GRID]
    if family == "dtree":
        return [{"max_depth": depth, "min_samples_split": ms}
                for depth in DTREE_DEPTH_GRID
                for ms in sorted(DTREE_MIN_SPLIT_GRID, reverse=True)]
    if family == "gbdt":
        return [{"n_estimators": n, "learning_rate": lr}
                for n in GBDT_N_GRID for lr in GBDT_LR_GRID]
    raise ValueError(f"unknown model family {family!r}; expected one of {FAMILIES}")


def _train(family: str, params: dict, X, y, feature_names):
    if family == "logreg":
        return train_logreg(X, y, feature_names=feature_names, **params)
    if family == "dtree":
        return train_dtree(X, y, feature_names=feature_names, **params)
    return train_gbdt(X, y, feature_names=feature_names, **params)


def _score(family: str, model, X) -> np.ndarray:
    if family == "logreg":
        return logreg_predict_proba(model, X)
    if family == "dtree":
        return tree_predict(model.root, X)
    return gbdt_predict_proba(model, X)


def grid_search(family: str, X_train, y_train, X_val, y_val,
                feature_names: tuple[str, ...] = ()) -> GridSearchResult:
    """Train every grid point on the training split and keep the candidate
    with the best validation accuracy."""
    X_train = np.asarray(X_train, dtype=np.float64)
    X_val = np.asarray(X_val, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.int64)
    y_val = np.asarray(y_val, dtype=np.int64)
    best = None
    report: list[GridPoint] = []
    for params in _candidates(family):
        model = _train(family, params, X_train, y_train, feature_names)
        acc = _accuracy(y_val, _score(family, model, X_val))
        report.append(GridPoint(params=dict(params), val_accuracy=acc))
        if best is None or acc > best[0]:
            best = (acc, model, params)
    acc, model, params = best
    return GridSearchResult(family=family, model=model, params=dict(params),
                            val_accuracy=acc, report=report)
