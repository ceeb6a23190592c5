"""Interpretable tabular classifiers built from scratch: L2 logistic
regression, a Gini CART tree, and gradient-boosted trees, plus grid search,
feature importances and JSON persistence."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gbdt import GbdtModel, gbdt_predict_proba, log_loss, train_gbdt
from .logreg import LogRegModel, logreg_predict_proba, sigmoid, train_logreg
from .persist import ModelArtifact, PersistError, load_model, predict_proba, save_model
from .search import (FAMILIES, GridSearchResult, grid_search, LOGREG_C_GRID,
                     DTREE_DEPTH_GRID, DTREE_MIN_SPLIT_GRID, GBDT_N_GRID, GBDT_LR_GRID)
from .tree import TreeModel, TreeNode, best_gini_split, export_tree, train_dtree, tree_predict


@dataclass(frozen=True)
class ImportanceVector:
    """Per-column importance scores aligned with encoded column names.

    Tree and boosted models report accumulated impurity decrease per column,
    normalized to sum to one; logistic regression reports its signed weights.
    """

    names: tuple[str, ...]
    scores: np.ndarray


def feature_importances(model) -> ImportanceVector:
    return feature_importances_named(model, getattr(model, "feature_names", ()))


def feature_importances_named(model, names) -> ImportanceVector:
    if isinstance(model, LogRegModel):
        scores = model.weights.copy()
    elif isinstance(model, (TreeModel, GbdtModel)):
        gains = model.importance_gains()
        total = gains.sum()
        scores = gains / total if total > 0 else gains
    else:
        raise TypeError(f"unknown model type {type(model).__name__}")
    names = tuple(names) if names else tuple(f"x{i}" for i in range(len(scores)))
    if len(names) != len(scores):
        raise ValueError("column names do not match the importance vector length")
    return ImportanceVector(names=names, scores=scores)


def artifact_importances(artifact: ModelArtifact) -> ImportanceVector:
    return feature_importances_named(artifact.model, artifact.column_names)


__all__ = [
    "FAMILIES", "GbdtModel", "GridSearchResult", "ImportanceVector", "LogRegModel",
    "ModelArtifact", "PersistError", "TreeModel", "TreeNode",
    "artifact_importances", "best_gini_split", "export_tree", "feature_importances",
    "feature_importances_named", "gbdt_predict_proba", "grid_search", "load_model",
    "log_loss", "logreg_predict_proba", "predict_proba", "save_model", "sigmoid",
    "train_dtree", "train_gbdt", "train_logreg", "tree_predict",
    "LOGREG_C_GRID", "DTREE_DEPTH_GRID", "DTREE_MIN_SPLIT_GRID", "GBDT_N_GRID", "GBDT_LR_GRID",
]
