"""Greedy binary decision trees: a Gini-impurity classifier and a
squared-error regression tree (the boosting base learner).

Split search is exact: candidate thresholds are midpoints between consecutive
distinct sorted values per column, the chosen split maximizes the weighted
impurity decrease, and ties break toward the lower column index then the
lower threshold. Training is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class TreeNode:
    n_samples: int
    depth: int
    column: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    counts: tuple[int, int] | None = None  # classification leaves: (class0, class1)
    value: float | None = None             # leaf prediction

    @property
    def is_leaf(self) -> bool:
        return self.column is None


def gini_from_counts(neg: int, pos: int) -> float:
    n = neg + pos
    if n == 0:
        return 0.0
    return 1.0 - (pos * pos + neg * neg) / (n * n)


def _boundary_indices(xs: np.ndarray) -> np.ndarray:
    """Positions i where xs[i] != xs[i+1] in a sorted column."""
    return np.nonzero(xs[:-1] != xs[1:])[0]


def best_gini_split(X: np.ndarray, y: np.ndarray):
    """Exhaustive best (column, threshold) by Gini decrease; None if no split gains.

    Returns (column, threshold, gain). The gain formula matches an integer-count
    recomputation exactly, so independent brute force agrees bit for bit.
    """
    n = len(y)
    pos_total = int(y.sum())
    neg_total = n - pos_total
    parent = gini_from_counts(neg_total, pos_total)
    best = None  # (gain, col, thr)
    for col in range(X.shape[1]):
        order = np.argsort(X[:, col], kind="stable")
        xs = X[order, col]
        ys = y[order]
        cuts = _boundary_indices(xs)
        if cuts.size == 0:
            continue
        cum_pos = np.cumsum(ys)
        n_l = cuts + 1
        pos_l = cum_pos[cuts]
        neg_l = n_l - pos_l
        n_r = n - n_l
        pos_r = pos_total - pos_l
        neg_r = n_r - pos_r
        gini_l = 1.0 - (pos_l * pos_l + neg_l * neg_l) / (n_l * n_l)
        gini_r = 1.0 - (pos_r * pos_r + neg_r * neg_r) / (n_r * n_r)
        gains = parent - (n_l * gini_l + n_r * gini_r) / n
        thresholds = (xs[cuts] + xs[cuts + 1]) / 2.0
        for k in range(len(cuts)):  # ascending thresholds; strict > keeps the first max
            if best is None or gains[k] > best[0]:
                best = (float(gains[k]), col, float(thresholds[k]))
    if best is None or best[0] <= 0.0:
        return None
    return best[1], best[2], best[0]


def best_sse_split(X: np.ndarray, t: np.ndarray):
    """Best (column, threshold) by squared-error decrease on targets ``t``."""
    n = len(t)
    total = float(t.sum())
    total_sq = float((t * t).sum())
    parent = total_sq - total * total / n
    best = None
    for col in range(X.shape[1]):
        order = np.argsort(X[:, col], kind="stable")
        xs = X[order, col]
        ts = t[order]
        cuts = _boundary_indices(xs)
        if cuts.size == 0:
            continue
        cum = np.cumsum(ts)
        cum_sq = np.cumsum(ts * ts)
        n_l = cuts + 1
        sum_l = cum[cuts]
        sse_l = cum_sq[cuts] - sum_l * sum_l / n_l
        n_r = n - n_l
        sum_r = total - sum_l
        sse_r = (total_sq - cum_sq[cuts]) - sum_r * sum_r / n_r
        gains = parent - (sse_l + sse_r)
        thresholds = (xs[cuts] + xs[cuts + 1]) / 2.0
        for k in range(len(cuts)):
            if best is None or gains[k] > best[0]:
                best = (float(gains[k]), col, float(thresholds[k]))
    if best is None or best[0] <= 1e-12:
        return None
    return best[1], best[2], best[0]


@dataclass
class TreeModel:
    root: TreeNode
    max_depth: int
    min_samples_split: int
    n_columns: int
    n_training_rows: int
    feature_names: tuple[str, ...] = ()
    _gains: np.ndarray = field(default=None, repr=False)

    def importance_gains(self) -> np.ndarray:
        return self._gains.copy()


def train_dtree(X, y, max_depth: int, min_samples_split: int,
                feature_names: tuple[str, ...] = ()) -> TreeModel:
    """Grow a CART classifier. Stops on depth, node size, purity or zero gain."""
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    if min_samples_split < 2:
        raise ValueError("min_samples_split must be >= 2")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n, d = X.shape
    gains = np.zeros(d)

    def grow(rows: np.ndarray, depth: int) -> TreeNode:
        ys = y[rows]
        pos = int(ys.sum())
        neg = len(rows) - pos
        node = TreeNode(n_samples=len(rows), depth=depth, counts=(neg, pos),
                        value=pos / len(rows))
        if depth >= max_depth or len(rows) < min_samples_split or pos == 0 or neg == 0:
            return node
        found = best_gini_split(X[rows], ys)
        if found is None:
            return node
        col, thr, gain = found
        gains[col] += (len(rows) / n) * gain
        mask = X[rows, col] <= thr
        node.column, node.threshold = col, thr
        node.counts, node.value = None, None
        node.left = grow(rows[mask], depth + 1)
        node.right = grow(rows[~mask], depth + 1)
        return node

    root = grow(np.arange(n), 0)
    return TreeModel(root=root, max_depth=max_depth, min_samples_split=min_samples_split,
                     n_columns=d, n_training_rows=n,
                     feature_names=tuple(feature_names), _gains=gains)


def train_regression_tree(X, targets, weights, max_depth: int = 6,
                          min_samples_split: int = 2, eps: float = 1e-12):
    """Fit a regression tree on ``targets`` with leaf values
    sum(targets) / (sum(weights) + eps) per leaf (the second-order step used
    by boosting). Returns (root, per-column gain vector)."""
    X = np.asarray(X, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    n, d = X.shape
    gains = np.zeros(d)

    def grow(rows: np.ndarray, depth: int) -> TreeNode:
        node = TreeNode(n_samples=len(rows), depth=depth,
                        value=float(t[rows].sum() / (w[rows].sum() + eps)))
        if depth >= max_depth or len(rows) < min_samples_split:
            return node
        found = best_sse_split(X[rows], t[rows])
        if found is None:
            return node
        col, thr, gain = found
        gains[col] += (len(rows) / n) * gain
        mask = X[rows, col] <= thr
        node.column, node.threshold = col, thr
        node.value = None
        node.left = grow(rows[mask], depth + 1)
        node.right = grow(rows[~mask], depth + 1)
        return node

    root = grow(np.arange(n), 0)
    return root, gains


def tree_predict(root: TreeNode, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    out = np.empty(len(X), dtype=np.float64)
    for i, x in enumerate(X):
        node = root
        while not node.is_leaf:
            node = node.left if x[node.column] <= node.threshold else node.right
        out[i] = node.value
    return out


def _column_label(model: TreeModel, col: int) -> str:
    if model.feature_names and col < len(model.feature_names):
        return model.feature_names[col]
    return f"x{col}"


def export_tree(model: TreeModel, format: str = "text") -> str:
    """Deterministic rendering of the tree: ``text`` indented lines or a
    graphviz ``dot`` digraph."""
    if format == "text":
        lines = []

        def walk(node: TreeNode, indent: int):
            pad = "  " * indent
            if node.is_leaf:
                lines.append(f"{pad}leaf: p={node.value:.6f} counts={list(node.counts)} "
                             f"samples={node.n_samples}")
            else:
                lines.append(f"{pad}{_column_label(model, node.column)} <= {node.threshold:.6g} "
                             f"(samples={node.n_samples})")
                walk(node.left, indent + 1)
                walk(node.right, indent + 1)

        walk(model.root, 0)
        return "\n".join(lines) + "\n"
    if format == "dot":
        lines = ["digraph tree {", "  node [shape=box];"]
        counter = [0]

        def walk(node: TreeNode) -> int:
            nid = counter[0]
            counter[0] += 1
            if node.is_leaf:
                label = f"p={node.value:.4f}\\ncounts={list(node.counts)}\\nsamples={node.n_samples}"
            else:
                label = (f"{_column_label(model, node.column)} <= {node.threshold:.6g}"
                         f"\\nsamples={node.n_samples}")
            lines.append(f'  n{nid} [label="{label}"];')
            if not node.is_leaf:
                left_id = walk(node.left)
                right_id = walk(node.right)
                lines.append(f"  n{nid} -> n{left_id};")
                lines.append(f"  n{nid} -> n{right_id};")
            return nid

        walk(model.root)
        lines.append("}")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown export format {format!r}")
