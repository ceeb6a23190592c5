"""Evaluation: extraction quality against ground truth, binary classification
metrics, and fidelity between models trained on ground-truth versus extracted
tables. Report rendering is deterministic (text, JSON, CSV).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .dataset import TabularDataset
from .models import ImportanceVector, predict_proba
from .schema import MISSING

REAL_MATCH_RTOL = 1e-9


class EvalError(ValueError):
    pass


@dataclass
class ExtractionReport:
    record_accuracy: float
    cell_accuracy: float
    missing_precision: float | None
    missing_recall: float | None
    vorc_call_rate: float | None
    n_evaluated: int


@dataclass
class ClassificationReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    auc: float | None
    auc_note: str | None = None


@dataclass
class FidelityReport:
    acc_d: float
    auc_d: float
    r2: float | None


def cells_match(spec, a, b) -> bool:
    """Cell equality: Missing only matches Missing; reals compare with a
    relative tolerance, everything else exactly."""
    if a is MISSING or b is MISSING:
        return a is MISSING and b is MISSING
    if spec.kind == "real":
        fa, fb = float(a), float(b)
        return abs(fa - fb) <= REAL_MATCH_RTOL * max(abs(fa), abs(fb), 1.0)
    return a == b


def extraction_metrics(extracted: TabularDataset, truth: TabularDataset,
                       provenance: list[dict] | None = None) -> ExtractionReport:
    """Compare an extracted table against ground truth row by row.

    Extracted ids must all exist in the truth table (rows that failed
    extraction may be absent from the extracted table; they simply are not
    evaluated). Missing-value precision/recall treat "cell is missing" as the
    positive class and come back as None when their denominator is zero.
    """
    if extracted.schema.m != truth.schema.m:
        raise EvalError("extracted and truth tables use different schemas")
    truth_by_id = {rid: row for rid, row in zip(truth.ids, truth.rows)}
    unknown = [rid for rid in extracted.ids if rid not in truth_by_id]
    if unknown:
        raise EvalError(f"extracted ids not present in truth table: {unknown[:5]}")

    features = truth.schema.features
    n_rows = extracted.n
    exact_rows = 0
    matched_cells = 0
    both_missing = 0
    extracted_missing = 0
    truth_missing = 0
    for rid, row in zip(extracted.ids, extracted.rows):
        truth_row = truth_by_id[rid]
        row_exact = True
        for spec in features:
            a = row[spec.name]
            b = truth_row[spec.name]
            if a is MISSING:
                extracted_missing += 1
            if b is MISSING:
                truth_missing += 1
            if a is MISSING and b is MISSING:
                both_missing += 1
            if cells_match(spec, a, b):
                matched_cells += 1
            else:
                row_exact = False
        exact_rows += row_exact

    total_cells = n_rows * len(features)
    call_rate = None
    if provenance is not None and provenance:
        called = sum(1 for entry in provenance if entry.get("vorc_iterations", 0) >= 1)
        call_rate = called / len(provenance)
    return ExtractionReport(
        record_accuracy=exact_rows / n_rows if n_rows else 0.0,
        cell_accuracy=matched_cells / total_cells if total_cells else 0.0,
        missing_precision=both_missing / extracted_missing if extracted_missing else None,
        missing_recall=both_missing / truth_missing if truth_missing else None,
        vorc_call_rate=call_rate,
        n_evaluated=n_rows,
    )


def auc_score(y_true, scores) -> float:
    """Rank-based AUC with ties credited 0.5, equal to brute-force pairwise
    comparison: midranks make the two formulations identical."""
    y = np.asarray(y_true, dtype=np.int64)
    s = np.asarray(scores, dtype=np.float64)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise EvalError("AUC needs both classes present")
    order = np.argsort(s, kind="stable")
    ranks = np.empty(len(s), dtype=np.float64)
    sorted_scores = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        midrank = (i + j) / 2.0 + 1.0
        ranks[order[i:j + 1]] = midrank
        i = j + 1
    rank_sum_pos = float(ranks[y == 1].sum())
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def classification_metrics(y_true, scores, threshold: float = 0.5) -> ClassificationReport:
    """Accuracy, positive-class precision/recall/F1 at the threshold, and AUC.

    AUC is None (with a note) when only one class is present. Precision with
    no predicted positives, and F1 with precision+recall both zero, are 0.
    """
    y = np.asarray(y_true, dtype=np.int64)
    s = np.asarray(scores, dtype=np.float64)
    if len(y) != len(s) or len(y) == 0:
        raise EvalError("y_true and scores must be nonempty and equally long")
    pred = (s >= threshold).astype(np.int64)
    tp = int(np.sum((pred == 1) & (y == 1)))
    fp = int(np.sum((pred == 1) & (y == 0)))
    fn = int(np.sum((pred == 0) & (y == 1)))
    accuracy = float(np.mean(pred == y))
    precision = tp / (tp + fp) if (tp + fp) else 0.0
    recall = tp / (tp + fn) if (tp + fn) else 0.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    try:
        auc = auc_score(y, s)
        note = None
    except EvalError as e:
        auc, note = None, str(e)
    return ClassificationReport(accuracy=accuracy, precision=precision, recall=recall,
                                f1=f1, auc=auc, auc_note=note)


def importance_r2(reference: ImportanceVector, other: ImportanceVector) -> float | None:
    """Coefficient of determination of ``other`` against the reference vector
    (the ground-truth model's importances); None when the reference has zero
    variance."""
    if reference.names != other.names:
        raise EvalError("importance vectors are not aligned on the same columns")
    ref = np.asarray(reference.scores, dtype=np.float64)
    oth = np.asarray(other.scores, dtype=np.float64)
    ss_tot = float(np.sum((ref - ref.mean()) ** 2))
    if ss_tot == 0.0:
        return None
    ss_res = float(np.sum((ref - oth) ** 2))
    return 1.0 - ss_res / ss_tot


def fidelity(model_gt, model_ext, X_test_gt, X_test_ext, y_test,
             importances_gt: ImportanceVector, importances_ext: ImportanceVector) -> FidelityReport:
    """Compare a ground-truth-trained and an extraction-trained model of the
    same family: each predicts on its own pipeline's test matrix over the same
    rows, and importances are compared by R^2 against the ground-truth vector."""
    if type(model_gt) is not type(model_ext):
        raise EvalError("fidelity compares two models of the same family")
    y = np.asarray(y_test, dtype=np.int64)
    scores_gt = predict_proba(model_gt, X_test_gt)
    scores_ext = predict_proba(model_ext, X_test_ext)
    m_gt = classification_metrics(y, scores_gt)
    m_ext = classification_metrics(y, scores_ext)
    auc_d = abs(m_gt.auc - m_ext.auc) if m_gt.auc is not None and m_ext.auc is not None else 0.0
    return FidelityReport(
        acc_d=abs(m_gt.accuracy - m_ext.accuracy),
        auc_d=auc_d,
        r2=importance_r2(importances_gt, importances_ext),
    )


def render_report(reports: dict, format: str = "text") -> str:
    """Render named reports deterministically.

    ``reports`` maps a section name to a report dataclass (or a plain dict).
    JSON output is versioned; CSV emits one ``section,metric,value`` row per
    metric, sections and fields in input order.
    """
    items = [(name, asdict(r) if not isinstance(r, dict) else dict(r))
             for name, r in reports.items()]
    if format == "json":
        return json.dumps({"report_version": 1, "sections": dict(items)},
                          indent=2, sort_keys=False) + "\n"
    if format == "csv":
        lines = ["section,metric,value"]
        for name, fields in items:
            for key, value in fields.items():
                lines.append(f"{name},{key},{_fmt(value)}")
        return "\n".join(lines) + "\n"
    if format == "text":
        lines = []
        for name, fields in items:
            lines.append(f"[{name}]")
            for key, value in fields.items():
                lines.append(f"  {key} = {_fmt(value)}")
        return "\n".join(lines) + "\n"
    raise EvalError(f"unknown report format {format!r}")


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)
