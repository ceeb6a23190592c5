import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import brute_force_auc, cat_feature, int_feature, real_feature

from medtab.dataset import TabularDataset
from medtab.evalkit import (ClassificationReport, EvalError, auc_score,
                            classification_metrics, extraction_metrics, fidelity,
                            importance_r2, render_report)
from medtab.models import ImportanceVector, train_logreg
from medtab.schema import MISSING, ExtractionSchema


def metrics_schema():
    return ExtractionSchema(
        features=(int_feature("a"), real_feature("b"), cat_feature("c", ["x", "y"]),
                  int_feature("d")),
        name="metrics",
    )


def table(rows, ids=None):
    schema = metrics_schema()
    return TabularDataset(schema=schema, rows=rows,
                          ids=ids or [f"r{i}" for i in range(len(rows))])


class TestExtractionMetrics:
    def truth_rows(self):
        return [
            {"a": 1, "b": 1.5, "c": "x", "d": 7},
            {"a": 2, "b": 2.5, "c": "y", "d": 8},
            {"a": 3, "b": 3.5, "c": "x", "d": 9},
            {"a": 4, "b": MISSING, "c": "y", "d": 10},
            {"a": 5, "b": 5.5, "c": "x", "d": MISSING},
        ]

    def test_closed_form_fixture(self):
        """Five rows, four features = 20 cells. Extracted matches rows 0-2
        exactly; row 3 hallucinates b (truth Missing, extracted 9.9); row 4
        drops a (extracted Missing) and misses d (truth Missing, matched).

        record_accuracy: rows 0,1,2 exact = 3/5 = 0.6
        cell mismatches: row3.b, row4.a -> cell_accuracy = 18/20 = 0.9
        missing cells: truth {row3.b, row4.d}; extracted {row4.a, row4.d}
        both-missing {row4.d}: precision 1/2, recall 1/2
        """
        extracted_rows = [dict(r) for r in self.truth_rows()]
        extracted_rows[3]["b"] = 9.9
        extracted_rows[4]["a"] = MISSING
        report = extraction_metrics(table(extracted_rows), table(self.truth_rows()))
        assert report.record_accuracy == 0.6
        assert report.cell_accuracy == 18 / 20
        assert report.missing_precision == 0.5
        assert report.missing_recall == 0.5
        assert report.n_evaluated == 5

    def test_self_comparison_is_perfect(self):
        t = table(self.truth_rows())
        report = extraction_metrics(t, t)
        assert report.record_accuracy == 1.0
        assert report.cell_accuracy == 1.0
        assert report.missing_precision == 1.0
        assert report.missing_recall == 1.0

    def test_no_missing_anywhere_yields_null_metrics(self):
        rows = [{"a": 1, "b": 2.0, "c": "x", "d": 3}]
        report = extraction_metrics(table(rows), table(rows))
        assert report.missing_precision is None
        assert report.missing_recall is None

    def test_hallucination_counts_against_recall(self):
        truth = [{"a": 1, "b": MISSING, "c": "x", "d": 2}]
        extracted = [{"a": 1, "b": 3.3, "c": "x", "d": 2}]
        report = extraction_metrics(table(extracted), table(truth))
        assert report.missing_recall == 0.0
        assert report.missing_precision is None  # nothing extracted as missing

    def test_record_accuracy_le_cell_accuracy(self):
        truth = self.truth_rows()
        extracted = [dict(r) for r in truth]
        extracted[0]["a"] = 99
        report = extraction_metrics(table(extracted), table(truth))
        assert report.record_accuracy <= report.cell_accuracy

    def test_real_cells_compare_with_tolerance(self):
        truth = [{"a": 1, "b": 0.1 + 0.2, "c": "x", "d": 1}]
        extracted = [{"a": 1, "b": 0.3, "c": "x", "d": 1}]
        report = extraction_metrics(table(extracted), table(truth))
        assert report.record_accuracy == 1.0

    def test_unknown_extracted_id_rejected(self):
        truth = table(self.truth_rows())
        extr = table(self.truth_rows(), ids=[f"z{i}" for i in range(5)])
        with pytest.raises(EvalError, match="ids"):
            extraction_metrics(extr, truth)

    def test_extracted_subset_is_allowed(self):
        truth = table(self.truth_rows())
        extr = table(self.truth_rows()[:3])
        report = extraction_metrics(extr, truth)
        assert report.n_evaluated == 3

    def test_vorc_call_rate_from_provenance(self):
        t = table(self.truth_rows())
        provenance = [{"id": f"r{i}", "vorc_iterations": 1 if i < 2 else 0,
                       "repairs": [], "status": "ok"} for i in range(5)]
        report = extraction_metrics(t, t, provenance)
        assert report.vorc_call_rate == pytest.approx(0.4)


class TestClassificationMetrics:
    def test_perfect_ranking(self):
        report = classification_metrics([1, 1, 0, 0], [0.9, 0.8, 0.3, 0.2])
        assert report.auc == 1.0
        assert report.accuracy == 1.0

    def test_auc_075_from_pairwise_oracle(self):
        y = [1, 0, 1, 0]
        s = [0.9, 0.8, 0.3, 0.2]
        assert brute_force_auc(y, s) == 0.75
        assert classification_metrics(y, s).auc == 0.75

    def test_all_positive_predictions(self):
        y = [1, 0, 1, 0, 0]
        report = classification_metrics(y, [0.9, 0.9, 0.9, 0.9, 0.9])
        assert report.recall == 1.0
        assert report.precision == pytest.approx(2 / 5)

    def test_f1_is_harmonic_mean(self):
        report = classification_metrics([1, 1, 0, 0], [0.9, 0.2, 0.8, 0.1])
        p, r = report.precision, report.recall
        assert report.f1 == pytest.approx(2 * p * r / (p + r))

    def test_single_class_auc_is_none_with_note(self):
        report = classification_metrics([1, 1, 1], [0.5, 0.6, 0.7])
        assert report.auc is None
        assert "both classes" in report.auc_note

    def test_empty_rejected(self):
        with pytest.raises(EvalError):
            classification_metrics([], [])

    def test_auc_matches_brute_force_with_ties(self):
        rng = np.random.default_rng(99)
        for _ in range(50):
            n = int(rng.integers(2, 51))
            y = rng.integers(0, 2, n)
            if y.min() == y.max():
                continue
            scores = rng.integers(0, 5, n) / 4.0  # coarse grid forces ties
            assert abs(auc_score(y, scores) - brute_force_auc(y, scores)) < 1e-12

    @given(st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_auc_invariant_under_monotone_transform(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 40))
        y = rng.integers(0, 2, n)
        if y.min() == y.max():
            return
        s = rng.integers(0, 6, n) / 5.0
        transformed = np.exp(3.0 * s) + 1.0
        assert auc_score(y, s) == pytest.approx(auc_score(y, transformed), abs=1e-12)


class TestFidelity:
    def setup_models(self):
        rng = np.random.default_rng(21)
        X = rng.normal(size=(60, 4))
        y = (X[:, 0] + 0.2 * rng.normal(size=60) > 0).astype(np.int64)
        model = train_logreg(X[:40], y[:40].astype(float), C=1.0,
                             feature_names=("a", "b", "c", "d"))
        return model, X[40:], y[40:]

    def test_self_comparison(self):
        model, X_test, y_test = self.setup_models()
        from medtab.models import feature_importances
        iv = feature_importances(model)
        report = fidelity(model, model, X_test, X_test, y_test, iv, iv)
        assert report.acc_d == 0.0
        assert report.auc_d == 0.0
        assert report.r2 == 1.0

    def test_constant_reference_importances_give_null_r2(self):
        ones = ImportanceVector(names=("a", "b"), scores=np.array([0.5, 0.5]))
        other = ImportanceVector(names=("a", "b"), scores=np.array([0.2, 0.8]))
        assert importance_r2(ones, other) is None

    def test_r2_self_is_one(self):
        v = ImportanceVector(names=("a", "b", "c"), scores=np.array([0.5, -1.0, 2.0]))
        assert importance_r2(v, v) == 1.0

    def test_misaligned_importances_rejected(self):
        a = ImportanceVector(names=("a", "b"), scores=np.zeros(2))
        b = ImportanceVector(names=("b", "a"), scores=np.zeros(2))
        with pytest.raises(EvalError):
            importance_r2(a, b)

    def test_different_families_rejected(self):
        model, X_test, y_test = self.setup_models()
        from medtab.models import feature_importances, train_dtree
        tree = train_dtree(X_test, y_test, 3, 2)
        with pytest.raises(EvalError, match="same family"):
            fidelity(model, tree, X_test, X_test, y_test,
                     feature_importances(model), feature_importances(tree))


class TestRenderReport:
    def test_deterministic(self):
        report = ClassificationReport(accuracy=0.9, precision=0.8, recall=0.7,
                                      f1=0.746, auc=0.95)
        sections = {"classification": report}
        assert render_report(sections, "json") == render_report(sections, "json")
        assert render_report(sections, "csv") == render_report(sections, "csv")

    def test_empty_csv_is_header_only(self):
        assert render_report({}, "csv") == "section,metric,value\n"

    def test_csv_one_metric_per_row(self):
        report = ClassificationReport(accuracy=1.0, precision=1.0, recall=1.0,
                                      f1=1.0, auc=None)
        lines = render_report({"m": report}, "csv").strip().split("\n")
        assert lines[0] == "section,metric,value"
        assert len(lines) == 1 + 6
        assert "m,auc,-" in lines

    def test_text_has_all_extraction_fields(self):
        from medtab.evalkit import ExtractionReport
        report = ExtractionReport(record_accuracy=0.98, cell_accuracy=0.99,
                                  missing_precision=0.97, missing_recall=0.99,
                                  vorc_call_rate=0.12, n_evaluated=100)
        text = render_report({"extraction": report}, "text")
        for field in ("record_accuracy", "cell_accuracy", "missing_precision",
                      "missing_recall", "vorc_call_rate", "n_evaluated"):
            assert field in text

    def test_unknown_format_rejected(self):
        with pytest.raises(EvalError):
            render_report({}, "xml")
