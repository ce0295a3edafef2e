import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prodcoef.errors import ValidationError
from prodcoef.evaluation import (
    ClassifierPipeline,
    CrossValPlan,
    EvaluationReport,
    PipelineSpec,
    cross_validate,
    f1_score,
    fold_assignment,
    format_cell,
    macro_f1,
    micro_f1,
    render_components_table,
    render_feature_table,
    render_plot_csv,
    render_report,
    report_from_json,
    report_to_json,
    weighted_f1,
)
from prodcoef.matrix import FeatureMatrix


def _matrix(values, labels=None):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    names = tuple(f"f{i}" for i in range(values.shape[1]))
    return FeatureMatrix(values, names, labels)


class TestF1:
    def test_perfect_prediction(self):
        assert macro_f1([0, 0, 1, 1], [0, 0, 1, 1]) == 1.0

    def test_total_inversion(self):
        assert macro_f1([0, 0, 1, 1], [1, 1, 0, 0]) == 0.0

    def test_hand_computed_fixture(self):
        # class 0: P=1, R=2/3, f1=0.8; class 1: P=0.5, R=1, f1=2/3.
        assert abs(macro_f1([0, 0, 0, 1], [0, 0, 1, 1]) - 11 / 15) <= 1e-12

    def test_macro_ignores_class_absent_from_truth(self):
        # Prediction of an unseen class costs precision nothing under
        # macro over truth classes, but recall of the true class drops.
        assert macro_f1([0, 0], [0, 9]) == pytest.approx(2 / 3)

    def test_micro_equals_accuracy(self):
        true = [0, 1, 2, 2, 1, 0]
        pred = [0, 1, 1, 2, 1, 2]
        assert micro_f1(true, pred) == pytest.approx(4 / 6)

    def test_weighted_reduces_to_macro_when_balanced(self):
        true = [0, 0, 1, 1]
        pred = [0, 1, 1, 0]
        assert weighted_f1(true, pred) == pytest.approx(macro_f1(true, pred))

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            macro_f1([0, 1], [0])

    def test_unknown_average(self):
        with pytest.raises(ValidationError):
            f1_score([0], [0], average="harmonic")

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(st.integers(0, 4), min_size=2, max_size=40),
        st.permutations(list(range(5))),
    )
    def test_relabeling_invariance(self, labels, mapping):
        rng = np.random.default_rng(0)
        pred = rng.integers(0, 5, size=len(labels))
        relabeled_true = [mapping[v] for v in labels]
        relabeled_pred = [mapping[v] for v in pred]
        assert macro_f1(labels, pred) == pytest.approx(
            macro_f1(relabeled_true, relabeled_pred), abs=1e-12
        )


class TestFolds:
    def test_partition_covers_exactly_once(self):
        labels = np.repeat([0, 1, 2], 20)
        fold = fold_assignment(labels, CrossValPlan(folds=4, seed=1))
        assert len(fold) == 60
        assert set(fold.tolist()) == {0, 1, 2, 3}
        for f in range(4):
            assert (fold == f).sum() == 15

    def test_stratification_preserves_class_shares(self):
        labels = np.repeat([0, 1], [40, 10])
        fold = fold_assignment(labels, CrossValPlan(folds=5, seed=2))
        for f in range(5):
            chunk = labels[fold == f]
            assert (chunk == 0).sum() == 8
            assert (chunk == 1).sum() == 2

    def test_small_class_error_names_class(self):
        labels = np.array([0] * 20 + [7] * 3)
        with pytest.raises(ValidationError, match="class 7"):
            fold_assignment(labels, CrossValPlan(folds=5, seed=0))

    def test_unstratified_allows_small_classes(self):
        labels = np.array([0] * 20 + [7] * 3)
        fold = fold_assignment(labels, CrossValPlan(folds=5, seed=0, stratified=False))
        assert len(fold) == 23

    def test_deterministic_given_seed(self):
        labels = np.repeat([0, 1, 2], 10)
        a = fold_assignment(labels, CrossValPlan(folds=3, seed=9))
        b = fold_assignment(labels, CrossValPlan(folds=3, seed=9))
        np.testing.assert_array_equal(a, b)

    def test_at_least_two_folds(self):
        with pytest.raises(ValidationError):
            CrossValPlan(folds=1)


class _PerfectOracle:
    """Stub pipeline that reads the held-out labels."""

    def fit(self, train):
        return self

    def predict_labels(self, test):
        return test.labels.copy()

    def describe(self):
        return {"classifier": "oracle"}


class _ConstantStub:
    def __init__(self, label):
        self.label = label

    def fit(self, train):
        return self

    def predict_labels(self, test):
        return np.full(test.n_rows, self.label)


class TestCrossValidate:
    def _features(self, n=40, classes=2, seed=0):
        rng = np.random.default_rng(seed)
        labels = np.tile(np.arange(classes), n // classes)
        return _matrix(rng.uniform(size=(n, 3)), labels)

    def test_perfect_oracle_scores_one(self):
        report = cross_validate(
            self._features(), CrossValPlan(folds=5, seed=0), _PerfectOracle()
        )
        assert report.mean_f1 == 1.0
        assert report.std_f1 == 0.0
        assert report.per_fold_f1 == (1.0,) * 5

    def test_constant_stub_hand_computed(self):
        # 20 balanced rows, constant prediction of class 0: per fold
        # (2+2 rows) class 0 has P=0.5, R=1 -> f1=2/3; class 1 scores 0;
        # macro = 1/3 in every fold.
        features = self._features(n=20)
        report = cross_validate(
            features, CrossValPlan(folds=5, seed=3), _ConstantStub(0)
        )
        assert report.mean_f1 == pytest.approx(1 / 3, abs=1e-12)
        assert report.std_f1 == pytest.approx(0.0, abs=1e-12)

    def test_confusion_rows_sum_to_class_counts(self):
        features = self._features(n=60, classes=3, seed=4)
        report = cross_validate(
            features, CrossValPlan(folds=5, seed=1), _ConstantStub(1)
        )
        np.testing.assert_array_equal(report.confusion.sum(axis=1), [20, 20, 20])

    def test_byte_identical_reports(self):
        features = self._features(n=50, seed=5)
        pipeline = ClassifierPipeline(PipelineSpec("knn", n_components=2, k=3))
        a = cross_validate(features, CrossValPlan(folds=5, seed=7), pipeline)
        b = cross_validate(features, CrossValPlan(folds=5, seed=7), pipeline)
        assert report_to_json(a) == report_to_json(b)

    def test_unlabeled_features_rejected(self):
        with pytest.raises(ValidationError):
            cross_validate(
                _matrix(np.zeros((10, 2))), CrossValPlan(), _PerfectOracle()
            )

    def test_out_of_universe_prediction_rejected(self):
        features = self._features(n=20)
        with pytest.raises(ValidationError, match="outside"):
            cross_validate(features, CrossValPlan(folds=5, seed=0), _ConstantStub(42))

    def test_report_json_round_trip(self):
        report = cross_validate(
            self._features(), CrossValPlan(folds=4, seed=2), _PerfectOracle(),
            extra_config={"radius": 0.5},
        )
        back = report_from_json(report_to_json(report))
        assert back.mean_f1 == report.mean_f1
        assert back.per_fold_f1 == report.per_fold_f1
        assert back.config == report.config
        np.testing.assert_array_equal(back.confusion, report.confusion)


class TestNoLeakage:
    def test_poisoned_test_labels_leave_fit_unchanged(self):
        rng = np.random.default_rng(11)
        values = rng.uniform(size=(60, 4))
        labels = np.tile([0, 1, 2], 20)
        features = _matrix(values, labels)
        fold = fold_assignment(labels, CrossValPlan(folds=5, seed=13))
        train_idx = np.nonzero(fold != 0)[0]
        test_idx = np.nonzero(fold == 0)[0]

        poisoned_labels = labels.copy()
        poisoned_labels[test_idx] = 99
        poisoned = _matrix(values, poisoned_labels)

        for spec in (
            PipelineSpec("knn", n_components=3, k=5),
            PipelineSpec("rf", n_components=2, n_trees=10, seed=1),
        ):
            pipeline = ClassifierPipeline(spec)
            clean_fit = pipeline.fit(features.take_rows(train_idx))
            poisoned_fit = pipeline.fit(poisoned.take_rows(train_idx))
            assert clean_fit.fingerprint() == poisoned_fit.fingerprint()


def _report(mean, std, **config):
    return EvaluationReport(
        per_fold_f1=(mean,), mean_f1=mean, std_f1=std, config=config
    )


class TestRendering:
    def test_cell_format(self):
        assert format_cell(0.85, 0.02) == "0.85 (± 0.02)"

    def test_single_row_feature_table(self):
        reports = [
            _report(0.33, 0.18, feature_set="xyz", classifier="knn"),
            _report(0.41, 0.16, feature_set="xyz", classifier="rf"),
        ]
        csv_text, text = render_feature_table(reports)
        lines = csv_text.strip().split("\n")
        assert lines[0] == "features,knn_f1,rf_f1"
        assert len(lines) == 2
        assert "0.33 (± 0.18)" in lines[1]
        assert "0.41 (± 0.16)" in lines[1]

    def test_components_table_has_eight_rows(self):
        reports = []
        for n in range(3, 11):
            reports.append(_report(0.1 * n, 0.01, n_components=n, classifier="knn"))
            reports.append(_report(0.09 * n, 0.02, n_components=n, classifier="rf"))
        csv_text, text = render_components_table(reports)
        lines = csv_text.strip().split("\n")
        assert len(lines) == 9  # header + one row per component count
        assert lines[1].startswith("3,")
        assert lines[-1].startswith("10,")

    def test_plot_csv_sorted_long_format(self):
        reports = [
            _report(0.5, 0.1, n_components=4, classifier="rf"),
            _report(0.6, 0.1, n_components=3, classifier="knn"),
        ]
        lines = render_plot_csv(reports).strip().split("\n")
        assert lines[0] == "n,classifier,mean_f1,std_f1"
        assert lines[1].startswith("3,knn")
        assert lines[2].startswith("4,rf")

    def test_render_report_dispatch(self):
        feature_reports = [_report(0.4, 0.1, feature_set="xyz", classifier="knn")]
        component_reports = [_report(0.4, 0.1, n_components=3, classifier="knn")]
        assert set(render_report(feature_reports)) == {
            "table_features.csv", "table_features.txt"
        }
        assert set(render_report(component_reports)) == {
            "table_components.csv", "table_components.txt", "plot_components.csv"
        }
