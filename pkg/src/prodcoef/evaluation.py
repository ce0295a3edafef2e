"""Cross-validated F1 evaluation and table rendering.

Folds are stratified: rows are shuffled once by the plan seed, then
assigned round-robin within each class, so every fold keeps the class
proportions and the split is reproducible bit-for-bit. The pipeline
(PCA fit included) is trained on the training portion of each fold
only; held-out labels can never leak into fitting.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .forest import ForestConfig, forest_to_json, rf_fit, rf_predict_labels
from .knn import KnnModel, knn_predict_labels
from .matrix import FeatureMatrix
from .pca import PcaModel, fit_pca, pca_to_json, transform

F1_AVERAGES = ("macro", "micro", "weighted")


def _check_label_pair(true_labels, predicted):
    true_labels = np.asarray(true_labels, dtype=np.int64)
    predicted = np.asarray(predicted, dtype=np.int64)
    if true_labels.shape != predicted.shape or true_labels.ndim != 1:
        raise ValidationError(
            f"label vectors must match: {true_labels.shape} vs {predicted.shape}"
        )
    if len(true_labels) == 0:
        raise ValidationError("need at least one label to score")
    return true_labels, predicted


def _per_class_f1(true_labels, predicted, classes):
    f1s = []
    supports = []
    for c in classes:
        tp = int(((predicted == c) & (true_labels == c)).sum())
        fp = int(((predicted == c) & (true_labels != c)).sum())
        fn = int(((predicted != c) & (true_labels == c)).sum())
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        f1s.append(f1)
        supports.append(tp + fn)
    return np.array(f1s), np.array(supports)


def macro_f1(true_labels, predicted) -> float:
    """Unweighted mean of per-class F1 over classes present in the truth."""
    true_labels, predicted = _check_label_pair(true_labels, predicted)
    classes = np.unique(true_labels)
    f1s, _ = _per_class_f1(true_labels, predicted, classes)
    return float(f1s.mean())


def micro_f1(true_labels, predicted) -> float:
    """Global-count F1 (equals accuracy for single-label multiclass)."""
    true_labels, predicted = _check_label_pair(true_labels, predicted)
    classes = np.unique(true_labels)
    tp = int((true_labels == predicted).sum())
    fp = sum(int(((predicted == c) & (true_labels != c)).sum()) for c in classes)
    fn = int((true_labels != predicted).sum())
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    return 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0


def weighted_f1(true_labels, predicted) -> float:
    """Support-weighted mean of per-class F1."""
    true_labels, predicted = _check_label_pair(true_labels, predicted)
    classes = np.unique(true_labels)
    f1s, supports = _per_class_f1(true_labels, predicted, classes)
    return float((f1s * supports).sum() / supports.sum())


_F1_FUNCS = {"macro": macro_f1, "micro": micro_f1, "weighted": weighted_f1}


def f1_score(true_labels, predicted, average: str = "macro") -> float:
    if average not in _F1_FUNCS:
        raise ValidationError(f"unknown F1 average {average!r}; use one of {F1_AVERAGES}")
    return _F1_FUNCS[average](true_labels, predicted)


@dataclass(frozen=True)
class CrossValPlan:
    folds: int = 5
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if self.folds < 2:
            raise ValidationError(f"need at least 2 folds, got {self.folds}")


def fold_assignment(labels: np.ndarray, plan: CrossValPlan) -> np.ndarray:
    """Fold id per row: seeded shuffle, then round-robin within class."""
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    if n < plan.folds:
        raise ValidationError(f"{n} rows cannot fill {plan.folds} folds")
    rng = np.random.default_rng(plan.seed)
    perm = rng.permutation(n)
    fold = np.empty(n, dtype=np.int64)
    if plan.stratified:
        for c in np.unique(labels):
            rows_c = perm[labels[perm] == c]
            if len(rows_c) < plan.folds:
                raise ValidationError(
                    f"class {int(c)} has {len(rows_c)} rows; stratified "
                    f"{plan.folds}-fold needs at least {plan.folds}"
                )
            fold[rows_c] = np.arange(len(rows_c)) % plan.folds
    else:
        fold[perm] = np.arange(n) % plan.folds
    return fold


@dataclass(frozen=True)
class PipelineSpec:
    """Configuration of one (optional PCA) -> classifier pipeline."""

    classifier: str
    n_components: int | None = None
    k: int = 10
    n_trees: int = 100
    max_depth: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.classifier not in ("knn", "rf"):
            raise ValidationError(f"unknown classifier {self.classifier!r}")
        if self.n_components is not None and self.n_components < 1:
            raise ValidationError("n_components must be >= 1 when set")

    def describe(self) -> dict:
        out = {"classifier": self.classifier, "n_components": self.n_components}
        if self.classifier == "knn":
            out["k"] = self.k
        else:
            out["trees"] = self.n_trees
            out["max_depth"] = self.max_depth
            out["rf_seed"] = self.seed
        return out


class FittedPipeline:
    def __init__(self, pca: PcaModel | None, kind: str, model):
        self._pca = pca
        self._kind = kind
        self._model = model

    def predict_labels(self, queries: FeatureMatrix) -> np.ndarray:
        if self._pca is not None:
            queries = transform(self._pca, queries)
        if self._kind == "knn":
            return knn_predict_labels(self._model, queries)
        return rf_predict_labels(self._model, queries)

    def fingerprint(self) -> str:
        """Content digest of everything learned from the training data."""
        digest = hashlib.sha256()
        if self._pca is not None:
            digest.update(pca_to_json(self._pca).encode())
        if self._kind == "knn":
            digest.update(self._model.train.values.tobytes())
            digest.update(self._model.train.labels.tobytes())
            digest.update(str(self._model.k).encode())
        else:
            digest.update(forest_to_json(self._model).encode())
        return digest.hexdigest()


class ClassifierPipeline:
    """Builds a fresh (PCA?) -> classifier fit from a training matrix."""

    def __init__(self, spec: PipelineSpec):
        self.spec = spec

    def fit(self, train: FeatureMatrix) -> FittedPipeline:
        spec = self.spec
        pca = None
        if spec.n_components is not None:
            pca = fit_pca(train, spec.n_components)
            train = transform(pca, train)
        if spec.classifier == "knn":
            model = KnnModel(train=train, k=spec.k)
        else:
            model = rf_fit(
                train,
                ForestConfig(
                    n_trees=spec.n_trees,
                    max_depth=spec.max_depth,
                    seed=spec.seed,
                ),
            )
        return FittedPipeline(pca, spec.classifier, model)

    def describe(self) -> dict:
        return self.spec.describe()


@dataclass(frozen=True)
class EvaluationReport:
    per_fold_f1: tuple[float, ...]
    mean_f1: float
    std_f1: float
    config: dict = field(compare=False)
    classes: tuple[int, ...] = ()
    confusion: np.ndarray | None = None

    def __post_init__(self):
        if self.confusion is not None:
            conf = np.array(self.confusion, dtype=np.int64, copy=True)
            conf.flags.writeable = False
            object.__setattr__(self, "confusion", conf)


def cross_validate(features: FeatureMatrix, plan: CrossValPlan, pipeline,
                   f1_average: str = "macro", extra_config: dict | None = None
                   ) -> EvaluationReport:
    """Train/score the pipeline across the plan's folds.

    The pipeline object only needs fit(train_matrix) returning
    something with predict_labels(test_matrix); PCA fitting therefore
    happens inside each fold, on training rows only.
    """
    if features.labels is None:
        raise ValidationError("cross-validation needs labeled features")
    if f1_average not in _F1_FUNCS:
        raise ValidationError(f"unknown F1 average {f1_average!r}")

    fold = fold_assignment(features.labels, plan)
    classes = np.unique(features.labels)
    class_pos = {int(c): i for i, c in enumerate(classes.tolist())}
    confusion = np.zeros((len(classes), len(classes)), dtype=np.int64)

    per_fold = []
    for f in range(plan.folds):
        train_idx = np.nonzero(fold != f)[0]
        test_idx = np.nonzero(fold == f)[0]
        fitted = pipeline.fit(features.take_rows(train_idx))
        predicted = fitted.predict_labels(features.take_rows(test_idx))
        truth = features.labels[test_idx]
        per_fold.append(f1_score(truth, predicted, f1_average))
        for t, p in zip(truth.tolist(), predicted.tolist()):
            if p not in class_pos:
                raise ValidationError(
                    f"pipeline predicted label {p} outside the data's classes"
                )
            confusion[class_pos[t], class_pos[p]] += 1

    per_fold_arr = np.array(per_fold)
    config = dict(extra_config or {})
    if hasattr(pipeline, "describe"):
        config.update(pipeline.describe())
    config.update(
        {"folds": plan.folds, "cv_seed": plan.seed, "stratified": plan.stratified,
         "f1_average": f1_average}
    )
    return EvaluationReport(
        per_fold_f1=tuple(float(v) for v in per_fold),
        mean_f1=float(per_fold_arr.mean()),
        std_f1=float(per_fold_arr.std(ddof=1)),
        config=config,
        classes=tuple(int(c) for c in classes),
        confusion=confusion,
    )


def report_to_json(report: EvaluationReport) -> str:
    payload = {
        "per_fold_f1": list(report.per_fold_f1),
        "mean_f1": report.mean_f1,
        "std_f1": report.std_f1,
        "config": report.config,
        "classes": list(report.classes),
        "confusion": None if report.confusion is None else report.confusion.tolist(),
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def report_from_json(text: str) -> EvaluationReport:
    payload = json.loads(text)
    return EvaluationReport(
        per_fold_f1=tuple(payload["per_fold_f1"]),
        mean_f1=payload["mean_f1"],
        std_f1=payload["std_f1"],
        config=payload["config"],
        classes=tuple(payload["classes"]),
        confusion=None if payload["confusion"] is None else np.array(payload["confusion"]),
    )


def format_cell(mean: float, std: float) -> str:
    return f"{mean:.2f} (± {std:.2f})"


_FEATURE_SET_TITLES = {
    "xyz": "Original features (x,y,z)",
    "full": "With product coefficients",
}


def _classifier_cell(reports, **match) -> str:
    for report in reports:
        if all(report.config.get(k) == v for k, v in match.items()):
            return format_cell(report.mean_f1, report.std_f1)
    return ""


def render_feature_table(reports) -> tuple[str, str]:
    """CSV and aligned-text table: rows per feature set, KNN/RF columns."""
    feature_sets = []
    for report in reports:
        fs = report.config.get("feature_set")
        if fs and fs not in feature_sets:
            feature_sets.append(fs)
    rows = []
    for fs in feature_sets:
        rows.append(
            (
                _FEATURE_SET_TITLES.get(fs, fs),
                _classifier_cell(reports, feature_set=fs, classifier="knn"),
                _classifier_cell(reports, feature_set=fs, classifier="rf"),
            )
        )
    return _tables(("features", "knn_f1", "rf_f1"), rows)


def render_components_table(reports) -> tuple[str, str]:
    """CSV and aligned-text table: one row per component count."""
    counts = sorted(
        {r.config.get("n_components") for r in reports if r.config.get("n_components")}
    )
    rows = []
    for n in counts:
        rows.append(
            (
                str(n),
                _classifier_cell(reports, n_components=n, classifier="knn"),
                _classifier_cell(reports, n_components=n, classifier="rf"),
            )
        )
    return _tables(("n_components", "knn_f1", "rf_f1"), rows)


def _tables(header: tuple[str, ...], rows) -> tuple[str, str]:
    csv_lines = [",".join(header)]
    for row in rows:
        csv_lines.append(",".join(f'"{cell}"' if "," in cell else cell for cell in row))
    csv_text = "\n".join(csv_lines) + "\n"

    widths = [len(h) for h in header]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    def fmt(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    text_lines = [fmt(header), fmt(["-" * w for w in widths])]
    text_lines.extend(fmt(row) for row in rows)
    return csv_text, "\n".join(text_lines) + "\n"


def render_plot_csv(reports) -> str:
    """Plot-ready long format: n,classifier,mean_f1,std_f1."""
    lines = ["n,classifier,mean_f1,std_f1"]
    keyed = []
    for report in reports:
        n = report.config.get("n_components")
        if n is None:
            continue
        keyed.append((int(n), report.config.get("classifier", ""), report))
    for n, clf, report in sorted(keyed, key=lambda t: (t[0], t[1])):
        lines.append(f"{n},{clf},{report.mean_f1!r},{report.std_f1!r}")
    return "\n".join(lines) + "\n"


def render_report(reports) -> dict[str, str]:
    """All table artifacts derivable from a report collection."""
    artifacts: dict[str, str] = {}
    if any(r.config.get("feature_set") for r in reports):
        csv_text, table_text = render_feature_table(reports)
        artifacts["table_features.csv"] = csv_text
        artifacts["table_features.txt"] = table_text
    if any(r.config.get("n_components") for r in reports):
        csv_text, table_text = render_components_table(reports)
        artifacts["table_components.csv"] = csv_text
        artifacts["table_components.txt"] = table_text
        artifacts["plot_components.csv"] = render_plot_csv(reports)
    return artifacts
