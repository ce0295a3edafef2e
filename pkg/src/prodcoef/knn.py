"""K-nearest-neighbors classification, Euclidean, uniform votes.

Distance ties resolve to the lower training-row index (stable sort),
vote ties to the smallest class code.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .matrix import FeatureMatrix

# Above this many query x train pairs, distances go through the
# |q|^2 + |t|^2 - 2 q.t expansion in query blocks instead of one
# broadcast subtraction.
_DIRECT_PAIR_LIMIT = 4_000_000


@dataclass(frozen=True)
class KnnModel:
    train: FeatureMatrix
    k: int = 10

    def __post_init__(self):
        if self.train.labels is None:
            raise ValidationError("KNN training matrix must carry labels")
        if not 1 <= self.k <= self.train.n_rows:
            raise ValidationError(
                f"k={self.k} outside 1..{self.train.n_rows} training rows"
            )


@dataclass(frozen=True)
class Prediction:
    label: int
    per_class_votes: dict[int, float]


def _vote(counts: np.ndarray, classes: np.ndarray) -> np.ndarray:
    # argmax picks the first maximum; classes are sorted ascending, so
    # vote ties fall to the smallest class code.
    return classes[np.argmax(counts, axis=1)]


def knn_predict_labels(model: KnnModel, queries: FeatureMatrix) -> np.ndarray:
    """Predicted label per query row, as an array."""
    if queries.n_cols != model.train.n_cols:
        raise ValidationError(
            f"query has {queries.n_cols} columns, training data has {model.train.n_cols}"
        )
    T = model.train.values
    labels = model.train.labels
    classes = np.unique(labels)
    positions = np.searchsorted(classes, labels)

    out = np.empty(queries.n_rows, dtype=np.int64)
    block = max(1, _DIRECT_PAIR_LIMIT // max(1, len(T)))
    for lo in range(0, queries.n_rows, block):
        Q = queries.values[lo : lo + block]
        if len(Q) * len(T) <= _DIRECT_PAIR_LIMIT:
            d2 = ((Q[:, None, :] - T[None, :, :]) ** 2).sum(axis=-1)
        else:
            d2 = (Q**2).sum(1)[:, None] + (T**2).sum(1)[None, :] - 2.0 * (Q @ T.T)
        nearest = np.argsort(d2, axis=1, kind="stable")[:, : model.k]
        votes = np.zeros((len(Q), len(classes)), dtype=np.int64)
        np.add.at(votes, (np.arange(len(Q))[:, None], positions[nearest]), 1)
        out[lo : lo + len(Q)] = _vote(votes, classes)
    return out


def knn_predict(model: KnnModel, queries: FeatureMatrix) -> list[Prediction]:
    """Per-query predictions with the full vote breakdown."""
    if queries.n_cols != model.train.n_cols:
        raise ValidationError(
            f"query has {queries.n_cols} columns, training data has {model.train.n_cols}"
        )
    T = model.train.values
    labels = model.train.labels
    classes = np.unique(labels)
    positions = np.searchsorted(classes, labels)

    results: list[Prediction] = []
    for q in queries.values:
        d2 = ((T - q) ** 2).sum(axis=1)
        nearest = np.argsort(d2, kind="stable")[: model.k]
        votes = np.bincount(positions[nearest], minlength=len(classes))
        label = int(classes[np.argmax(votes)])
        results.append(
            Prediction(
                label=label,
                per_class_votes={int(c): int(v) for c, v in zip(classes, votes)},
            )
        )
    return results
