"""Row-per-point numeric feature table with column provenance."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ValidationError

LABEL_COLUMN = "label"


@dataclass(frozen=True)
class FeatureMatrix:
    """Immutable (rows x cols) float64 table with named columns.

    `labels`, when present, aligns one integer class code to each row
    and rides along through transforms and CSV round trips.
    """

    values: np.ndarray
    column_names: tuple[str, ...]
    labels: np.ndarray | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2:
            raise ValidationError(f"expected a 2-D table, got shape {values.shape}")
        if not np.isfinite(values).all():
            raise ValidationError("feature values must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

        names = tuple(str(n) for n in self.column_names)
        if len(names) != values.shape[1]:
            raise ValidationError(
                f"{len(names)} column names for {values.shape[1]} columns"
            )
        if LABEL_COLUMN in names:
            raise ValidationError(f"{LABEL_COLUMN!r} is reserved for the label vector")
        object.__setattr__(self, "column_names", names)

        if self.labels is not None:
            labels = np.array(self.labels, dtype=np.int64, copy=True)
            if labels.shape != (values.shape[0],):
                raise ValidationError("labels must align one-to-one with rows")
            labels.flags.writeable = False
            object.__setattr__(self, "labels", labels)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def take_rows(self, index) -> "FeatureMatrix":
        index = np.asarray(index)
        return FeatureMatrix(
            values=self.values[index],
            column_names=self.column_names,
            labels=None if self.labels is None else self.labels[index],
        )

    def select_columns(self, names) -> "FeatureMatrix":
        missing = [n for n in names if n not in self.column_names]
        if missing:
            raise ValidationError(f"unknown columns {missing}")
        cols = [self.column_names.index(n) for n in names]
        return FeatureMatrix(
            values=self.values[:, cols],
            column_names=tuple(names),
            labels=self.labels,
        )

    def with_labels(self, labels) -> "FeatureMatrix":
        return FeatureMatrix(self.values, self.column_names, labels)


def write_feature_csv(matrix: FeatureMatrix, path) -> None:
    """Write header + rows; floats in repr (round-trip) form."""
    with open(path, "w", newline="\n") as handle:
        header = ",".join(matrix.column_names)
        if matrix.labels is not None:
            handle.write(header + f",{LABEL_COLUMN}\n")
            for row, lab in zip(matrix.values.tolist(), matrix.labels.tolist()):
                handle.write(",".join(repr(v) for v in row) + f",{lab}\n")
        else:
            handle.write(header + "\n")
            for row in matrix.values.tolist():
                handle.write(",".join(repr(v) for v in row) + "\n")


def read_feature_csv(path) -> FeatureMatrix:
    """Read a feature CSV written by `write_feature_csv`.

    A trailing `label` column, when present in the header, is parsed as
    the integer label vector.
    """
    try:
        handle = open(path, "r", newline="")
    except OSError as exc:
        raise FormatError(f"cannot open {path}: {exc}") from None
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty feature file") from None
        has_label = bool(header) and header[-1] == LABEL_COLUMN
        names = tuple(header[:-1] if has_label else header)
        if not names:
            raise FormatError(f"{path}: header has no feature columns")
        width = len(header)
        rows: list[list[float]] = []
        labels: list[int] = []
        for row_num, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise FormatError(
                    f"{path} row {row_num}: expected {width} fields, got {len(row)}"
                )
            try:
                rows.append([float(c) for c in row[: len(names)]])
            except ValueError:
                raise FormatError(f"{path} row {row_num}: non-numeric value") from None
            if has_label:
                try:
                    labels.append(int(row[-1]))
                except ValueError:
                    raise FormatError(
                        f"{path} row {row_num}: non-integer label {row[-1]!r}"
                    ) from None
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(names))
    return FeatureMatrix(
        values=values,
        column_names=names,
        labels=np.array(labels, dtype=np.int64) if has_label else None,
    )
