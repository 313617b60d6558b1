"""Feature matrices and column standardization for the trip classifier."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..geofeatures import FEATURE_NAMES, TripFeatures

N_FEATURES = len(FEATURE_NAMES)


@dataclass
class FeatureMatrix:
    """Per-trip feature rows with parallel trip ids and optional labels."""

    rows: np.ndarray                    # (n, 7) float64
    ids: list[str]
    labels: np.ndarray | None = None    # (n,) of {0, 1}

    def __post_init__(self) -> None:
        self.rows = np.asarray(self.rows, dtype=np.float64)
        if self.rows.ndim != 2 or self.rows.shape[1] != N_FEATURES:
            raise ValueError(f"rows must be (n, {N_FEATURES})")
        if len(self.ids) != self.rows.shape[0]:
            raise ValueError("ids must parallel rows")
        if not np.all(np.isfinite(self.rows)):
            raise ValueError("feature rows must be finite")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.rows.shape[0],):
                raise ValueError("labels must parallel rows")
            if not np.isin(self.labels, (0, 1)).all():
                raise ValueError("labels must be 0 or 1")

    def __len__(self) -> int:
        return self.rows.shape[0]

    @classmethod
    def from_features(cls, items: Iterable[tuple[str, TripFeatures]],
                      labels: dict[str, int] | None = None) -> "FeatureMatrix":
        ids, rows, y = [], [], []
        for trip_id, f in items:
            ids.append(trip_id)
            rows.append(f.as_vector())
            if labels is not None:
                y.append(labels[trip_id])
        return cls(rows=np.array(rows, dtype=np.float64).reshape(
            len(ids), N_FEATURES),
            ids=ids, labels=np.array(y) if labels is not None else None)


@dataclass(frozen=True)
class Standardization:
    """Column means and stds (population); constant columns keep std 0."""

    mean: tuple[float, ...]
    std: tuple[float, ...]

    def apply(self, rows: np.ndarray) -> np.ndarray:
        mean = np.asarray(self.mean)
        std = np.asarray(self.std)
        safe = np.where(std == 0.0, 1.0, std)
        out = (np.asarray(rows, dtype=np.float64) - mean) / safe
        return np.where(std == 0.0, 0.0, out)

    def invert(self, rows: np.ndarray) -> np.ndarray:
        mean = np.asarray(self.mean)
        std = np.asarray(self.std)
        return np.asarray(rows, dtype=np.float64) * std + mean

    def to_dict(self) -> dict:
        return {"mean": list(self.mean), "std": list(self.std)}

    @classmethod
    def from_dict(cls, doc: dict) -> "Standardization":
        return cls(mean=tuple(float(v) for v in doc["mean"]),
                   std=tuple(float(v) for v in doc["std"]))


def standardize(matrix: FeatureMatrix,
                ) -> tuple[FeatureMatrix, Standardization]:
    """Zero-mean unit-std columns; returns the transform for predict time."""
    if len(matrix) < 2:
        raise ValueError("standardization needs at least 2 rows")
    mean = matrix.rows.mean(axis=0)
    std = matrix.rows.std(axis=0)           # population std
    params = Standardization(mean=tuple(float(v) for v in mean),
                             std=tuple(float(v) for v in std))
    return FeatureMatrix(rows=params.apply(matrix.rows), ids=list(matrix.ids),
                         labels=None if matrix.labels is None
                         else matrix.labels.copy()), params
