"""Evaluation report for the trip classifier."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .forest import ForestModel
from .matrix import FeatureMatrix


def roc_auc(labels: np.ndarray, scores: np.ndarray) -> float | None:
    """AUC as the rank statistic P(score_pos > score_neg), ties at 1/2.

    Returns None when only one class is present.
    """
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.shape != scores.shape or labels.ndim != 1:
        raise ValueError("labels and scores must be parallel 1-d arrays")
    n_pos = int(np.sum(labels == 1))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    # Midrank over the pooled scores: average rank within tie groups.
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(labels.size, dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < labels.size:
        j = i
        while j + 1 < labels.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    rank_sum = float(ranks[labels == 1].sum())
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


@dataclass(frozen=True)
class ClassifierReport:
    accuracy: float
    precision: float
    recall: float
    auc: float | None
    true_pos: int
    false_pos: int
    true_neg: int
    false_neg: int
    threshold: float

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate_classifier(model: ForestModel,
                        matrix: FeatureMatrix) -> ClassifierReport:
    if matrix.labels is None:
        raise ValueError("matrix has no labels")
    probs = model.predict_proba(matrix.rows)
    predicted = probs >= model.decision_threshold
    actual = matrix.labels == 1
    tp = int(np.sum(predicted & actual))
    fp = int(np.sum(predicted & ~actual))
    tn = int(np.sum(~predicted & ~actual))
    fn = int(np.sum(~predicted & actual))
    return ClassifierReport(
        accuracy=(tp + tn) / len(matrix),
        precision=tp / (tp + fp) if tp + fp else 0.0,
        recall=tp / (tp + fn) if tp + fn else 0.0,
        auc=roc_auc(matrix.labels, probs),
        true_pos=tp, false_pos=fp, true_neg=tn, false_neg=fn,
        threshold=model.decision_threshold,
    )
