"""Extremely randomized tree ensemble over trip feature vectors.

Each split draws K candidate (feature, threshold) pairs uniformly and
keeps the best by Gini gain. No bootstrap: every tree sees the full
training partition, so the fitted model is a pure function of the data
set and the seed, independent of row order.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from ..geofeatures import TripFeatures
from .matrix import N_FEATURES, FeatureMatrix, Standardization

MODEL_FORMAT = "tripclf-forest"
MODEL_VERSION = 1
N_CANDIDATES = 8
HOLDOUT_FRACTION = 0.2

LEAF = -1


@dataclass
class Tree:
    """Flat node arrays; children of node i are left[i] / right[i].

    feature[i] == LEAF marks a leaf and value[i] is its positive fraction;
    interior nodes route x[feature] <= threshold to the left child.
    """

    feature: np.ndarray     # (nodes,) int
    threshold: np.ndarray   # (nodes,) float
    left: np.ndarray        # (nodes,) int
    right: np.ndarray       # (nodes,) int
    value: np.ndarray       # (nodes,) float, meaningful at leaves

    def predict(self, rows: np.ndarray) -> np.ndarray:
        node = np.zeros(rows.shape[0], dtype=np.int64)
        active = self.feature[node] != LEAF
        while active.any():
            idx = np.flatnonzero(active)
            at = node[idx]
            goes_left = rows[idx, self.feature[at]] <= self.threshold[at]
            node[idx] = np.where(goes_left, self.left[at], self.right[at])
            active[idx] = self.feature[node[idx]] != LEAF
        return self.value[node]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(feature=np.array(d["feature"], dtype=np.int64),
                   threshold=np.array(d["threshold"], dtype=np.float64),
                   left=np.array(d["left"], dtype=np.int64),
                   right=np.array(d["right"], dtype=np.int64),
                   value=np.array(d["value"], dtype=np.float64))


@dataclass
class ForestModel:
    trees: list[Tree]
    n_trees: int
    max_depth: int
    min_leaf: int
    seed: int
    decision_threshold: float

    def predict_proba(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != N_FEATURES:
            raise ValueError(f"expected (n, {N_FEATURES}) rows")
        if not np.isfinite(rows).all():
            raise ValueError("non-finite feature value")
        total = np.zeros(rows.shape[0])
        for tree in self.trees:
            total += tree.predict(rows)
        return total / len(self.trees)

    def to_dict(self) -> dict:
        doc = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "seed": self.seed,
            "decision_threshold": self.decision_threshold,
            "trees": [t.to_dict() for t in self.trees],
        }
        doc["schema"] = _schema_hash(doc)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ForestModel":
        if doc.get("format") != MODEL_FORMAT:
            raise ValueError("not a trip-classifier model document")
        if doc.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {doc.get('version')}")
        if doc.get("schema") != _schema_hash(doc):
            raise ValueError("model schema hash mismatch")
        return cls(trees=[Tree.from_dict(t) for t in doc["trees"]],
                   n_trees=doc["n_trees"], max_depth=doc["max_depth"],
                   min_leaf=doc["min_leaf"], seed=doc["seed"],
                   decision_threshold=doc["decision_threshold"])

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True,
                          separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _schema_hash(doc: dict) -> str:
    keys = sorted(k for k in doc if k != "schema")
    return hashlib.sha256(",".join(keys).encode()).hexdigest()[:16]


def _gini(pos: float, n: float) -> float:
    if n == 0:
        return 0.0
    p = pos / n
    return 2.0 * p * (1.0 - p)


def _grow(rows: np.ndarray, labels: np.ndarray, rng: np.random.Generator,
          max_depth: int, min_leaf: int) -> Tree:
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    def add_node() -> int:
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    def build(node: int, idx: np.ndarray, depth: int) -> None:
        y = labels[idx]
        pos = float(y.sum())
        n = idx.size
        value[node] = pos / n
        if depth >= max_depth or pos == 0 or pos == n or n < 2 * min_leaf:
            return
        x = rows[idx]
        # Fixed draw count per node keeps the stream aligned across
        # datasets that differ only in rows this node never touches.
        cand_feat = rng.integers(0, rows.shape[1], size=N_CANDIDATES)
        best_gain, best_f, best_t = 0.0, -1, 0.0
        parent = _gini(pos, n)
        for f in cand_feat:
            col = x[:, f]
            lo, hi = float(col.min()), float(col.max())
            t = float(rng.uniform(lo, hi))
            if lo == hi:
                continue
            goes_left = col <= t
            n_left = int(goes_left.sum())
            if n_left < min_leaf or n - n_left < min_leaf:
                continue
            pos_left = float(y[goes_left].sum())
            child = (n_left * _gini(pos_left, n_left)
                     + (n - n_left) * _gini(pos - pos_left, n - n_left)) / n
            gain = parent - child
            if gain > best_gain:
                best_gain, best_f, best_t = gain, int(f), t
        if best_f < 0:
            return
        feature[node] = best_f
        threshold[node] = best_t
        goes_left = rows[idx, best_f] <= best_t
        left[node] = add_node()
        right[node] = add_node()
        build(left[node], idx[goes_left], depth + 1)
        build(right[node], idx[~goes_left], depth + 1)

    root = add_node()
    build(root, np.arange(rows.shape[0]), 0)
    return Tree(feature=np.array(feature, dtype=np.int64),
                threshold=np.array(threshold, dtype=np.float64),
                left=np.array(left, dtype=np.int64),
                right=np.array(right, dtype=np.int64),
                value=np.array(value, dtype=np.float64))


def _holdout_split(ids: list[str]) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic 20% holdout keyed by id hash, not row position."""
    order = sorted(range(len(ids)),
                   key=lambda i: (hashlib.sha256(ids[i].encode()).hexdigest(),
                                  ids[i]))
    n_hold = max(1, round(HOLDOUT_FRACTION * len(ids)))
    hold = np.array(sorted(order[:n_hold]), dtype=np.int64)
    train = np.array(sorted(order[n_hold:]), dtype=np.int64)
    return train, hold


def _f1(labels: np.ndarray, predicted: np.ndarray) -> float:
    tp = float(np.sum(predicted & (labels == 1)))
    fp = float(np.sum(predicted & (labels == 0)))
    fn = float(np.sum(~predicted & (labels == 1)))
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom > 0 else 0.0


def _pick_threshold(probs: np.ndarray, labels: np.ndarray) -> float:
    uniq = np.unique(probs)
    if uniq.size < 2:
        return 0.5
    cands = sorted(set((uniq[:-1] + uniq[1:]) / 2.0) | {0.5})
    best_t, best_f1 = 0.5, -1.0
    for t in cands:
        f1 = _f1(labels, probs >= t)
        better = f1 > best_f1 + 1e-12
        same = abs(f1 - best_f1) <= 1e-12
        if better or (same and abs(t - 0.5) < abs(best_t - 0.5)):
            best_t, best_f1 = float(t), f1
    return best_t


def train_forest(matrix: FeatureMatrix, n_trees: int = 200,
                 max_depth: int = 8, min_leaf: int = 5,
                 seed: int = 0) -> ForestModel:
    """Fit the ensemble; the decision threshold maximizes F1 on a 20%
    holdout carved out by id hash, and trees train on the remainder."""
    if matrix.labels is None:
        raise ValueError("matrix has no labels")
    if n_trees < 1 or max_depth < 1 or min_leaf < 1:
        raise ValueError("n_trees, max_depth and min_leaf must be >= 1")
    n = len(matrix)
    if n < 2 * min_leaf:
        raise ValueError(f"need at least {2 * min_leaf} rows, got {n}")
    if np.unique(matrix.labels).size < 2:
        raise ValueError("both classes must be present")

    train_idx, hold_idx = _holdout_split(matrix.ids)
    train_rows = matrix.rows[train_idx]
    train_labels = matrix.labels[train_idx]
    if np.unique(train_labels).size < 2:
        # Degenerate carve (tiny or lopsided data): train on everything
        # and keep the default operating point.
        train_rows, train_labels = matrix.rows, matrix.labels
        hold_idx = np.array([], dtype=np.int64)

    streams = np.random.SeedSequence(seed).spawn(n_trees)
    trees = [_grow(train_rows, train_labels,
                   np.random.Generator(np.random.PCG64(s)),
                   max_depth, min_leaf)
             for s in streams]

    model = ForestModel(trees=trees, n_trees=n_trees, max_depth=max_depth,
                        min_leaf=min_leaf, seed=seed, decision_threshold=0.5)
    if hold_idx.size and np.unique(matrix.labels[hold_idx]).size == 2:
        probs = model.predict_proba(matrix.rows[hold_idx])
        model.decision_threshold = _pick_threshold(
            probs, matrix.labels[hold_idx])
    return model


def predict_trip(model: ForestModel,
                 features: TripFeatures) -> tuple[float, int]:
    """Ensemble probability and thresholded label for one trip."""
    row = np.asarray(features.as_vector(), dtype=np.float64)[None, :]
    prob = float(model.predict_proba(row)[0])
    return prob, int(prob >= model.decision_threshold)


def save_model(model: ForestModel, path: str,
               standardization: Standardization | None = None) -> None:
    doc = model.to_dict()
    if standardization is not None:
        doc["standardization"] = standardization.to_dict()
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        json.dump(doc, f, sort_keys=True, separators=(",", ":"))
    os.replace(tmp, path)


def load_model(path: str) -> tuple[ForestModel, Standardization | None]:
    with open(path) as f:
        doc = json.load(f)
    std = doc.pop("standardization", None)
    model = ForestModel.from_dict(doc)
    return model, (Standardization.from_dict(std) if std else None)
