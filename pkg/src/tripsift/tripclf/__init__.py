"""Stage-one trip classification: cluster shortlisting and the
supervised ensemble."""

from .cluster import (
    NOISE,
    PcaResult,
    dbscan,
    k_distance_eps,
    pca,
    select_delivery_cluster,
    shortlist_clusters,
)
from .forest import (
    ForestModel,
    Tree,
    load_model,
    predict_trip,
    save_model,
    train_forest,
)
from .matrix import FeatureMatrix, Standardization, standardize
from .metrics import ClassifierReport, evaluate_classifier, roc_auc

__all__ = [
    "NOISE",
    "PcaResult",
    "dbscan",
    "k_distance_eps",
    "pca",
    "select_delivery_cluster",
    "shortlist_clusters",
    "ForestModel",
    "Tree",
    "load_model",
    "predict_trip",
    "save_model",
    "train_forest",
    "FeatureMatrix",
    "Standardization",
    "standardize",
    "ClassifierReport",
    "evaluate_classifier",
    "roc_auc",
]
