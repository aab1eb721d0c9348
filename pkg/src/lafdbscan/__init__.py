"""Exact and learned-accelerated DBSCAN for unit vectors under cosine distance."""

from .cardest import (
    EstimatorConfig,
    MLPCardinalityEstimator,
    OracleCardinalityEstimator,
    RMICardinalityEstimator,
    SampleCardinalityEstimator,
    build_training_set,
    load_estimator,
    save_estimator,
    train,
)
from .cluster import DBSCAN, DBSCANPP, LAFDBSCAN, LAFDBSCANPP
from .dbscan import NOISE, ClusterAssignment, ClusterParams, dbscan, same_partition
from .laf import RunReport, laf_dbscan, post_processing, update_partial_neighbors
from .metrics import adjusted_mutual_information, adjusted_rand_index
from .sampling import SamplingParams, dbscan_pp, laf_dbscan_pp, predicted_core_ratio
from .vecspace import Dataset, DistanceMetric

__version__ = "0.1.0"

__all__ = [
    "DBSCAN",
    "DBSCANPP",
    "LAFDBSCAN",
    "LAFDBSCANPP",
    "NOISE",
    "ClusterAssignment",
    "ClusterParams",
    "Dataset",
    "DistanceMetric",
    "EstimatorConfig",
    "MLPCardinalityEstimator",
    "OracleCardinalityEstimator",
    "RMICardinalityEstimator",
    "RunReport",
    "SampleCardinalityEstimator",
    "SamplingParams",
    "adjusted_mutual_information",
    "adjusted_rand_index",
    "build_training_set",
    "dbscan",
    "dbscan_pp",
    "laf_dbscan",
    "laf_dbscan_pp",
    "load_estimator",
    "post_processing",
    "predicted_core_ratio",
    "same_partition",
    "save_estimator",
    "train",
    "update_partial_neighbors",
]
