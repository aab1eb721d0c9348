"""scikit-learn style clustering estimators.

Each class wraps one of the functional routines and exposes ``fit`` /
``fit_predict`` with the usual fitted attributes: ``labels_`` (noise
``-1``, clusters ``1..k``), ``n_clusters_`` and ``report_`` (a
:class:`~lafdbscan.laf.RunReport`).

>>> import numpy as np
>>> X = np.array([[1.0, 0.0], [0.99, 0.05], [0.0, 1.0]])
>>> LAFDBSCAN(eps=0.01, tau=2).fit_predict(X).tolist()
[1, 1, -1]
"""

from __future__ import annotations

import time

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array

from .cardest import OracleCardinalityEstimator
from .dbscan import ClusterParams, dbscan
from .laf import RunReport, laf_dbscan
from .neighbors import QueryCounter
from .sampling import SamplingParams, dbscan_pp, laf_dbscan_pp
from .vecspace import Dataset

__all__ = ["DBSCAN", "LAFDBSCAN", "DBSCANPP", "LAFDBSCANPP", "check_dataset"]


def check_dataset(X, normalize: bool = True) -> Dataset:
    """Validate ``X`` and return a unit-norm :class:`Dataset`."""
    if isinstance(X, Dataset):
        if not X.is_normalized and X.n:
            return Dataset(X.vectors, normalize=True) if normalize else X
        return X
    X = check_array(X, dtype=np.float64, ensure_min_samples=1)
    return Dataset(X, normalize=normalize)


class _BaseCluster(ClusterMixin, BaseEstimator):
    def _params(self) -> ClusterParams:
        return ClusterParams(eps=self.eps, tau=self.tau,
                             alpha=getattr(self, "alpha", 1.0), metric=self.metric)

    def _store(self, dataset, assignment, report):
        self.dataset_ = dataset
        self.assignment_ = assignment
        self.labels_ = assignment.labels
        self.n_clusters_ = assignment.num_clusters
        self.report_ = report
        self.n_features_in_ = dataset.dim
        return self

    def _resolve_estimator(self, dataset):
        est = self.estimator
        if est is None:
            return OracleCardinalityEstimator(metric=self.metric).fit(dataset)
        return est


class DBSCAN(_BaseCluster):
    """Exact DBSCAN under cosine distance.

    Parameters
    ----------
    eps : float
        Neighbourhood radius (cosine distance, strict ``<``).
    tau : int
        Minimum neighbourhood size, the point itself included.
    metric : {"cosine", "euclidean-equivalent"}
    normalize : bool
        Scale input rows to unit norm first.
    """

    def __init__(self, eps=0.5, tau=5, metric="cosine", normalize=True):
        self.eps = eps
        self.tau = tau
        self.metric = metric
        self.normalize = normalize

    def fit(self, X, y=None):
        data = check_dataset(X, self.normalize)
        started = time.perf_counter()
        counter = QueryCounter()
        result = dbscan(data, self._params(), counter)
        report = RunReport(executed_queries=counter.value,
                           wall_time=time.perf_counter() - started)
        return self._store(data, result, report)


class LAFDBSCAN(_BaseCluster):
    """DBSCAN with estimator-gated range queries and merge repair.

    ``estimator`` is any fitted object with ``estimate(points, eps)``;
    ``None`` uses the exact oracle, which reproduces :class:`DBSCAN` while
    querying only core points.
    """

    def __init__(self, eps=0.5, tau=5, alpha=1.0, estimator=None, metric="cosine",
                 normalize=True, prediction_mode="batch", merge_seed=None):
        self.eps = eps
        self.tau = tau
        self.alpha = alpha
        self.estimator = estimator
        self.metric = metric
        self.normalize = normalize
        self.prediction_mode = prediction_mode
        self.merge_seed = merge_seed

    def fit(self, X, y=None):
        data = check_dataset(X, self.normalize)
        rng = None if self.merge_seed is None else np.random.default_rng(self.merge_seed)
        result, report = laf_dbscan(
            data, self._params(), self._resolve_estimator(data),
            prediction_mode=self.prediction_mode, merge_rng=rng,
        )
        return self._store(data, result, report)


class DBSCANPP(_BaseCluster):
    """DBSCAN++ with a sample fraction ``p``, or ``delta`` + predicted core ratio.

    When ``p`` is None the fraction is ``min(1, delta + R_c)``, where
    ``R_c`` is the share of points the ``estimator`` predicts as core.
    """

    def __init__(self, eps=0.5, tau=5, p=None, delta=0.1, estimator=None, seed=0,
                 metric="cosine", normalize=True, unbounded_assignment=False):
        self.eps = eps
        self.tau = tau
        self.p = p
        self.delta = delta
        self.estimator = estimator
        self.seed = seed
        self.metric = metric
        self.normalize = normalize
        self.unbounded_assignment = unbounded_assignment

    def _sampling(self) -> SamplingParams:
        return SamplingParams(
            p=1.0 if self.p is None else self.p, delta=self.delta, seed=self.seed,
            auto_p=self.p is None, unbounded_assignment=self.unbounded_assignment,
        )

    def fit(self, X, y=None):
        data = check_dataset(X, self.normalize)
        s = self._sampling()
        est = self._resolve_estimator(data) if s.auto_p else self.estimator
        result, report = dbscan_pp(data, self._params(), s, est)
        return self._store(data, result, report)


class LAFDBSCANPP(DBSCANPP):
    """DBSCAN++ whose sampled range queries are gated by the estimator."""

    def __init__(self, eps=0.5, tau=5, p=None, delta=0.1, alpha=1.0, estimator=None,
                 seed=0, metric="cosine", normalize=True, unbounded_assignment=False,
                 merge_seed=None):
        super().__init__(eps=eps, tau=tau, p=p, delta=delta, estimator=estimator,
                         seed=seed, metric=metric, normalize=normalize,
                         unbounded_assignment=unbounded_assignment)
        self.alpha = alpha
        self.merge_seed = merge_seed

    def fit(self, X, y=None):
        data = check_dataset(X, self.normalize)
        rng = None if self.merge_seed is None else np.random.default_rng(self.merge_seed)
        result, report = laf_dbscan_pp(
            data, self._params(), self._sampling(), self._resolve_estimator(data),
            merge_rng=rng,
        )
        return self._store(data, result, report)
