"""Exact linear-scan range queries with an execution counter.

Every call to :func:`range_query` increments a process-wide counter
(:func:`query_count` / :func:`reset_count`). Increments happen under a
lock, so the count is exact once concurrent callers have finished.
Callers that need distances without touching the counter (the oracle
cardinality estimator, nearest-core assignment) use :func:`distances_to`.
"""

from __future__ import annotations

import threading

import numpy as np

from .vecspace import Dataset, DistanceMetric

__all__ = [
    "QueryCounter",
    "distances_to",
    "range_query",
    "query_count",
    "reset_count",
]


class QueryCounter:
    """Thread-safe monotone counter."""

    def __init__(self):
        self._lock = threading.Lock()
        self._value = 0

    def increment(self, k: int = 1) -> None:
        with self._lock:
            self._value += k

    def reset(self) -> None:
        with self._lock:
            self._value = 0

    @property
    def value(self) -> int:
        with self._lock:
            return self._value


_COUNTER = QueryCounter()


def query_count() -> int:
    """Number of :func:`range_query` executions since the last reset."""
    return _COUNTER.value


def reset_count() -> None:
    _COUNTER.reset()


def distances_to(vectors64: np.ndarray, point, metric) -> np.ndarray:
    """Distances from ``point`` to every row of ``vectors64`` (float64).

    ``vectors64`` must be a float64 matrix of unit rows, typically
    ``Dataset.compute_vectors``.
    """
    metric = DistanceMetric.coerce(metric)
    point = np.asarray(point, dtype=np.float64)
    if point.ndim != 1 or point.shape[0] != vectors64.shape[1]:
        raise ValueError(
            f"dimension mismatch: point has shape {point.shape}, "
            f"dataset dim is {vectors64.shape[1]}"
        )
    if metric is DistanceMetric.COSINE:
        d = 1.0 - vectors64 @ point
        np.clip(d, 0.0, 2.0, out=d)
        return d
    diff = vectors64 - point
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def range_query(
    dataset: Dataset,
    metric,
    p,
    eps: float,
    counter: QueryCounter | None = None,
) -> np.ndarray:
    """Indices ``q`` with ``d(dataset[q], dataset[p]) < eps``, ascending.

    The result always contains ``p`` itself. Increments the module counter
    (and ``counter`` too, if given).
    """
    p = dataset.check_index(p)
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    vectors = dataset.compute_vectors
    d = distances_to(vectors, vectors[p], metric)
    _COUNTER.increment()
    if counter is not None:
        counter.increment()
    return np.flatnonzero(d < eps)
