"""Exact reference DBSCAN and the types shared by all clustering routines."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .neighbors import QueryCounter, range_query
from .vecspace import Dataset, DistanceMetric

__all__ = [
    "NOISE",
    "UNDEFINED",
    "ClusterParams",
    "ClusterAssignment",
    "dbscan",
    "same_partition",
]

# label encoding shared by every clustering routine and the labels file
UNDEFINED = 0
NOISE = -1


@dataclass(frozen=True)
class ClusterParams:
    """Parameters of one clustering run.

    ``tau`` counts the point itself. ``alpha`` scales the estimator gate
    and is ignored by the reference algorithm. ``eps`` may exceed the
    cosine maximum of 2, in which case every point neighbours every other.
    """

    eps: float
    tau: int
    alpha: float = 1.0
    metric: DistanceMetric = DistanceMetric.COSINE

    def __post_init__(self):
        object.__setattr__(self, "metric", DistanceMetric.coerce(self.metric))
        if not (np.isfinite(self.eps) and self.eps > 0):
            raise ValueError(f"eps must be a positive finite number, got {self.eps}")
        if isinstance(self.tau, bool) or int(self.tau) != self.tau or self.tau < 1:
            raise ValueError(f"tau must be an integer >= 1, got {self.tau}")
        object.__setattr__(self, "tau", int(self.tau))
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @property
    def gate(self) -> float:
        """Estimator threshold ``alpha * tau``."""
        return self.alpha * self.tau


@dataclass
class ClusterAssignment:
    """Point-to-label map: ``-1`` noise, ``0`` undefined, ``1..c`` clusters."""

    labels: np.ndarray
    num_clusters: int = field(default=-1)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if self.num_clusters < 0:
            pos = self.labels[self.labels > 0]
            self.num_clusters = int(pos.max()) if pos.size else 0

    @classmethod
    def undefined(cls, n: int) -> "ClusterAssignment":
        return cls(np.full(n, UNDEFINED, dtype=np.int64), 0)

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def noise_mask(self) -> np.ndarray:
        return self.labels == NOISE

    @property
    def is_complete(self) -> bool:
        return not np.any(self.labels == UNDEFINED)

    def validate(self) -> None:
        """Raise if the assignment violates the completed-run invariants."""
        if not self.is_complete:
            raise ValueError("assignment still has undefined points")
        ids = np.unique(self.labels[self.labels > 0])
        if not np.array_equal(ids, np.arange(1, self.num_clusters + 1)):
            raise ValueError(
                f"cluster ids {ids.tolist()} are not the contiguous range 1..{self.num_clusters}"
            )
        if np.any(self.labels < NOISE):
            raise ValueError("labels below -1 are not allowed")

    def blocks(self) -> tuple[frozenset, frozenset]:
        """Partition as (set of cluster blocks, noise set), ignoring ids."""
        clusters: dict[int, list[int]] = {}
        for i, lab in enumerate(self.labels.tolist()):
            if lab > 0:
                clusters.setdefault(lab, []).append(i)
        noise = frozenset(np.flatnonzero(self.noise_mask).tolist())
        return frozenset(frozenset(v) for v in clusters.values()), noise

    def copy(self) -> "ClusterAssignment":
        return ClusterAssignment(self.labels.copy(), self.num_clusters)


def same_partition(a: ClusterAssignment, b: ClusterAssignment) -> bool:
    """True when both assignments have identical cluster blocks and noise."""
    return len(a) == len(b) and a.blocks() == b.blocks()


def _check_inputs(dataset: Dataset, params: ClusterParams) -> None:
    if not isinstance(params, ClusterParams):
        raise TypeError("params must be a ClusterParams")
    if dataset.n:
        dataset.require_normalized()


def dbscan(
    dataset: Dataset,
    params: ClusterParams,
    counter: QueryCounter | None = None,
) -> ClusterAssignment:
    """Classic DBSCAN over ``dataset`` in ascending index order.

    Neighbourhoods come from :func:`range_query` (self-inclusive, strict
    ``<``). Each point is queried exactly once, when it leaves the
    undefined state. Border points reachable from several clusters go to
    the first cluster that reaches them.
    """
    _check_inputs(dataset, params)
    n = dataset.n
    labels = np.full(n, UNDEFINED, dtype=np.int64)
    eps, tau, metric = params.eps, params.tau, params.metric
    c = 0

    for p in range(n):
        if labels[p] != UNDEFINED:
            continue
        neighbors = range_query(dataset, metric, p, eps, counter)
        if len(neighbors) < tau:
            labels[p] = NOISE
            continue
        c += 1
        labels[p] = c
        seeds = deque(q for q in neighbors.tolist() if q != p)
        while seeds:
            q = seeds.popleft()
            if labels[q] == NOISE:
                labels[q] = c
            if labels[q] != UNDEFINED:
                continue
            labels[q] = c
            q_neighbors = range_query(dataset, metric, q, eps, counter)
            if len(q_neighbors) >= tau:
                seeds.extend(
                    r for r in q_neighbors.tolist() if labels[r] in (UNDEFINED, NOISE)
                )

    return ClusterAssignment(labels, c)
