"""Estimator-gated DBSCAN with partial-neighbour tracking and merge repair.

Before every range query the cardinality estimator is consulted; a point
whose predicted count is below ``alpha * tau`` is treated as a stop point
and its query is skipped. Skipped points are recorded in a
:data:`PartialNeighborMap`, which later queries fill with whichever of
their neighbours they happen to discover. After clustering, a skipped
point that collected at least ``tau`` such neighbours was a false
negative, and the clusters around it are merged.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from .dbscan import NOISE, UNDEFINED, ClusterAssignment, ClusterParams, _check_inputs
from .neighbors import QueryCounter, range_query
from .vecspace import Dataset

__all__ = [
    "EstimatorError",
    "PartialNeighborMap",
    "RunReport",
    "laf_dbscan",
    "update_partial_neighbors",
    "post_processing",
    "gate_predictions",
]

PartialNeighborMap = dict  # point index -> set of point indices


class EstimatorError(RuntimeError):
    """The cardinality estimator failed or returned an unusable value."""


@dataclass
class RunReport:
    executed_queries: int = 0
    skipped_queries: int = 0
    estimator_calls: int = 0
    merges_performed: int = 0
    false_negatives: int = 0
    wall_time: float = 0.0

    def as_rows(self, timings: bool = True) -> list[tuple[str, object]]:
        rows = [
            ("executed_queries", self.executed_queries),
            ("skipped_queries", self.skipped_queries),
            ("estimator_calls", self.estimator_calls),
            ("merges_performed", self.merges_performed),
            ("false_negatives", self.false_negatives),
        ]
        if timings:
            rows.append(("wall_time", f"{self.wall_time:.6f}"))
        return rows


def gate_predictions(estimator, dataset: Dataset, indices, eps: float) -> np.ndarray:
    """Estimated cardinality for each index, checked for sanity.

    Every point is consulted at most once per run and the estimate only
    depends on ``(point, eps)``, so evaluating the whole batch up front is
    equivalent to evaluating lazily at each gate.
    """
    indices = np.asarray(indices, dtype=np.intp)
    dim = getattr(estimator, "dim_", None)
    if dim is not None and dataset.n and dim != dataset.dim:
        raise EstimatorError(
            f"estimator dimension {dim} does not match dataset dimension {dataset.dim}"
        )
    if indices.size == 0:
        return np.zeros(0)
    try:
        pred = np.asarray(
            estimator.estimate(dataset.compute_vectors[indices], eps), dtype=np.float64
        )
    except Exception as exc:
        where = (f"point {indices[0]}" if indices.size == 1
                 else f"points {indices[0]}..{indices[-1]}")
        raise EstimatorError(f"cardinality estimator failed on {where}: {exc}") from exc
    if pred.shape != indices.shape:
        raise EstimatorError(f"estimator returned shape {pred.shape}, expected {indices.shape}")
    # infinities are fine for gating; NaN compares false on both sides
    bad = np.isnan(pred)
    if bad.any():
        raise EstimatorError(
            f"estimator returned {pred[bad][0]} for point {int(indices[bad][0])}"
        )
    return pred


def _lazy_predictor(estimator, dataset, eps):
    def one(p):
        return gate_predictions(estimator, dataset, [p], eps)[0]
    return one


def update_partial_neighbors(p: int, neighbors, e: PartialNeighborMap) -> PartialNeighborMap:
    """Add ``p`` to the entry of every neighbour that is already a key of ``e``.

    Neighbourhood is symmetric, so a predicted stop point found by ``p``'s
    query has ``p`` as one of its own neighbours. ``e`` is updated in place
    and returned; no keys are created.
    """
    if not e:
        return e
    for q in neighbors:
        entry = e.get(int(q))
        if entry is not None:
            entry.add(int(p))
    return e


class _ClusterUnion:
    """Union-find over cluster ids; the smaller id becomes the root."""

    def __init__(self, num_clusters: int):
        self.parent = list(range(num_clusters + 1))

    def find(self, c: int) -> int:
        root = c
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[c] != root:
            self.parent[c], c = root, self.parent[c]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if rb < ra:
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True


def post_processing(
    c: ClusterAssignment,
    e: PartialNeighborMap,
    tau: int,
    rng: np.random.Generator | None = None,
    report: RunReport | None = None,
) -> ClusterAssignment:
    """Merge clusters separated by detected false-negative stop points.

    A key ``P`` of ``e`` with ``|e[P]| >= tau`` is a false negative. The
    destination is the cluster of one non-noise partial neighbour: the
    lowest cluster id by default, a uniformly random one when ``rng`` is
    given. Every cluster holding a member of ``e[P]`` (and ``P``'s own
    cluster, if it has one) is merged into the destination and ``P`` joins
    it. Noise members stay noise. Keys are processed in ascending order
    through a union-find, so chained merges compose; ids are re-compacted
    to ``1..k`` at the end, keeping their relative order.
    """
    labels = c.labels.copy()
    uf = _ClusterUnion(c.num_clusters)
    joined: dict[int, int] = {}
    merges = detected = 0

    for p in sorted(e):
        members = e[p]
        if len(members) < tau:
            continue
        detected += 1
        member_list = sorted(members)
        clustered = [q for q in member_list if labels[q] > 0]
        if not clustered:
            continue
        if rng is None:
            dest = min(labels[q] for q in clustered)
        else:
            dest = labels[clustered[int(rng.integers(len(clustered)))]]
        targets = {int(labels[q]) for q in clustered}
        if labels[p] > 0:
            targets.add(int(labels[p]))
        for t in sorted(targets):
            merges += uf.union(int(dest), t)
        joined[p] = int(dest)

    if report is not None:
        report.merges_performed += merges
        report.false_negatives += detected

    if not joined:
        return ClusterAssignment(labels, c.num_clusters)

    for p, dest in joined.items():
        labels[p] = dest
    pos = labels > 0
    roots = np.array([uf.find(k) for k in range(c.num_clusters + 1)], dtype=np.int64)
    labels[pos] = roots[labels[pos]]
    kept = np.unique(labels[pos])
    remap = np.zeros(c.num_clusters + 1, dtype=np.int64)
    remap[kept] = np.arange(1, kept.size + 1)
    labels[pos] = remap[labels[pos]]
    return ClusterAssignment(labels, int(kept.size))


def laf_dbscan(
    dataset: Dataset,
    params: ClusterParams,
    estimator,
    *,
    prediction_mode: str = "batch",
    merge_rng: np.random.Generator | None = None,
    counter: QueryCounter | None = None,
    return_partial_neighbors: bool = False,
    post_process: bool = True,
):
    """DBSCAN whose range queries are gated by a cardinality estimator.

    Parameters
    ----------
    dataset : Dataset
        Unit vectors.
    params : ClusterParams
        ``eps``, ``tau``, the gate factor ``alpha`` and the metric.
    estimator
        Any object with ``estimate(points, eps) -> counts``.
    prediction_mode : {"batch", "lazy"}
        ``"batch"`` asks the estimator about all points in one call before
        the scan; ``"lazy"`` asks one point at a time at each gate. Each
        point reaches a gate exactly once, so both modes consult the same
        points and give the same result for a row-wise deterministic
        estimator.
    merge_rng : numpy Generator, optional
        Pick merge destinations at random instead of lowest cluster id.
    post_process : bool
        Set to False to return the assignment before false-negative
        merging (for ablations; the map is still returned on request).

    Returns
    -------
    (ClusterAssignment, RunReport), plus the partial-neighbour map when
    ``return_partial_neighbors`` is set.
    """
    _check_inputs(dataset, params)
    if prediction_mode not in ("batch", "lazy"):
        raise ValueError(f"prediction_mode must be 'batch' or 'lazy', got {prediction_mode!r}")
    started = time.perf_counter()
    n = dataset.n
    eps, tau, metric, gate = params.eps, params.tau, params.metric, params.gate
    report = RunReport()
    labels = np.full(n, UNDEFINED, dtype=np.int64)
    e: PartialNeighborMap = {}

    if prediction_mode == "batch":
        cached = gate_predictions(estimator, dataset, np.arange(n), eps)
        estimate = cached.__getitem__
    else:
        estimate = _lazy_predictor(estimator, dataset, eps)

    def query(p):
        report.executed_queries += 1
        nb = range_query(dataset, metric, p, eps, counter)
        update_partial_neighbors(p, nb.tolist(), e)
        return nb

    c = 0
    for p in range(n):
        if labels[p] != UNDEFINED:
            continue
        report.estimator_calls += 1
        if estimate(p) < gate:
            labels[p] = NOISE
            e.setdefault(p, set())
            report.skipped_queries += 1
            continue
        neighbors = query(p)
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
            report.estimator_calls += 1
            if estimate(q) >= gate:
                q_neighbors = query(q)
                if len(q_neighbors) >= tau:
                    seeds.extend(
                        r for r in q_neighbors.tolist() if labels[r] in (UNDEFINED, NOISE)
                    )
            else:
                e.setdefault(q, set())
                report.skipped_queries += 1

    result = ClusterAssignment(labels, c)
    if post_process:
        result = post_processing(result, e, tau, merge_rng, report)
    report.wall_time = time.perf_counter() - started
    if return_partial_neighbors:
        return result, report, e
    return result, report
