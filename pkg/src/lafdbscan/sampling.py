"""DBSCAN++ (core detection on a uniform sample) and its LAF-gated form."""

from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from .dbscan import NOISE, UNDEFINED, ClusterAssignment, ClusterParams, _check_inputs
from .laf import RunReport, gate_predictions, post_processing, update_partial_neighbors
from .neighbors import QueryCounter, distances_to, range_query
from .vecspace import Dataset

__all__ = [
    "SamplingParams",
    "dbscan_pp",
    "laf_dbscan_pp",
    "predicted_core_ratio",
    "effective_fraction",
    "EmptySampleError",
]


@dataclass(frozen=True)
class SamplingParams:
    """Sample fraction ``p`` (or ``delta`` plus the predicted core ratio when ``auto_p``)."""

    p: float = 1.0
    delta: float = 0.1
    seed: int = 0
    auto_p: bool = False
    # assign outside points to the nearest core point even beyond eps
    unbounded_assignment: bool = False

    def __post_init__(self):
        if not self.auto_p and not 0.0 < self.p <= 1.0:
            raise ValueError(f"sample fraction p must lie in (0, 1], got {self.p}")
        if not 0.0 <= self.delta < 1.0:
            raise ValueError(f"delta must lie in [0, 1), got {self.delta}")


def predicted_core_ratio(dataset: Dataset, params: ClusterParams, estimator) -> float:
    """Fraction of points whose estimated cardinality reaches ``tau``."""
    if dataset.n == 0:
        return 0.0
    pred = gate_predictions(estimator, dataset, np.arange(dataset.n), params.eps)
    return float(np.count_nonzero(pred >= params.tau)) / dataset.n


def effective_fraction(dataset, params, s: SamplingParams, estimator=None) -> float:
    if not s.auto_p:
        return s.p
    if estimator is None:
        raise ValueError("auto_p needs a cardinality estimator to compute the core ratio")
    return min(1.0, s.delta + predicted_core_ratio(dataset, params, estimator))


class EmptySampleError(ValueError):
    """The sample fraction selects no point of the dataset."""


def _draw_sample(n: int, p: float, seed: int) -> np.ndarray:
    if p * n < 1:
        raise EmptySampleError(f"sample fraction {p} of {n} points selects no point")
    m = min(n, math.ceil(p * n))
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=m, replace=False))


def _grow_and_assign(dataset, params, sample, neighbors, is_core, unbounded):
    """Cluster growth over sampled core points, then nearest-core assignment.

    ``neighbors[p]`` holds the full-dataset neighbourhood of each queried
    sampled point; ``is_core`` marks sampled points found to be core.
    Only sampled points are labelled during growth; points outside the
    sample wait for the nearest-core step.
    """
    n = dataset.n
    labels = np.full(n, UNDEFINED, dtype=np.int64)
    in_sample = np.zeros(n, dtype=bool)
    in_sample[sample] = True
    c = 0
    for p in sample.tolist():
        if labels[p] != UNDEFINED:
            continue
        if not is_core[p]:
            labels[p] = NOISE
            continue
        c += 1
        labels[p] = c
        seeds = deque(q for q in neighbors[p].tolist() if q != p and in_sample[q])
        while seeds:
            q = seeds.popleft()
            if labels[q] == NOISE:
                labels[q] = c
            if labels[q] != UNDEFINED:
                continue
            labels[q] = c
            if is_core[q]:
                seeds.extend(
                    r for r in neighbors[q].tolist()
                    if in_sample[r] and labels[r] in (UNDEFINED, NOISE)
                )

    outside = np.flatnonzero(labels == UNDEFINED)
    cores = np.flatnonzero(is_core)
    if outside.size and cores.size:
        vectors = dataset.compute_vectors
        core_vectors = vectors[cores]
        for q in outside.tolist():
            d = distances_to(core_vectors, vectors[q], params.metric)
            k = int(np.argmin(d))
            if unbounded or d[k] < params.eps:
                labels[q] = labels[cores[k]]
    labels[labels == UNDEFINED] = NOISE
    return ClusterAssignment(labels, c)


def dbscan_pp(
    dataset: Dataset,
    params: ClusterParams,
    s: SamplingParams,
    estimator=None,
    counter: QueryCounter | None = None,
):
    """DBSCAN++: range queries only for a uniform sample of ``ceil(p * n)`` points.

    Sampled points with at least ``tau`` neighbours in the full dataset are
    core; clusters grow over the sampled points; every remaining point
    joins the cluster of its closest core point if that point lies within
    ``eps`` (or unconditionally with ``unbounded_assignment``), otherwise
    it is noise. ``estimator`` is only needed for ``auto_p``.
    """
    _check_inputs(dataset, params)
    started = time.perf_counter()
    report = RunReport()
    p = effective_fraction(dataset, params, s, estimator)
    sample = _draw_sample(dataset.n, p, s.seed)

    is_core = np.zeros(dataset.n, dtype=bool)
    neighbors = {}
    for q in sample.tolist():
        nb = range_query(dataset, params.metric, q, params.eps, counter)
        report.executed_queries += 1
        neighbors[q] = nb
        is_core[q] = len(nb) >= params.tau

    result = _grow_and_assign(dataset, params, sample, neighbors, is_core,
                              s.unbounded_assignment)
    report.wall_time = time.perf_counter() - started
    return result, report


def laf_dbscan_pp(
    dataset: Dataset,
    params: ClusterParams,
    s: SamplingParams,
    estimator,
    counter: QueryCounter | None = None,
    merge_rng: np.random.Generator | None = None,
):
    """DBSCAN++ with each sampled point's query gated by the estimator.

    All sampled points pass the gate before any query runs, so a skipped
    point collects partial neighbours from every executed query. The merge
    repair runs after outside points have been assigned.
    """
    _check_inputs(dataset, params)
    started = time.perf_counter()
    report = RunReport()
    p = effective_fraction(dataset, params, s, estimator)
    sample = _draw_sample(dataset.n, p, s.seed)

    pred = gate_predictions(estimator, dataset, sample, params.eps)
    report.estimator_calls = len(sample)
    passed = pred >= params.gate
    e = {int(q): set() for q in sample[~passed].tolist()}
    report.skipped_queries = len(e)

    is_core = np.zeros(dataset.n, dtype=bool)
    neighbors = {}
    for q in sample[passed].tolist():
        nb = range_query(dataset, params.metric, q, params.eps, counter)
        report.executed_queries += 1
        update_partial_neighbors(q, nb.tolist(), e)
        neighbors[q] = nb
        is_core[q] = len(nb) >= params.tau

    result = _grow_and_assign(dataset, params, sample, neighbors, is_core,
                              s.unbounded_assignment)
    result = post_processing(result, e, params.tau, merge_rng, report)
    report.wall_time = time.perf_counter() - started
    return result, report
