"""Clustering quality against a reference assignment.

Label arrays use ``-1`` for noise. By default all noise points of a
partition count as one shared label (``noise="shared"``); with
``noise="singleton"`` each noise point is its own label.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .dbscan import NOISE, ClusterAssignment, ClusterParams, dbscan

__all__ = [
    "ContingencyTable",
    "GridCell",
    "MissedClusterReport",
    "contingency_table",
    "adjusted_rand_index",
    "adjusted_mutual_information",
    "expected_mutual_information",
    "mutual_information",
    "entropy",
    "noise_ratio",
    "cluster_count",
    "parameter_grid_search",
    "missed_cluster_report",
]


def _labels(x) -> np.ndarray:
    if isinstance(x, ClusterAssignment):
        return x.labels
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise ValueError("labels must be one-dimensional")
    return arr


def _prepare(truth, pred, noise):
    a, b = _labels(truth), _labels(pred)
    if a.shape != b.shape:
        raise ValueError(f"label arrays differ in length: {a.shape[0]} vs {b.shape[0]}")
    if noise == "singleton":
        a, b = _explode_noise(a), _explode_noise(b)
    elif noise != "shared":
        raise ValueError(f"noise must be 'shared' or 'singleton', got {noise!r}")
    return a, b


def _explode_noise(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64).copy()
    mask = x == NOISE
    if mask.any():
        base = min(int(x.min()), NOISE) - 1
        x[mask] = base - np.arange(np.count_nonzero(mask))
    return x


@dataclass
class ContingencyTable:
    counts: np.ndarray  # rows: truth labels, columns: predicted labels
    row_sums: np.ndarray
    col_sums: np.ndarray
    n: int

    @property
    def is_matching(self) -> bool:
        """Both partitions are equal up to relabelling."""
        nz = self.counts > 0
        return bool(np.all(nz.sum(axis=0) == 1) and np.all(nz.sum(axis=1) == 1))


def contingency_table(truth, pred, noise: str = "shared") -> ContingencyTable:
    a, b = _prepare(truth, pred, noise)
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    r = int(ai.max()) + 1 if ai.size else 0
    k = int(bi.max()) + 1 if bi.size else 0
    counts = np.zeros((r, k), dtype=np.int64)
    np.add.at(counts, (ai, bi), 1)
    return ContingencyTable(counts, counts.sum(axis=1), counts.sum(axis=0), int(a.size))


def _comb2_sum(values) -> int:
    return sum(v * (v - 1) // 2 for v in values)


def adjusted_rand_index(truth, pred, noise: str = "shared") -> float:
    """Hubert-Arabie adjusted Rand index.

    Pair counts are summed as exact integers; a zero denominator (both
    partitions trivial and identical, or fewer than two points) gives 1.0.
    """
    t = contingency_table(truth, pred, noise)
    total = t.n * (t.n - 1) // 2
    index = _comb2_sum(t.counts[t.counts > 1].tolist())
    sa = _comb2_sum(t.row_sums.tolist())
    sb = _comb2_sum(t.col_sums.tolist())
    num = 2 * (index * total - sa * sb)
    den = (sa + sb) * total - 2 * sa * sb
    if den == 0:
        return 1.0 if t.is_matching else 0.0
    return num / den


def entropy(sizes, n: int) -> float:
    p = np.asarray(sizes, dtype=np.float64) / n
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def mutual_information(t: ContingencyTable) -> float:
    nz = t.counts > 0
    nij = t.counts[nz].astype(np.float64)
    outer = np.outer(t.row_sums, t.col_sums)[nz].astype(np.float64)
    return float(np.sum(nij / t.n * (np.log(t.n * nij) - np.log(outer))))


def expected_mutual_information(row_sums, col_sums, n: int) -> float:
    """Exact E[MI] under the hypergeometric (fixed marginals) model.

    Terms depend only on the pair of marginal sizes, so equal sizes are
    grouped; each term's probability is evaluated through log-factorials.
    """
    if n <= 1:
        return 0.0
    ua, ca = np.unique(np.asarray(row_sums, dtype=np.int64), return_counts=True)
    ub, cb = np.unique(np.asarray(col_sums, dtype=np.int64), return_counts=True)
    A = np.repeat(ua, ub.size)
    B = np.tile(ub, ua.size)
    mult = np.repeat(ca, ub.size) * np.tile(cb, ua.size)

    start = np.maximum(1, A + B - n)
    stop = np.minimum(A, B)
    lens = np.maximum(stop - start + 1, 0)
    keep = lens > 0
    A, B, mult, start, lens = A[keep], B[keep], mult[keep], start[keep], lens[keep]
    if lens.sum() == 0:
        return 0.0
    pair = np.repeat(np.arange(A.size), lens)
    offsets = np.cumsum(lens) - lens
    nij = start[pair] + (np.arange(lens.sum()) - offsets[pair])
    a, b = A[pair].astype(np.float64), B[pair].astype(np.float64)
    nijf = nij.astype(np.float64)

    log_p = (
        gammaln(a + 1) + gammaln(b + 1) + gammaln(n - a + 1) + gammaln(n - b + 1)
        - gammaln(n + 1) - gammaln(nijf + 1) - gammaln(a - nijf + 1)
        - gammaln(b - nijf + 1) - gammaln(n - a - b + nijf + 1)
    )
    term = nijf / n * (np.log(n * nijf) - np.log(a * b)) * np.exp(log_p)
    return float(np.sum(term * mult[pair]))


def adjusted_mutual_information(truth, pred, noise: str = "shared") -> float:
    """AMI with arithmetic-mean normalization.

    Identical partitions score exactly 1.0. Otherwise a vanishing
    denominator gives 0.0.
    """
    t = contingency_table(truth, pred, noise)
    if t.n == 0 or t.is_matching:
        # identical partitions: MI equals both entropies, so the ratio is exactly 1
        return 1.0
    mi = mutual_information(t)
    emi = expected_mutual_information(t.row_sums, t.col_sums, t.n)
    h = 0.5 * (entropy(t.row_sums, t.n) + entropy(t.col_sums, t.n))
    den = h - emi
    if abs(den) <= 1e-12 * max(1.0, h):
        return 0.0
    return float((mi - emi) / den)


def noise_ratio(c) -> float:
    labels = _labels(c)
    if labels.size == 0:
        return 0.0
    return float(np.count_nonzero(labels == NOISE)) / labels.size


def cluster_count(c) -> int:
    labels = _labels(c)
    return int(np.unique(labels[labels > 0]).size)


@dataclass(frozen=True)
class GridCell:
    eps: float
    tau: int
    noise_ratio: float
    num_clusters: int
    qualifies: bool


def parameter_grid_search(
    dataset,
    eps_grid,
    tau_grid,
    max_noise_ratio: float = 0.6,
    min_clusters: int = 20,
    metric="cosine",
    n_jobs: int = 1,
) -> list[GridCell]:
    """Run reference DBSCAN on every (eps, tau) cell.

    A cell qualifies when its noise ratio is below ``max_noise_ratio`` and
    it has more than ``min_clusters`` clusters. Cells come back in
    eps-major order.
    """
    eps_grid, tau_grid = list(eps_grid), list(tau_grid)
    if not eps_grid or not tau_grid:
        raise ValueError("eps_grid and tau_grid must be non-empty")
    cells = [(e, t) for e in eps_grid for t in tau_grid]

    def run(cell):
        e, t = cell
        result = dbscan(dataset, ClusterParams(eps=e, tau=t, metric=metric))
        nr, k = noise_ratio(result), cluster_count(result)
        return GridCell(float(e), int(t), nr, k, nr < max_noise_ratio and k > min_clusters)

    if n_jobs == 1:
        return [run(cell) for cell in cells]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(run, cells))


@dataclass(frozen=True)
class MissedClusterReport:
    missed_clusters: int
    total_clusters: int
    missed_points: int
    total_clustered_points: int

    @property
    def avg_missed_size(self) -> float:
        if self.missed_clusters == 0:
            return 0.0
        return self.missed_points / self.missed_clusters

    def as_rows(self) -> list[tuple[str, object]]:
        return [
            ("missed_clusters", self.missed_clusters),
            ("total_clusters", self.total_clusters),
            ("missed_points", self.missed_points),
            ("total_clustered_points", self.total_clustered_points),
            ("avg_missed_cluster_size", f"{self.avg_missed_size:.6f}"),
        ]


def missed_cluster_report(truth, pred) -> MissedClusterReport:
    """Count reference clusters whose every point is noise in ``pred``."""
    a, b = _labels(truth), _labels(pred)
    if a.shape != b.shape:
        raise ValueError(f"label arrays differ in length: {a.shape[0]} vs {b.shape[0]}")
    clustered = a != NOISE
    ids = np.unique(a[clustered])
    mc = mp = 0
    for cid in ids.tolist():
        members = a == cid
        if np.all(b[members] == NOISE):
            mc += 1
            mp += int(np.count_nonzero(members))
    return MissedClusterReport(mc, int(ids.size), mp, int(np.count_nonzero(clustered)))
