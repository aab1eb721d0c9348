import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn import metrics as skm

from lafdbscan.dbscan import ClusterAssignment, ClusterParams, dbscan
from lafdbscan.metrics import (
    adjusted_mutual_information,
    adjusted_rand_index,
    cluster_count,
    contingency_table,
    expected_mutual_information,
    missed_cluster_report,
    noise_ratio,
    parameter_grid_search,
)
from lafdbscan.synthetic import sphere_mixture
from oracles import brute_ami, brute_ari, brute_emi, permutation_emi, set_partitions

labels = st.lists(st.integers(-1, 5), min_size=1, max_size=40)


def test_hand_examples():
    assert adjusted_rand_index([0, 0, 1, 1], [1, 1, 0, 0]) == 1.0
    assert adjusted_rand_index([0, 0, 1, 1], [0, 1, 0, 1]) == -0.5
    assert adjusted_mutual_information([0, 0, 1, 1], [1, 1, 0, 0]) == pytest.approx(1.0)
    # E[MI] = ln(2)/3 for this pair (hand-derived hypergeometric sum), MI = 0
    assert expected_mutual_information([2, 2], [2, 2], 4) == pytest.approx(math.log(2) / 3, abs=1e-15)
    assert adjusted_mutual_information([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(-0.5, abs=1e-12)


def test_degenerate_conventions():
    one = [1] * 5
    assert adjusted_mutual_information(one, one) == 1.0
    assert adjusted_rand_index(one, one) == 1.0
    singles = list(range(5))
    assert adjusted_mutual_information(singles, singles) == 1.0
    assert adjusted_rand_index(singles, singles) == 1.0
    assert adjusted_rand_index(one, singles) == 0.0
    assert adjusted_mutual_information(one, singles) == 0.0
    assert adjusted_rand_index([3], [7]) == 1.0
    assert adjusted_mutual_information([], []) == 1.0


def test_length_mismatch():
    with pytest.raises(ValueError, match="length"):
        adjusted_rand_index([0, 1], [0])
    with pytest.raises(ValueError, match="length"):
        adjusted_mutual_information([0, 1], [0])
    with pytest.raises(ValueError, match="noise"):
        adjusted_rand_index([0, 1], [0, 1], noise="drop")


def test_noise_conventions():
    truth = [-1, -1, 1, 1]
    pred = [1, -1, -1, 1]
    shared = adjusted_rand_index(truth, pred)
    single = adjusted_rand_index(truth, pred, noise="singleton")
    assert shared == pytest.approx(brute_ari(truth, pred))
    assert single == pytest.approx(brute_ari([-1, -2, 1, 1], [1, -1, -2, 1]))
    assert adjusted_rand_index([-1, -1, 1], [-1, -1, 1], noise="singleton") == 1.0


def test_contingency_table_marginals():
    t = contingency_table([0, 0, 1, 2, 2, 2], [5, 5, 5, -1, -1, 3])
    assert t.counts.sum() == t.n == 6
    assert t.row_sums.tolist() == t.counts.sum(axis=1).tolist() == [2, 1, 3]
    assert t.col_sums.tolist() == t.counts.sum(axis=0).tolist()
    assert not t.is_matching


@pytest.mark.parametrize("n", range(0, 6))
def test_exhaustive_small_partitions(n):
    parts = list(set_partitions(n))
    for a in parts:
        for b in parts:
            assert abs(adjusted_rand_index(a, b) - brute_ari(a, b)) < 1e-9
            assert abs(adjusted_mutual_information(a, b) - brute_ami(a, b)) < 1e-9


def test_emi_oracle_agrees_with_permutation_enumeration():
    for a, b in [([0, 0, 1, 1], [0, 1, 0, 1]), ([0, 0, 0, 1, 2], [0, 1, 1, 1, 1]),
                 ([0, 1, 1, 2, 2, 2], [0, 0, 1, 1, 2, 3])]:
        sizes = lambda x: list(np.unique(x, return_counts=True)[1])  # noqa: E731
        assert abs(brute_emi(sizes(a), sizes(b), len(a)) - permutation_emi(a, b)) < 1e-12


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 30), st.data())
def test_emi_matches_direct_summation(n, data):
    def marginal():
        cuts = sorted(data.draw(st.lists(st.integers(1, n - 1), unique=True, max_size=6))) if n > 1 else []
        edges = [0] + cuts + [n]
        return [edges[i + 1] - edges[i] for i in range(len(edges) - 1)]

    a, b = marginal(), marginal()
    assert abs(expected_mutual_information(a, b, n) - brute_emi(a, b, n)) < 1e-9


@settings(max_examples=150, deadline=None)
@given(labels, st.randoms(use_true_random=False))
def test_relabel_invariance_and_symmetry(a, rnd):
    b = a[:]
    rnd.shuffle(b)
    ids = sorted(set(a) - {-1})
    perm = ids[:]
    rnd.shuffle(perm)
    relabel = dict(zip(ids, perm))
    a2 = [relabel.get(v, -1) for v in a]
    assert adjusted_rand_index(a, b) == pytest.approx(adjusted_rand_index(a2, b), abs=1e-12)
    assert adjusted_mutual_information(a, b) == pytest.approx(adjusted_mutual_information(a2, b), abs=1e-12)
    assert adjusted_rand_index(a, b) == pytest.approx(adjusted_rand_index(b, a), abs=1e-12)
    assert adjusted_rand_index(a, a) == 1.0
    assert adjusted_mutual_information(a, a) == pytest.approx(1.0)
    assert -1.0 <= adjusted_rand_index(a, b) <= 1.0
    assert adjusted_mutual_information(a, b) <= 1.0 + 1e-12


def test_random_partitions_against_oracle_and_sklearn():
    rng = np.random.default_rng(2024)
    for _ in range(60):
        n = int(rng.integers(2, 120))
        a = rng.integers(0, rng.integers(1, 12), size=n).tolist()
        b = rng.integers(0, rng.integers(1, 12), size=n).tolist()
        ari, ami = adjusted_rand_index(a, b), adjusted_mutual_information(a, b)
        assert abs(ari - brute_ari(a, b)) < 1e-9
        assert abs(ami - brute_ami(a, b)) < 1e-9
        if len(set(a)) > 1 and len(set(b)) > 1:
            assert abs(ari - skm.adjusted_rand_score(a, b)) < 1e-9
            assert abs(ami - skm.adjusted_mutual_info_score(a, b)) < 1e-9


def test_emi_large_n_finite():
    emi = expected_mutual_information([3000, 2000, 5000], [5000, 4000, 1000], 10000)
    assert np.isfinite(emi) and 0.0 <= emi < 1e-3


def test_noise_ratio_and_count(circle6):
    c = dbscan(circle6, ClusterParams(0.01, 3))
    assert (noise_ratio(c), cluster_count(c)) == (0.5, 1)
    assert (noise_ratio([-1, -1]), cluster_count([-1, -1])) == (1.0, 0)
    assert (noise_ratio([1, 2, 3]), cluster_count([1, 2, 3])) == (0.0, 3)
    assert noise_ratio([]) == 0.0


class TestMissedClusters:
    def test_identical(self):
        r = missed_cluster_report([1, 1, 2, -1], [1, 1, 2, -1])
        assert (r.missed_clusters, r.missed_points, r.avg_missed_size) == (0, 0, 0.0)

    def test_one_missed(self):
        truth = ClusterAssignment([1, 1, 1, 2, 2])
        pred = ClusterAssignment([1, 1, 1, -1, -1])
        r = missed_cluster_report(truth, pred)
        assert (r.missed_clusters, r.total_clusters, r.missed_points) == (1, 2, 2)
        assert r.avg_missed_size == 2.0
        assert dict(r.as_rows())["avg_missed_cluster_size"] == "2.000000"

    def test_all_noise(self):
        truth = [1, 1, 2, 3, -1]
        r = missed_cluster_report(truth, [-1] * 5)
        assert r.missed_clusters == r.total_clusters == 3
        assert r.missed_points == r.total_clustered_points == 4

    def test_partial_miss_not_counted(self):
        r = missed_cluster_report([1, 1, 2, 2], [-1, 1, -1, -1])
        assert r.missed_clusters == 1 and r.missed_points == 2

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            missed_cluster_report([1], [1, 1])


class TestGridSearch:
    def test_toy_set_never_qualifies(self, circle6):
        cells = parameter_grid_search(circle6, [0.01, 0.1, 1.0], [1, 2, 3])
        assert len(cells) == 9
        assert not any(c.qualifies for c in cells)
        assert (cells[2].eps, cells[2].tau) == (0.01, 3)
        assert (cells[2].noise_ratio, cells[2].num_clusters) == (0.5, 1)

    def test_single_qualifying_cell(self, circle6):
        cells = parameter_grid_search(circle6, [0.01], [2], max_noise_ratio=0.6, min_clusters=1)
        # tau 2 at eps 0.01: {0,5,10} and {120,125} form clusters, 240 is noise
        assert len(cells) == 1 and cells[0].qualifies
        assert cells[0].num_clusters == 2

    def test_parallel_same_as_serial(self):
        data, _ = sphere_mixture(200, 8, components=4, spread=0.4, seed=1)
        grid = ([0.05, 0.1, 0.2], [3, 5])
        assert parameter_grid_search(data, *grid) == parameter_grid_search(data, *grid, n_jobs=3)

    def test_empty_grid(self, circle6):
        with pytest.raises(ValueError):
            parameter_grid_search(circle6, [], [2])

    def test_structure_on_mixture(self):
        # more components than the qualification bound; moderate eps qualifies
        data, _ = sphere_mixture(1500, 16, components=30, spread=0.3, background=0.1, seed=4)
        cells = parameter_grid_search(data, [0.02, 0.1, 0.5], [5])
        by_eps = {c.eps: c for c in cells}
        assert by_eps[0.02].noise_ratio > by_eps[0.1].noise_ratio
        assert by_eps[0.5].num_clusters < by_eps[0.1].num_clusters
        assert by_eps[0.1].qualifies
