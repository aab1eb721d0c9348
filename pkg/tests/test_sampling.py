import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from lafdbscan.cardest import OracleCardinalityEstimator
from lafdbscan.dbscan import NOISE, ClusterParams, dbscan, same_partition
from lafdbscan.neighbors import QueryCounter, range_query
from lafdbscan.sampling import (
    SamplingParams,
    _draw_sample,
    dbscan_pp,
    effective_fraction,
    laf_dbscan_pp,
    predicted_core_ratio,
)
from lafdbscan.synthetic import unit_circle
from lafdbscan.vecspace import Dataset
from oracles import random_sphere_points
from stubs import ConstantEstimator


def _random_data(seed, n, dim=4):
    return Dataset(random_sphere_points(np.random.default_rng(seed), n, dim), normalize=True)


def test_worked_example_full_sample(circle6):
    params = ClusterParams(0.01, 3)
    result, report = dbscan_pp(circle6, params, SamplingParams(p=1.0))
    assert result.labels.tolist() == [1, 1, 1, -1, -1, -1]
    assert report.executed_queries == 6


def test_predicted_core_ratio(circle6):
    params = ClusterParams(0.01, 3)
    oracle = OracleCardinalityEstimator().fit(circle6)
    assert predicted_core_ratio(circle6, params, oracle) == pytest.approx(1 / 6)
    assert predicted_core_ratio(circle6, params, ConstantEstimator(0)) == 0.0
    assert predicted_core_ratio(Dataset(np.zeros((0, 2))), params, oracle) == 0.0


def test_auto_p(circle6):
    params = ClusterParams(0.01, 3)
    oracle = OracleCardinalityEstimator().fit(circle6)
    s = SamplingParams(delta=0.5, auto_p=True)
    assert effective_fraction(circle6, params, s, oracle) == pytest.approx(0.5 + 1 / 6)
    s = SamplingParams(delta=0.9, auto_p=True)
    assert effective_fraction(circle6, params, s, ConstantEstimator(np.inf)) == 1.0
    with pytest.raises(ValueError, match="estimator"):
        effective_fraction(circle6, params, s)


def test_sampling_params_validation():
    for bad in (dict(p=0.0), dict(p=1.5), dict(delta=-0.1), dict(delta=1.0)):
        with pytest.raises(ValueError):
            SamplingParams(**bad)


def test_sample_too_small(circle6):
    with pytest.raises(ValueError, match="selects no point"):
        dbscan_pp(circle6, ClusterParams(0.01, 3), SamplingParams(p=0.1))


def test_sample_draw_deterministic_and_sized():
    a = _draw_sample(1000, 0.123, 5)
    assert len(a) == math.ceil(0.123 * 1000)
    assert np.array_equal(a, _draw_sample(1000, 0.123, 5))
    assert len(np.unique(a)) == len(a)
    assert not np.array_equal(a, _draw_sample(1000, 0.123, 6))


def test_no_core_in_sample_all_noise(circle6):
    result, _ = dbscan_pp(circle6, ClusterParams(0.01, 6), SamplingParams(p=1.0))
    assert np.all(result.labels == NOISE)


def test_always_zero_estimator_all_noise():
    data = unit_circle([0, 1, 2, 3])
    result, report = laf_dbscan_pp(data, ClusterParams(0.5, 2), SamplingParams(p=1.0),
                                   ConstantEstimator(0))
    assert np.all(result.labels == NOISE)
    assert report.executed_queries == 0 and report.skipped_queries == 4


def test_always_huge_estimator_equals_dbscan_pp(blobs):
    data, _ = blobs
    params = ClusterParams(0.12, 5)
    s = SamplingParams(p=0.4, seed=3)
    a, ra = dbscan_pp(data, params, s)
    b, rb = laf_dbscan_pp(data, params, s, ConstantEstimator(np.inf))
    assert a.labels.tolist() == b.labels.tolist()
    assert rb.skipped_queries == 0 and rb.executed_queries == ra.executed_queries


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 100), st.sampled_from([0.05, 0.1, 0.2, 0.4]),
       st.integers(1, 6))
def test_full_sample_equals_dbscan(seed, n, eps, tau):
    data = _random_data(seed, n)
    params = ClusterParams(eps, tau)
    ref = dbscan(data, params)
    pp, _ = dbscan_pp(data, params, SamplingParams(p=1.0, seed=seed))
    assert same_partition(pp, ref)
    oracle = OracleCardinalityEstimator().fit(data)
    laf, _ = laf_dbscan_pp(data, params, SamplingParams(p=1.0, seed=seed), oracle)
    assert same_partition(laf, ref)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(5, 100), st.sampled_from([0.05, 0.1, 0.2, 0.4]),
       st.integers(1, 6), st.floats(0.1, 1.0), st.booleans())
def test_sampled_invariants(seed, n, eps, tau, p, unbounded):
    assume(p * n >= 1)
    data = _random_data(seed, n)
    params = ClusterParams(eps, tau)
    s = SamplingParams(p=p, seed=seed, unbounded_assignment=unbounded)
    counter = QueryCounter()
    result, report = dbscan_pp(data, params, s, counter=counter)
    result.validate()
    m = math.ceil(p * n)
    assert report.executed_queries == counter.value == m
    oracle = OracleCardinalityEstimator().fit(data)
    laf, laf_report = laf_dbscan_pp(data, params, s, oracle)
    assert same_partition(laf, result)
    assert laf_report.executed_queries + laf_report.skipped_queries == m

    sample = set(_draw_sample(n, p, seed).tolist())
    counts = np.array([len(range_query(data, "cosine", q, eps)) for q in range(n)])
    cores = [q for q in sample if counts[q] >= tau]
    X = data.compute_vectors
    for q in range(n):
        if q in sample or result.labels[q] == NOISE:
            continue
        d = 1 - X[cores] @ X[q]
        nearest = cores[int(np.argmin(d))]
        assert result.labels[q] == result.labels[nearest]
        if not unbounded:
            assert d.min() < eps
    if unbounded and cores:
        assert not np.any(result.labels[[q for q in range(n) if q not in sample]] == NOISE)
