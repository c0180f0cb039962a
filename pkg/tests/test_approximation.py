import math
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from process.approximation import ApproxConfig, approximate_hausdorff, benchmark, complexity_probe, swap_symmetry_gap
from process.datagen import FAMILIES, GenSpec, generate_pair
from process.geometry import PointSet
from process.oracle import hausdorff_exact, nearest_distances_exact
from utils.general import UsageError

@st.composite
def instances(draw, max_size=60, dims=(1, 2, 4, 8)):
    family = draw(st.sampled_from(FAMILIES))
    m = draw(st.integers(min_value=1, max_value=max_size))
    n = draw(st.integers(min_value=1, max_value=max_size))
    d = draw(st.sampled_from(dims))
    seed = draw(st.integers(min_value=0, max_value=2 ** 32 - 1))
    return generate_pair(GenSpec(family, m, n, d, seed))

@pytest.mark.parametrize('mode', ['cached', 'dual'])
def test_self_comparison(mode):
    s = PointSet.from_rows([[0.0, 0.0], [1.0, 0.0], [0.0, 3.0], [2.0, 2.0]])
    result = approximate_hausdorff(s, s, ApproxConfig(mode=mode))
    assert result.value == 0.0
    assert result.bucket_map == ((0,), (1,), (2,), (3,))
    assert result.uncovered_count == 0

def test_hand_traced_fixture():
    a = PointSet.from_rows([[0.0], [10.0]])
    b = PointSet.from_rows([[0.0]])
    result = approximate_hausdorff(a, b)

    assert result.indexed_side == 'B'
    assert result.forward_estimates.tolist() == [0.0, 10.0]
    assert result.bucket_map == ((0, 1),)
    assert result.backward_estimates.tolist() == [0.0]
    assert result.value == 10.0 == hausdorff_exact(a, b).value

    as_result = result.to_hausdorff_result()
    assert as_result.mode == 'approx-cached'
    assert (as_result.forward.witness_src, as_result.forward.witness_dst) == (1, 0)

def test_uncovered_policies():
    a = PointSet.from_rows([[0.0]])
    b = PointSet.from_rows([[0.0], [100.0]])

    fallback = approximate_hausdorff(a, b, ApproxConfig(swap_policy='second'))
    assert fallback.uncovered_count == 1
    assert fallback.fallback_cost == 1
    assert fallback.backward_estimates.tolist() == [0.0, 100.0]
    assert fallback.value == 100.0

    infinity = approximate_hausdorff(a, b, ApproxConfig(uncovered_policy='infinity', swap_policy='second'))
    assert infinity.uncovered_count == 1
    assert infinity.fallback_cost == 0
    assert math.isinf(infinity.backward_estimates[1])
    # suprema range over the finite estimates only
    assert infinity.backward_sup == 0.0
    assert infinity.value == 0.0

def test_swap_policies():
    small = PointSet.from_rows([[0.0], [1.0]])
    large = PointSet(np.arange(5, dtype=float).reshape(-1, 1))

    smaller = approximate_hausdorff(small, large)
    assert smaller.indexed_side == 'A'
    assert smaller.query_count == 5
    assert len(smaller.bucket_map) == 2

    second = approximate_hausdorff(small, large, ApproxConfig(swap_policy='index-second-arg'))
    assert second.indexed_side == 'B'
    assert second.query_count == 2

    # estimates keep their A -> B meaning whichever side was indexed
    assert smaller.forward_estimates.shape == (2,) and smaller.backward_estimates.shape == (5,)
    assert smaller.value == second.value == 3.0

def test_dual_mode_counts_both_directions():
    a, b = generate_pair(GenSpec('uniform-cube', 30, 20, 3, seed=1))
    result = approximate_hausdorff(a, b, ApproxConfig(mode='dual'))
    assert result.query_count == 50
    assert result.fallback_cost == 0

def test_results_are_read_only():
    a, b = generate_pair(GenSpec('uniform-cube', 5, 5, 2, seed=1))
    result = approximate_hausdorff(a, b)
    with pytest.raises(ValueError):
        result.forward_estimates[0] = 0.0

def test_invalid_configs():
    with pytest.raises(UsageError):
        ApproxConfig(mode='lazy')
    with pytest.raises(UsageError):
        ApproxConfig(uncovered_policy='skip')
    with pytest.raises(UsageError):
        ApproxConfig(backend='kdtree', params={'eps': -1})
    with pytest.raises(UsageError):
        approximate_hausdorff(PointSet.from_rows([[0.0]]), PointSet.from_rows([[0.0, 1.0]]))

def test_config_aliases_resolve():
    cfg = ApproxConfig(backend='kdtree', uncovered_policy='infinity', swap_policy='second', params={'eps': 0.2})
    assert cfg.backend == 'kdtree-eps'
    assert cfg.uncovered_policy == 'record-infinity'
    assert cfg.swap_policy == 'index-second-arg'
    assert cfg.epsilon == 0.2
    assert cfg.to_dict()['params'] == {'eps': 0.2, 'leaf_size': 8}

@settings(max_examples=50, deadline=None)
@given(instances(max_size=200), st.sampled_from([0.05, 0.1, 0.5]))
def test_dual_kdtree_sandwich(pair, eps):
    a, b = pair
    exact = hausdorff_exact(a, b).value
    result = approximate_hausdorff(a, b, ApproxConfig(mode='dual', backend='kdtree', params={'eps': eps}))
    assert exact <= result.value <= (1 + eps) * exact + 1e-9

@settings(max_examples=60, deadline=None)
@given(instances(dims=(1, 2, 4, 8, 16)))
def test_dual_exact_equals_oracle(pair):
    a, b = pair
    result = approximate_hausdorff(a, b, ApproxConfig(mode='dual'))
    exact = hausdorff_exact(a, b)
    assert result.value == exact.value
    assert result.forward_sup == exact.forward.value
    assert result.backward_sup == exact.backward.value

@settings(max_examples=60, deadline=None)
@given(instances(), st.sampled_from(['exact', 'kdtree', 'graph']))
def test_cached_overestimates(pair, backend):
    a, b = pair
    result = approximate_hausdorff(a, b, ApproxConfig(backend=backend))
    assert result.value >= hausdorff_exact(a, b).value - 1e-12

    assert np.all(result.forward_estimates >= nearest_distances_exact(a, b))
    assert np.all(result.backward_estimates >= nearest_distances_exact(b, a))

@settings(max_examples=60, deadline=None)
@given(instances())
def test_cached_exact_scan_with_fallback_is_exact(pair):
    a, b = pair
    assert approximate_hausdorff(a, b).value == hausdorff_exact(a, b).value

@settings(max_examples=30, deadline=None)
@given(instances())
def test_buckets_partition_the_query_set(pair):
    a, b = pair
    result = approximate_hausdorff(a, b, ApproxConfig(backend='kdtree'))
    queried = len(b) if result.indexed_side == 'A' else len(a)
    members = sorted(i for bucket in result.bucket_map for i in bucket)
    assert members == list(range(queried))
    assert result.uncovered_count == sum(1 for bucket in result.bucket_map if not bucket)
    assert result.query_count == queried

def test_seeded_runs_are_identical():
    a, b = generate_pair(GenSpec('gaussian-clusters', 120, 90, 6, seed=3))
    cfg = ApproxConfig(mode='cached', backend='graph')
    first, second = approximate_hausdorff(a, b, cfg, seed=17), approximate_hausdorff(a, b, cfg, seed=17)
    assert first.value == second.value
    assert first.bucket_map == second.bucket_map
    assert first.visit_count == second.visit_count

def test_pooled_queries_match_in_process():
    a, b = generate_pair(GenSpec('uniform-cube', 80, 60, 4, seed=2))
    cfg = ApproxConfig(backend='kdtree')
    pooled = approximate_hausdorff(a, b, ApproxConfig(backend='kdtree', workers=2))
    single = approximate_hausdorff(a, b, cfg)
    assert pooled.value == single.value
    assert pooled.bucket_map == single.bucket_map
    assert pooled.visit_count == single.visit_count

def test_swap_symmetry_gap():
    a, b = generate_pair(GenSpec('uniform-cube', 40, 25, 3, seed=6))
    assert swap_symmetry_gap(a, b) == 0.0
    assert swap_symmetry_gap(a, b, ApproxConfig(mode='dual', backend='kdtree')) >= 0.0

def test_complexity_probe_counts():
    table = complexity_probe([1], [1], 2)
    assert table['query_count'].tolist() == [1]

    table = complexity_probe([1000], [64], 8, ApproxConfig(backend='kdtree'))
    assert table.loc[0, 'query_count'] == 1000
    assert list(table.columns) == ['m', 'n', 'd', 'query_count', 'visit_count', 'visits_per_query', 'wall_seconds']

    with pytest.raises(UsageError):
        complexity_probe([], [10], 2)

@pytest.mark.slow
def test_kdtree_visits_grow_sublinearly():
    n_list = [2 ** k for k in range(10, 15)]
    table = complexity_probe([1000], n_list, 8, ApproxConfig(backend='kdtree'), seed=1)
    per_query = table['visits_per_query'].to_numpy()
    # each step doubles n; visits per query must grow by well under 2x per step
    ratios = per_query[1:] / per_query[:-1]
    assert (ratios < 1.5).all()
    assert (table['query_count'] == 1000).all()

def test_benchmark_single_size():
    table = benchmark([20], 3, ApproxConfig(backend='kdtree'))
    assert len(table) == 1
    row = table.iloc[0]
    assert np.isfinite(row['approx_seconds']) and np.isfinite(row['oracle_seconds'])
    assert row['query_count'] == row['m']
    assert row['value'] >= row['exact_value'] - 1e-12

def test_benchmark_skips_oracle_above_limit():
    table = benchmark([10, 30], 2, oracle_limit=100)
    assert np.isfinite(table.loc[0, 'exact_value'])
    assert np.isnan(table.loc[1, 'exact_value'])

@pytest.mark.slow
def test_crossover_row():
    table = benchmark([5000], 8, ApproxConfig(backend='kdtree'), seed=0)
    row = table.iloc[0]
    assert row['query_count'] == 5000
    # far fewer distance evaluations than the m * n of the exact scan
    assert row['visit_count'] < 5000 * 5000 / 2
    assert np.isfinite(row['oracle_seconds'])
    assert row['approx_seconds'] < row['oracle_seconds']
