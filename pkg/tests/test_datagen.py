import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from process.datagen import (
    FAMILIES,
    SEPARATION_RATIO,
    GenSpec,
    generate_pair,
    random_diagonal_scale,
    random_point_near,
    random_translation,
    well_separated_pair
)
from process.geometry import PointSet, condition_number, geometry_stats
from utils.general import UsageError

@pytest.mark.parametrize('family', FAMILIES)
def test_singletons(family):
    a, b = generate_pair(GenSpec(family, 1, 1, 5, seed=3))
    assert len(a) == len(b) == 1
    assert a.dim == b.dim == 5

@pytest.mark.parametrize('family', FAMILIES)
def test_same_seed_same_pair(family):
    spec = GenSpec(family, 30, 20, 4, seed=2 ** 63 + 5)
    first, second = generate_pair(spec), generate_pair(spec)
    assert first[0].equals(second[0]) and first[1].equals(second[1])

def test_different_seeds_differ():
    a1, _ = generate_pair(GenSpec('uniform-cube', 10, 10, 3, seed=1))
    a2, _ = generate_pair(GenSpec('uniform-cube', 10, 10, 3, seed=2))
    assert not a1.equals(a2)

def test_uniform_cube_mean():
    a, _ = generate_pair(GenSpec('uniform-cube', 1000, 1, 2, seed=0))
    assert 0.45 <= a.points.mean() <= 0.55
    assert a.points.min() >= 0.0 and a.points.max() < 1.0

def test_sphere_shell_on_unit_sphere():
    a, b = generate_pair(GenSpec('sphere-shell', 50, 50, 6, seed=1))
    assert np.allclose(np.linalg.norm(a.points, axis=1), 1.0, atol=1e-12)
    assert np.allclose(np.linalg.norm(b.points, axis=1), 1.0, atol=1e-12)

def test_clusters_share_centers():
    a, b = generate_pair(GenSpec('gaussian-clusters', 200, 200, 2, seed=4, k=1, cluster_spread=0.01))
    assert np.linalg.norm(a.points.mean(axis=0) - b.points.mean(axis=0)) < 0.01

@pytest.mark.parametrize(
    'kwargs',
    [
        {'family': 'torus', 'm': 1, 'n': 1, 'd': 1},
        {'family': 'uniform-cube', 'm': 0, 'n': 1, 'd': 1},
        {'family': 'uniform-cube', 'm': 1, 'n': 1, 'd': 0},
        {'family': 'uniform-cube', 'm': 1, 'n': 1, 'd': 1, 'seed': -1},
        {'family': 'uniform-cube', 'm': 1, 'n': 1, 'd': 1, 'seed': 2 ** 64},
        {'family': 'gaussian-clusters', 'm': 3, 'n': 5, 'd': 2, 'k': 4},
        {'family': 'gaussian-clusters', 'm': 3, 'n': 5, 'd': 2, 'cluster_spread': -1.0},
    ]
)
def test_invalid_specs(kwargs):
    with pytest.raises(UsageError):
        GenSpec(**kwargs)

@settings(max_examples=100, deadline=None)
@given(
    st.sampled_from(FAMILIES),
    st.integers(min_value=1, max_value=50),
    st.integers(min_value=1, max_value=50),
    st.integers(min_value=1, max_value=16),
    st.integers(min_value=0, max_value=2 ** 64 - 1)
)
def test_generated_sets_are_valid(family, m, n, d, seed):
    a, b = generate_pair(GenSpec(family, m, n, d, seed))
    assert isinstance(a, PointSet) and isinstance(b, PointSet)
    assert (len(a), len(b), a.dim, b.dim) == (m, n, d, d)
    assert np.all(np.isfinite(a.points)) and np.all(np.isfinite(b.points))

def test_well_separated_singletons():
    stats = geometry_stats(*well_separated_pair(3, 5.0, 1, 1, seed=2))
    assert stats.delta == stats.d_max
    assert stats.spread == 0.0

def test_well_separated_ratio():
    a, b = well_separated_pair(8, 100.0, 40, 60, seed=7)
    stats = geometry_stats(a, b)
    assert stats.delta / stats.d_max >= SEPARATION_RATIO

def test_well_separated_shrinks_radius():
    # a gap smaller than the cluster radius forces shrinking
    a, b = well_separated_pair(2, 0.5, 30, 30, seed=1, radius=4.0)
    stats = geometry_stats(a, b)
    assert stats.delta / stats.d_max >= SEPARATION_RATIO

def test_well_separated_rejects_bad_gap():
    with pytest.raises(UsageError):
        well_separated_pair(2, 0.0, 3, 3)

def test_random_translation():
    t = random_translation(4, 2.0, seed=5)
    assert t.kind == 'translation'
    assert np.all(np.abs(t.payload) <= 2.0)
    assert np.array_equal(t.payload, random_translation(4, 2.0, seed=5).payload)

@pytest.mark.parametrize('d', [2, 3, 8])
def test_random_diagonal_scale(d):
    scale = random_diagonal_scale(d, 6.0, seed=3)
    assert scale.payload.min() == 1.0
    assert scale.payload.max() == 6.0
    assert condition_number(scale) == 6.0

def test_random_diagonal_scale_edge_cases():
    assert random_diagonal_scale(1, 4.0).payload.tolist() == [1.0]
    with pytest.raises(UsageError):
        random_diagonal_scale(3, 0.5)

def test_random_point_near():
    s = PointSet.from_rows([[0.0, 0.0], [10.0, 10.0]])
    p = random_point_near(s, 0.5, seed=1, idx=1)
    assert np.linalg.norm(p - s[1]) <= 0.5
    assert np.array_equal(random_point_near(s, 0.0, seed=1, idx=0), s[0])
    with pytest.raises(UsageError):
        random_point_near(s, -1.0)
