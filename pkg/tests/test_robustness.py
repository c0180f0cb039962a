import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from process.approximation import ApproxConfig
from process.datagen import FAMILIES, GenSpec, generate_pair, random_diagonal_scale, random_point_near, random_translation
from process.geometry import PointSet, Transform, geometry_stats, random_rotation
from process.robustness import (
    check_deletion_stability,
    check_insertion_stability,
    check_move_stability,
    check_nonuniform_scaling,
    check_rotation_invariance,
    check_translation_invariance,
    check_uniform_scaling
)
from utils.general import UsageError

@st.composite
def instances(draw, max_size=40, dims=(1, 2, 4, 8)):
    family = draw(st.sampled_from(FAMILIES))
    m = draw(st.integers(min_value=1, max_value=max_size))
    n = draw(st.integers(min_value=1, max_value=max_size))
    d = draw(st.sampled_from(dims))
    seed = draw(st.integers(min_value=0, max_value=2 ** 32 - 1))
    return generate_pair(GenSpec(family, m, n, d, seed)), seed

def test_zero_translation():
    a, b = generate_pair(GenSpec('uniform-cube', 20, 15, 3, seed=0))
    report = check_translation_invariance(a, b, np.zeros(3))
    assert report.measured_value == 0.0
    assert report.passed and report.hard

@settings(max_examples=50, deadline=None)
@given(instances())
def test_exact_backend_translation(instance):
    (a, b), seed = instance
    report = check_translation_invariance(a, b, random_translation(a.dim, 10.0, seed), seed=seed)
    assert report.hard and report.passed

def test_identity_and_planar_rotation():
    a = PointSet.from_rows([[1.0, 0.0], [0.0, 2.0]])
    b = PointSet.from_rows([[3.0, 1.0]])
    assert check_rotation_invariance(a, b, np.eye(2)).measured_value == 0.0

    report = check_rotation_invariance(a, b, [[0.0, -1.0], [1.0, 0.0]])
    assert report.measured_value <= 1e-9
    assert report.passed

def test_random_rotation_exact_backend():
    a, b = generate_pair(GenSpec('gaussian-clusters', 60, 50, 8, seed=12))
    report = check_rotation_invariance(a, b, random_rotation(8, 12))
    assert report.passed and report.hard
    assert report.tolerance <= 1e-6 * (1 + report.details['value_before'])

def test_rotation_rejects_non_orthogonal_matrix():
    a, b = generate_pair(GenSpec('uniform-cube', 5, 5, 2, seed=0))
    with pytest.raises(UsageError):
        check_rotation_invariance(a, b, [[1.0, 0.5], [0.0, 1.0]])

def test_uniform_scaling_examples():
    a, b = generate_pair(GenSpec('uniform-cube', 20, 20, 2, seed=1))
    assert check_uniform_scaling(a, b, 1.0).measured_value == 0.0

    single_a, single_b = PointSet.from_rows([[1.0, 1.0]]), PointSet.from_rows([[4.0, 5.0]])
    report = check_uniform_scaling(single_a, single_b, 2.0)
    assert report.details['value_before'] == 5.0
    assert report.details['value_after'] == 10.0

    with pytest.raises(UsageError):
        check_uniform_scaling(a, b, 0.0)

@settings(max_examples=40, deadline=None)
@given(instances(), st.sampled_from([0.1, 10.0]))
def test_uniform_scaling_exact_backend(instance, factor):
    (a, b), seed = instance
    assert check_uniform_scaling(a, b, factor, seed=seed).passed

def test_approximate_backends_use_loose_tolerance():
    a, b = generate_pair(GenSpec('uniform-cube', 60, 60, 4, seed=2))
    graph = check_translation_invariance(a, b, random_translation(4, 5.0, 2), ApproxConfig(backend='graph'))
    assert not graph.hard
    dual_kd = check_translation_invariance(a, b, random_translation(4, 5.0, 2), ApproxConfig(mode='dual', backend='kdtree'))
    assert dual_kd.hard and dual_kd.passed

def test_nonuniform_scaling_reduces_to_uniform():
    a, b = generate_pair(GenSpec('uniform-cube', 15, 25, 3, seed=4))
    report = check_nonuniform_scaling(a, b, [2.0, 2.0, 2.0])
    assert report.details['kappa'] == 1.0
    assert report.predicted_bound == 0.0
    assert report.measured_value == 0.0
    assert report.passed

def test_nonuniform_scaling_one_dimension():
    a, b = generate_pair(GenSpec('uniform-cube', 10, 10, 1, seed=4))
    report = check_nonuniform_scaling(a, b, random_diagonal_scale(1, 5.0, 3))
    assert report.measured_value == 0.0

@settings(max_examples=60, deadline=None)
@given(instances(), st.floats(min_value=1.0, max_value=8.0))
def test_nonuniform_scaling_bound(instance, kappa):
    (a, b), seed = instance
    report = check_nonuniform_scaling(a, b, random_diagonal_scale(a.dim, kappa, seed), seed=seed)
    assert report.hard
    assert report.passed

def test_nonuniform_scaling_dimension_mismatch():
    a, b = generate_pair(GenSpec('uniform-cube', 5, 5, 3, seed=0))
    with pytest.raises(UsageError):
        check_nonuniform_scaling(a, b, [1.0, 2.0])

def test_insertion_of_existing_point():
    a, b = generate_pair(GenSpec('uniform-cube', 10, 10, 2, seed=5))
    report = check_insertion_stability(a, b, a[3])
    assert report.measured_value == 0.0 and report.passed

def test_insertion_of_point_from_b():
    a, b = generate_pair(GenSpec('uniform-cube', 10, 10, 2, seed=5))
    report = check_insertion_stability(a, b, b[0])
    assert report.predicted_bound == 0.0
    assert report.measured_value == 0.0
    assert report.passed

@settings(max_examples=200, deadline=None)
@given(instances(), st.floats(min_value=0.0, max_value=3.0))
def test_random_insertions(instance, radius):
    (a, b), seed = instance
    report = check_insertion_stability(a, b, random_point_near(b, radius, seed), ApproxConfig(mode='dual', backend='kdtree'), seed)
    assert report.passed
    assert report.details['approx_asserted']

def test_deletion_examples():
    a = PointSet.from_rows([[0.0, 0.0], [0.0, 0.0], [5.0, 5.0]])
    b = PointSet.from_rows([[1.0, 1.0], [4.0, 4.0]])
    assert check_deletion_stability(a, b, 1).measured_value == 0.0

    twins = PointSet.from_rows([[2.0, 2.0], [2.0, 2.0]])
    assert check_deletion_stability(twins, b, 0).measured_value == 0.0

    with pytest.raises(UsageError):
        check_deletion_stability(PointSet.from_rows([[0.0, 0.0]]), b, 0)

@settings(max_examples=200, deadline=None)
@given(instances(), st.integers(min_value=0, max_value=10 ** 6))
def test_random_deletions(instance, pick):
    (a, b), seed = instance
    if len(a) < 2:
        a = a.append(b[0])
    report = check_deletion_stability(a, b, pick % len(a), seed=seed)
    assert report.passed

def test_move_examples():
    a, b = generate_pair(GenSpec('uniform-cube', 8, 8, 2, seed=6))
    assert check_move_stability(a, b, 2, a[2]).measured_value == 0.0

    single_a, single_b = PointSet.from_rows([[0.0, 0.0]]), PointSet.from_rows([[3.0, 4.0]])
    report = check_move_stability(single_a, single_b, 0, [1.0, 0.0])
    assert report.details['symmetric_diff'] == pytest.approx(5.0 - np.sqrt(20.0), abs=1e-12)
    assert report.passed

@settings(max_examples=200, deadline=None)
@given(instances(), st.integers(min_value=0, max_value=10 ** 6))
def test_random_small_moves(instance, pick):
    (a, b), seed = instance
    idx = pick % len(a)
    radius = 0.01 * geometry_stats(a, b).d_max
    report = check_move_stability(a, b, idx, random_point_near(a, radius, seed, idx=idx), seed=seed)
    assert report.passed
    assert report.predicted_bound <= radius + 1e-12

def test_reports_carry_config_snapshot():
    a, b = generate_pair(GenSpec('uniform-cube', 5, 5, 2, seed=0))
    report = check_translation_invariance(a, b, Transform.translation([1.0, 1.0]), ApproxConfig(backend='kdtree'), seed=9)
    assert report.config_snapshot['backend'] == 'kdtree-eps'
    assert report.seed == 9
