import math
import pytest
from hypothesis import given, settings, strategies as st

from process.approximation import ApproxConfig
from process.datagen import GenSpec, generate_pair, well_separated_pair
from process.error_analysis import (
    check_cached_overestimation,
    check_oracle_equivalence,
    check_refined_bound,
    check_sandwich_bound,
    check_swap_symmetry,
    check_worst_case_bound,
    concentration_check,
    directional_bound,
    error_growth_sweep,
    error_report,
    geometric_bound,
    n_eff,
    n_eff_log_approximation,
    refined_bound,
    sweep_dimension,
    worst_case_bound
)
from process.geometry import GeometryStats, PointSet, geometry_stats
from utils.general import UsageError

DUAL_KDTREE = ApproxConfig(mode='dual', backend='kdtree', params={'eps': 0.1})

@pytest.mark.parametrize(
    'm, n, expected',
    [
        (2, 2, 4 * math.log(2)),
        (1, 1, 2 * math.log(2)),
        (1000, 1000, 2000 * math.log(1000)),
    ]
)
def test_n_eff(m, n, expected):
    assert n_eff(m, n) == pytest.approx(expected, rel=1e-12)

def test_n_eff_rejects_empty_sets():
    with pytest.raises(UsageError):
        n_eff(0, 3)

def test_n_eff_log_approximation():
    assert n_eff_log_approximation(500, 500) == pytest.approx(math.log(1000) + math.log(math.log(1000)))

def test_worst_case_bound():
    assert worst_case_bound(0.0, 123.4) == 0.0
    assert worst_case_bound(0.1, 5.0) == pytest.approx(0.5)
    with pytest.raises(UsageError):
        worst_case_bound(-0.1, 1.0)

def test_geometric_and_directional_bounds():
    stats = GeometryStats(10.0, 6.0, 8.0)
    assert geometric_bound(0.5, stats) == 4.0
    assert directional_bound(0.2, 3.0) == pytest.approx(0.6)

def test_refined_bound_examples():
    stats = GeometryStats(10.0, 6.0, 8.0)
    assert refined_bound(0.0, stats, 4, 100.0) == 0.0
    assert refined_bound(0.1, GeometryStats(3.0, 3.0, 0.0), 4, 100.0) == 0.0
    assert refined_bound(0.1, stats, 16, math.exp(16)) == pytest.approx(0.8, rel=1e-12)

def test_refined_bound_preconditions():
    stats = GeometryStats(1.0, 0.0, 1.0)
    with pytest.raises(UsageError):
        refined_bound(0.1, stats, 4, 1.0)
    with pytest.raises(UsageError):
        refined_bound(0.1, stats, 0, 10.0)

@settings(max_examples=100, deadline=None)
@given(
    st.floats(min_value=0.0, max_value=1.0),
    st.floats(min_value=0.0, max_value=10.0),
    st.integers(min_value=1, max_value=64),
    st.floats(min_value=1.5, max_value=1e6)
)
def test_refined_bound_monotonicity(eps, spread, d, n_eff_value):
    stats = GeometryStats(spread, 0.0, spread)
    value = refined_bound(eps, stats, d, n_eff_value)
    assert value >= 0
    assert refined_bound(eps + 0.1, stats, d, n_eff_value) >= value
    assert refined_bound(eps, GeometryStats(spread + 1, 0.0, spread + 1), d, n_eff_value) >= value
    assert refined_bound(eps, stats, d, n_eff_value * 2) >= value
    assert refined_bound(eps, stats, d + 1, n_eff_value) <= value

def test_concentration_check():
    frequency, limit = concentration_check([1.0, 1.0, 1.0, 1.0], 3)
    assert frequency == 0.0
    assert limit == pytest.approx(math.exp(-3))

    frequency, _ = concentration_check([0.0, 0.0, 0.0, 10.0], 1)
    assert frequency == 0.25

    with pytest.raises(UsageError):
        concentration_check([], 2)

def test_report_exact_dual_mode():
    a, b = generate_pair(GenSpec('uniform-cube', 40, 30, 3, seed=2))
    report = error_report(a, b, ApproxConfig(mode='dual'))
    assert report.abs_error == 0.0
    assert report.epsilon_used == 0.0 and report.epsilon_source == 'contract'
    for value in (report.worst_case_bound, report.geometric_bound, report.directional_bound, report.refined_bound):
        assert value >= 0

def test_report_dual_kdtree_within_worst_case():
    a, b = generate_pair(GenSpec('gaussian-clusters', 80, 60, 4, seed=5))
    report = error_report(a, b, DUAL_KDTREE)
    assert report.epsilon_used == 0.1
    assert report.abs_error <= report.worst_case_bound + 1e-12

def test_report_fixture_hand_values():
    a = PointSet.from_rows([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
    b = PointSet.from_rows([[0.0, 0.0], [4.0, 0.0], [0.0, 1.0]])
    report = error_report(a, b, DUAL_KDTREE)

    # d(a, B) = 0, 1, 1 ; D_max = sqrt(20) ; delta = 0
    assert report.d_h_exact == 3.0
    assert report.nn_dist_mean == pytest.approx(2 / 3, abs=1e-9)
    assert report.nn_dist_std == pytest.approx(math.sqrt(2) / 3, abs=1e-9)
    assert report.d_max == pytest.approx(math.sqrt(20), abs=1e-9)
    assert report.delta == 0.0
    assert report.spread == pytest.approx(math.sqrt(20), abs=1e-9)
    assert report.n_eff == pytest.approx(6 * math.log(3), abs=1e-9)
    assert report.worst_case_bound == pytest.approx(0.3, abs=1e-9)
    assert report.directional_bound == pytest.approx(0.1, abs=1e-9)
    expected_refined = 0.1 * math.sqrt(20) * math.sqrt(math.log(6 * math.log(3)) / 2)
    assert report.refined_bound == pytest.approx(expected_refined, abs=1e-9)
    assert report.intrinsic_dim == 2
    assert report.concentration_limit == pytest.approx(math.exp(-2))

def test_report_graph_uses_empirical_epsilon():
    a, b = generate_pair(GenSpec('gaussian-clusters', 60, 60, 4, seed=1))
    report = error_report(a, b, ApproxConfig(mode='dual', backend='graph'))
    assert report.epsilon_source == 'empirical'
    assert report.epsilon_used >= 0

def test_sweep_dimension():
    assert sweep_dimension(1000, 'fixed', 8) == 8
    assert sweep_dimension(1000, 'log_growth', 8) == math.ceil(math.log(1000))
    with pytest.raises(UsageError):
        sweep_dimension(10, 'square', 2)

def test_sweep_single_size():
    table = error_growth_sweep([64], trials=1, measure=True)
    assert len(table) == 1
    assert table.loc[0, 'm'] + table.loc[0, 'n'] == 64
    assert table.loc[0, 'mean_abs_error'] >= 0
    assert table.loc[0, 'trials'] == 1

def test_sweep_fixed_d_strictly_increasing():
    sizes = [2 ** k for k in range(8, 13)]
    table = error_growth_sweep(sizes, 'fixed', d=8, measure=False)
    assert table['refined_bound'].is_monotonic_increasing
    assert table['refined_bound'].diff().dropna().gt(0).all()

def test_sweep_log_growth_stays_flat():
    sizes = [2 ** k for k in range(8, 13)]
    table = error_growth_sweep(sizes, 'log_growth', measure=False)
    bound = table['refined_bound']
    center = bound.mean()
    assert ((bound - center).abs() <= 0.05 * center).all()

def test_sweep_rejects_bad_input():
    with pytest.raises(UsageError):
        error_growth_sweep([])
    with pytest.raises(UsageError):
        error_growth_sweep([1], measure=False)
    with pytest.raises(UsageError):
        error_growth_sweep([64], trials=0)

def test_well_separated_pair_has_smaller_refined_bound():
    eps, d, size = 0.1, 4, 50
    near_a, near_b = well_separated_pair(d, 100.0, size, size, seed=3)
    cube_a, cube_b = generate_pair(GenSpec('uniform-cube', size, size, d, seed=3))
    n_eff_value = n_eff(size, size)
    # compared relative to D_max, the separated pair sits 100 units away
    separated = refined_bound(eps, geometry_stats(near_a, near_b), d, n_eff_value) / geometry_stats(near_a, near_b).d_max
    spread_out = refined_bound(eps, geometry_stats(cube_a, cube_b), d, n_eff_value) / geometry_stats(cube_a, cube_b).d_max
    assert separated < spread_out

def test_oracle_equivalence_check():
    a, b = generate_pair(GenSpec('sphere-shell', 30, 45, 8, seed=4))
    report = check_oracle_equivalence(a, b, DUAL_KDTREE)
    assert report.passed and report.hard
    assert report.measured_value == 0.0
    assert report.config_snapshot['backend'] == 'exact-scan'

@pytest.mark.parametrize('eps', [0.05, 0.1, 0.5])
def test_sandwich_check(eps):
    a, b = generate_pair(GenSpec('uniform-cube', 100, 80, 8, seed=int(eps * 100)))
    report = check_sandwich_bound(a, b, ApproxConfig(backend='kdtree', params={'eps': eps}))
    assert report.passed and report.hard
    assert report.config_snapshot['mode'] == 'dual'
    assert 0.0 <= report.measured_value <= report.predicted_bound + 1e-9

def test_sandwich_check_graph_is_soft():
    a, b = generate_pair(GenSpec('uniform-cube', 50, 50, 4, seed=1))
    assert not check_sandwich_bound(a, b, ApproxConfig(backend='graph')).hard

def test_cached_overestimation_check():
    a, b = generate_pair(GenSpec('gaussian-clusters', 70, 40, 3, seed=8))
    report = check_cached_overestimation(a, b)
    assert report.passed
    assert report.details['exact_match']
    assert 0.0 < report.details['covered_fraction'] <= 1.0

    kd_report = check_cached_overestimation(a, b, ApproxConfig(backend='kdtree'))
    assert kd_report.passed and 'exact_match' not in kd_report.details

def test_worst_case_check_hard_only_in_guaranteed_dual_mode():
    a, b = generate_pair(GenSpec('uniform-cube', 40, 40, 4, seed=3))
    dual = check_worst_case_bound(a, b, DUAL_KDTREE)
    assert dual.passed and dual.hard
    assert not check_worst_case_bound(a, b, ApproxConfig(backend='kdtree')).hard

def test_refined_check_is_never_hard():
    a, b = generate_pair(GenSpec('uniform-cube', 40, 40, 4, seed=3))
    assert not check_refined_bound(a, b, DUAL_KDTREE).hard

def test_swap_symmetry_check():
    a, b = generate_pair(GenSpec('uniform-cube', 30, 50, 3, seed=7))
    report = check_swap_symmetry(a, b)
    assert report.passed and report.hard and report.measured_value == 0.0
    assert not check_swap_symmetry(a, b, ApproxConfig(backend='graph')).hard
