'''
Error-bound quantities and empirical error reports comparing the approximation with the exact distance.
'''

from dataclasses import dataclass, replace
import json
import math
import numpy as np
import pandas as pd
import pathlib
from typing import Sequence
import sys

proj_root = pathlib.Path(__file__).parent.parent
sys.path.append(proj_root)

from process.approximation import ApproxConfig, ApproxResult, approximate_hausdorff, swap_symmetry_gap
from process.datagen import GenSpec, generate_pair
from process.geometry import GeometryStats, PointSet, geometry_stats
from process.oracle import hausdorff_exact, nearest_distances_exact
from process.robustness import RobustnessReport
from utils.general import UsageError, project_logger

D_POLICIES = ('fixed', 'log_growth')

@dataclass(frozen=True)
class ErrorBoundReport:
    '''
    All bound quantities for one instance.

    epsilon_source is 'contract' for guaranteed backends and 'empirical' otherwise, in which case
    epsilon_used is the largest realized slack over the directions answered by genuine queries.
    '''
    epsilon_used: float
    epsilon_source: str
    d_h_exact: float
    d_h_approx: float
    abs_error: float
    worst_case_bound: float
    geometric_bound: float
    directional_bound: float
    n_eff: float
    refined_bound: float
    intrinsic_dim: int
    nn_dist_mean: float
    nn_dist_std: float
    d_max: float
    delta: float
    spread: float
    concentration_frequency: float
    concentration_limit: float
    mode: str
    backend: str

def _check_nonneg(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise UsageError(f'{name} must be finite and >= 0, got {value}.')
    return value

def n_eff(m: int, n: int) -> float:
    '''
    Effective query count m ln(max(n, 2)) + n ln(max(m, 2)). The guard keeps singletons positive.
    '''
    if m < 1 or n < 1:
        raise UsageError(f'n_eff needs m, n >= 1, got m={m}, n={n}.')
    return m * math.log(max(n, 2)) + n * math.log(max(m, 2))

def n_eff_log_approximation(m: int, n: int) -> float:
    '''
    ln(m + n) + ln ln(m + n), the large-m, n stand-in for ln N_eff.
    '''
    if m < 1 or n < 1:
        raise UsageError(f'n_eff_log_approximation needs m, n >= 1, got m={m}, n={n}.')
    total = m + n
    return math.log(total) + math.log(math.log(total))

def worst_case_bound(epsilon: float, d_h: float) -> float:
    return _check_nonneg('epsilon', epsilon) * _check_nonneg('d_h', d_h)

def geometric_bound(epsilon: float, stats: GeometryStats) -> float:
    return _check_nonneg('epsilon', epsilon) * stats.spread

def directional_bound(epsilon: float, forward_exact: float) -> float:
    '''
    eps * max_a d(a, B): the slack one direction of (1+eps) queries can add to its supremum.
    '''
    return _check_nonneg('epsilon', epsilon) * _check_nonneg('forward_exact', forward_exact)

def refined_bound(epsilon: float, stats: GeometryStats, d: int, n_eff_value: float) -> float:
    '''
    eps * sqrt(D_max^2 - delta^2) * sqrt(ln(N_eff) / d), leading constant 1.

    Raises:
        * UsageError -- n_eff_value <= 1 or d < 1.
    '''
    if n_eff_value <= 1:
        raise UsageError(f'refined_bound needs n_eff > 1, got {n_eff_value}.')
    if d < 1:
        raise UsageError(f'refined_bound needs d >= 1, got {d}.')
    return _check_nonneg('epsilon', epsilon) * stats.spread * math.sqrt(math.log(n_eff_value) / d)

def concentration_check(nn_distances: Sequence[float] | np.ndarray, d: int) -> tuple[float, float]:
    '''
    Fraction of nearest-neighbor distances above mean + std, next to the e^-d level it is compared with.

    Returns:
        * tuple[float, float] -- (observed frequency, e^-d).
    '''
    nn = np.asarray(nn_distances, dtype=np.float64)
    if nn.size == 0:
        raise UsageError('concentration_check needs at least one distance.')
    mu, sigma = float(nn.mean()), float(nn.std())
    return float(np.mean(nn > mu + sigma)), math.exp(-d)

def _realized_epsilon(estimates: np.ndarray, exact: np.ndarray) -> float:
    worst = 0.0
    for est, true in zip(estimates, exact):
        if true == 0.0:
            ratio = 0.0 if est == 0.0 else math.inf
        else:
            ratio = est / true - 1.0
        worst = max(worst, ratio)
    return float(worst)

def _epsilon_used(approx: ApproxResult, a: PointSet, b: PointSet, forward_nn: np.ndarray) -> tuple[float, str]:
    if approx.contract.guaranteed:
        return approx.contract.epsilon, 'contract'

    # only directions answered by queries carry the backend's slack; cached estimates are not queries
    measured = []
    if approx.mode == 'dual' or approx.indexed_side == 'B':
        measured.append(_realized_epsilon(approx.forward_estimates, forward_nn))
    if approx.mode == 'dual' or approx.indexed_side == 'A':
        measured.append(_realized_epsilon(approx.backward_estimates, nearest_distances_exact(b, a)))
    return max(measured), 'empirical'

def error_report(a: PointSet, b: PointSet, cfg: ApproxConfig | None = None, seed: int = 0) -> ErrorBoundReport:
    '''
    Runs the exact and the approximate computation on (a, b) and assembles every bound quantity.
    nn_dist_mean and nn_dist_std are the mean and population std of the exact d(a, B).
    '''
    cfg = cfg or ApproxConfig()
    exact = hausdorff_exact(a, b)
    approx = approximate_hausdorff(a, b, cfg, seed)
    stats = geometry_stats(a, b)
    forward_nn = nearest_distances_exact(a, b)

    eps, source = _epsilon_used(approx, a, b, forward_nn)
    n_eff_value = n_eff(len(a), len(b))
    frequency, limit = concentration_check(forward_nn, a.dim)

    # an unbounded realized slack leaves the bounds unbounded too
    if math.isfinite(eps):
        worst, geometric = worst_case_bound(eps, exact.value), geometric_bound(eps, stats)
        directional = directional_bound(eps, exact.forward.value)
        refined = refined_bound(eps, stats, a.dim, n_eff_value)
    else:
        worst = geometric = directional = refined = math.inf

    return ErrorBoundReport(
        epsilon_used=eps,
        epsilon_source=source,
        d_h_exact=exact.value,
        d_h_approx=approx.value,
        abs_error=abs(exact.value - approx.value),
        worst_case_bound=worst,
        geometric_bound=geometric,
        directional_bound=directional,
        n_eff=n_eff_value,
        refined_bound=refined,
        intrinsic_dim=a.dim,
        nn_dist_mean=float(forward_nn.mean()),
        nn_dist_std=float(forward_nn.std()),
        d_max=stats.d_max,
        delta=stats.delta,
        spread=stats.spread,
        concentration_frequency=frequency,
        concentration_limit=limit,
        mode=approx.mode,
        backend=approx.backend
    )

def sweep_dimension(size: int, d_policy: str, d: int) -> int:
    '''
    Dimension used for one sweep row: d itself under 'fixed', ceil(ln(size)) under 'log_growth'.
    '''
    if d_policy == 'fixed':
        return d
    if d_policy == 'log_growth':
        return max(1, math.ceil(math.log(size)))
    raise UsageError(f'Unknown d_policy "{d_policy}", expected one of {D_POLICIES}.')

def error_growth_sweep(
    sizes: Sequence[int],
    d_policy: str = 'fixed',
    d: int = 8,
    trials: int = 1,
    seed: int = 0,
    cfg: ApproxConfig | None = None,
    family: str = 'uniform-cube',
    measure: bool = True
) -> pd.DataFrame:
    '''
    One row per total size m + n (m = size // 2, n = size - m).

    refined_bound is the closed form eps * sqrt(ln N_eff / d) at unit spread, so the column reflects only the
    size and dimension terms. With measure=True every row also runs `trials` generated instances and reports
    the mean measured abs_error and the mean instance-level refined bound.

    Raises:
        * UsageError -- Empty sizes, a size below 2, unknown d_policy or trials < 1.

    Returns:
        * pd.DataFrame -- Columns size, m, n, d, n_eff, ln_n_eff, ln_n_eff_approx, refined_bound,
          and with measure=True also mean_abs_error, measured_refined_bound, trials.
    '''
    if not sizes:
        raise UsageError('error_growth_sweep needs at least one size.')
    if trials < 1:
        raise UsageError(f'trials must be >= 1, got {trials}.')
    cfg = cfg or ApproxConfig(mode='dual', backend='kdtree-eps')
    eps = cfg.epsilon

    rows = []
    for size in sizes:
        if size < 2:
            raise UsageError(f'Sweep sizes count both sets and must be >= 2, got {size}.')
        dim = sweep_dimension(size, d_policy, d)
        m, n = size // 2, size - size // 2
        n_eff_value = n_eff(m, n)
        row = {
            'size': size,
            'm': m,
            'n': n,
            'd': dim,
            'n_eff': n_eff_value,
            'ln_n_eff': math.log(n_eff_value),
            'ln_n_eff_approx': n_eff_log_approximation(m, n),
            'refined_bound': refined_bound(eps, GeometryStats(1.0, 0.0, 1.0), dim, n_eff_value),
        }

        if measure:
            reports = [
                error_report(*generate_pair(GenSpec(family, m, n, dim, seed + trial)), cfg, seed + trial)
                for trial in range(trials)
            ]
            row['mean_abs_error'] = float(np.mean([r.abs_error for r in reports]))
            row['measured_refined_bound'] = float(np.mean([r.refined_bound for r in reports]))
            row['trials'] = trials

        rows.append(row)
        project_logger().debug(json.dumps({'function': 'error_growth_sweep()', 'size': size, 'd': dim}))

    return pd.DataFrame(rows)

def _bound_report(
    check_name: str,
    predicted: float,
    measured: float,
    passed: bool,
    tolerance: float,
    hard: bool,
    cfg: ApproxConfig,
    seed: int,
    details: dict
) -> RobustnessReport:
    return RobustnessReport(
        check_name=check_name,
        predicted_bound=predicted,
        measured_value=measured,
        passed=passed,
        tolerance=tolerance,
        hard=hard,
        config_snapshot=cfg.to_dict(),
        seed=seed,
        details=details
    )

def check_oracle_equivalence(a: PointSet, b: PointSet, cfg: ApproxConfig | None = None, seed: int = 0, tolerance: float = 1e-12) -> RobustnessReport:
    '''
    Dual mode over the exact-scan backend must reproduce the exact distance.
    '''
    cfg = replace((cfg or ApproxConfig()).with_backend('exact-scan'), mode='dual')
    exact = hausdorff_exact(a, b).value
    approx = approximate_hausdorff(a, b, cfg, seed).value
    measured = abs(approx - exact)
    return _bound_report('oracle_equivalence', 0.0, measured, measured <= tolerance, tolerance, True, cfg, seed, {'d_h_exact': exact, 'd_h_approx': approx})

def check_sandwich_bound(a: PointSet, b: PointSet, cfg: ApproxConfig | None = None, seed: int = 0, tolerance: float = 1e-9) -> RobustnessReport:
    '''
    d_H <= d~_H <= (1+eps) d_H in dual mode. measured is d~_H - d_H against eps * d_H; a negative
    difference beyond the tolerance also fails. Hard only for guaranteed backends.
    '''
    cfg = replace(cfg or ApproxConfig(), mode='dual')
    exact = hausdorff_exact(a, b).value
    approx = approximate_hausdorff(a, b, cfg, seed)
    gap = approx.value - exact
    predicted = worst_case_bound(approx.contract.epsilon, exact)
    passed = -tolerance <= gap <= predicted + tolerance
    details = {'d_h_exact': exact, 'd_h_approx': approx.value, 'epsilon': approx.contract.epsilon}
    return _bound_report('sandwich_bound', predicted, gap, passed, tolerance, approx.contract.guaranteed, cfg, seed, details)

def check_cached_overestimation(a: PointSet, b: PointSet, cfg: ApproxConfig | None = None, seed: int = 0, tolerance: float = 1e-12) -> RobustnessReport:
    '''
    Cached mode with the brute-force fallback never underestimates: measured is d_H - d~_H against 0.
    Reports the covered fraction of the indexed set, and for the exact-scan backend whether the values match exactly.
    '''
    cfg = replace(cfg or ApproxConfig(), mode='cached', uncovered_policy='brute-force-fallback')
    exact = hausdorff_exact(a, b).value
    approx = approximate_hausdorff(a, b, cfg, seed)
    shortfall = exact - approx.value
    indexed_size = len(approx.bucket_map)
    details = {
        'd_h_exact': exact,
        'd_h_approx': approx.value,
        'covered_fraction': (indexed_size - approx.uncovered_count) / indexed_size,
    }
    passed = shortfall <= tolerance
    if cfg.backend == 'exact-scan':
        details['exact_match'] = approx.value == exact
        passed = passed and approx.value == exact
    return _bound_report('cached_overestimation', 0.0, shortfall, passed, tolerance, True, cfg, seed, details)

def check_worst_case_bound(a: PointSet, b: PointSet, cfg: ApproxConfig | None = None, seed: int = 0, tolerance: float = 1e-9) -> RobustnessReport:
    '''
    |d_H - d~_H| <= eps d_H under the given config. Hard in dual mode with a guaranteed backend, reported otherwise.
    '''
    cfg = cfg or ApproxConfig()
    report = error_report(a, b, cfg, seed)
    guaranteed = report.epsilon_source == 'contract'
    details = {'d_h_exact': report.d_h_exact, 'd_h_approx': report.d_h_approx, 'epsilon': report.epsilon_used}
    passed = report.abs_error <= report.worst_case_bound + tolerance
    return _bound_report('worst_case_bound', report.worst_case_bound, report.abs_error, passed, tolerance, guaranteed and cfg.mode == 'dual', cfg, seed, details)

def check_refined_bound(a: PointSet, b: PointSet, cfg: ApproxConfig | None = None, seed: int = 0, tolerance: float = 0.0) -> RobustnessReport:
    '''
    |d_H - d~_H| against the refined bound. Never hard: the bound's constant is not established.
    '''
    cfg = cfg or ApproxConfig()
    report = error_report(a, b, cfg, seed)
    details = {'d_h_exact': report.d_h_exact, 'spread': report.spread, 'n_eff': report.n_eff}
    passed = report.abs_error <= report.refined_bound + tolerance
    return _bound_report('refined_bound', report.refined_bound, report.abs_error, passed, tolerance, False, cfg, seed, details)

def check_swap_symmetry(a: PointSet, b: PointSet, cfg: ApproxConfig | None = None, seed: int = 0, tolerance: float = 1e-12) -> RobustnessReport:
    '''
    |d~(A, B) - d~(B, A)|. Hard only where both argument orders reach the exact value
    (exact-scan, brute-force fallback or dual mode); recorded otherwise.
    '''
    cfg = cfg or ApproxConfig()
    gap = swap_symmetry_gap(a, b, cfg, seed)
    hard = cfg.backend == 'exact-scan' and (cfg.mode == 'dual' or cfg.uncovered_policy == 'brute-force-fallback')
    return _bound_report('swap_symmetry', 0.0, gap, gap <= tolerance, tolerance, hard, cfg, seed, {})
