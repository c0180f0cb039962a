'''
Verification suites: run the checks listed in the verify plan over generated trials.

Trials are split into chunks and run by a process pool (or in-process for workers <= 1);
reports come back in trial order, then plan order.
'''

from dataclasses import dataclass, replace
import json
from multiprocessing import Pool
import numpy as np
import pandas as pd
import pathlib
import time
from typing import Sequence
import sys

proj_root = pathlib.Path(__file__).parent.parent
sys.path.append(proj_root)

from process.approximation import ApproxConfig
from process.datagen import FAMILIES, GenSpec, generate_pair, random_diagonal_scale, random_point_near, random_translation
from process.error_analysis import (
    check_cached_overestimation,
    check_oracle_equivalence,
    check_refined_bound,
    check_sandwich_bound,
    check_swap_symmetry,
    check_worst_case_bound
)
from process.geometry import PointSet, Transform, geometry_stats, random_rotation
from process.robustness import (
    RobustnessReport,
    check_deletion_stability,
    check_insertion_stability,
    check_move_stability,
    check_nonuniform_scaling,
    check_rotation_invariance,
    check_translation_invariance,
    check_uniform_scaling
)
from utils.general import UsageError, project_logger

DEFAULT_SIZES = (50, 200)
DEFAULT_DIMS = (1, 2, 4, 8, 16)

BOUND_CHECKS = {
    'oracle_equivalence': check_oracle_equivalence,
    'sandwich_bound': check_sandwich_bound,
    'cached_overestimation': check_cached_overestimation,
    'worst_case_bound': check_worst_case_bound,
    'refined_bound': check_refined_bound,
    'swap_symmetry': check_swap_symmetry,
}

@dataclass(frozen=True)
class TrialSpec:
    trial: int
    family: str
    m: int
    n: int
    d: int
    seed: int

def plan_trials(trials: int, sizes: Sequence[int] = DEFAULT_SIZES, dims: Sequence[int] = DEFAULT_DIMS, seed: int = 0) -> list[TrialSpec]:
    '''
    Deterministic trial list. Trial t cycles through the generator families, sizes and dims, and draws
    m, n uniformly from [1, size].

    Raises:
        * UsageError -- trials < 1, or empty or non-positive sizes / dims.
    '''
    if trials < 1:
        raise UsageError(f'trials must be >= 1, got {trials}.')
    if not sizes or min(sizes) < 1:
        raise UsageError(f'sizes must be positive, got {list(sizes)}.')
    if not dims or min(dims) < 1:
        raise UsageError(f'dims must be positive, got {list(dims)}.')

    specs = []
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        size = sizes[t % len(sizes)]
        specs.append(
            TrialSpec(
                trial=t,
                family=FAMILIES[t % len(FAMILIES)],
                m=int(rng.integers(1, size + 1)),
                n=int(rng.integers(1, size + 1)),
                d=dims[t % len(dims)],
                seed=int(rng.integers(0, 2 ** 63))
            )
        )
    return specs

def _check_config(cfg: ApproxConfig, params: dict) -> ApproxConfig:
    '''
    Plan params may pin a backend (with backend_params) or a mode for one check.
    '''
    if 'backend' in params:
        cfg = cfg.with_backend(params['backend'], params.get('backend_params'))
    if 'mode' in params:
        cfg = replace(cfg, mode=params['mode'])
    return cfg

def run_check(
    check: str,
    a: PointSet,
    b: PointSet,
    cfg: ApproxConfig,
    seed: int,
    tolerance: float | None = None,
    params: dict | None = None,
    rotation: Transform | None = None
) -> RobustnessReport:
    '''
    Runs one named check on (a, b). Transforms and perturbations are drawn from `seed`;
    the rotation check uses `rotation` instead of a random one when given.

    Raises:
        * UsageError -- Unknown check name.
    '''
    params = params or {}
    cfg = _check_config(cfg, params)
    kwargs = {} if tolerance is None else {'tolerance': tolerance}
    rng = np.random.default_rng(seed)

    if check in BOUND_CHECKS:
        return BOUND_CHECKS[check](a, b, cfg, seed, **kwargs)

    if check == 'translation':
        t = random_translation(a.dim, params.get('scale', 1.0), seed)
        return check_translation_invariance(a, b, t, cfg, seed, **kwargs)

    if check == 'rotation':
        rotation = rotation if rotation is not None else random_rotation(a.dim, seed)
        return check_rotation_invariance(a, b, rotation, cfg, seed, **kwargs)

    if check == 'uniform_scaling':
        factors = params.get('factors', (0.1, 10.0))
        factor = float(factors[int(rng.integers(0, len(factors)))])
        return check_uniform_scaling(a, b, factor, cfg, seed, **kwargs)

    if check == 'nonuniform_scaling':
        low, high = params.get('kappa_range', (1.0, 8.0))
        kappa = float(rng.uniform(low, high))
        return check_nonuniform_scaling(a, b, random_diagonal_scale(a.dim, kappa, seed), cfg, seed, **kwargs)

    if check == 'insertion':
        source = a if rng.random() < 0.5 else b
        a_new = random_point_near(source, params.get('radius', 0.5), seed)
        return check_insertion_stability(a, b, a_new, cfg, seed, **kwargs)

    if check == 'deletion':
        if len(a) < 2:
            a = a.append(random_point_near(a, params.get('radius', 0.5), seed))
        idx = int(rng.integers(0, len(a)))
        return check_deletion_stability(a, b, idx, cfg, seed, **kwargs)

    if check == 'move':
        d_max = geometry_stats(a, b).d_max
        fraction = params.get('radius_fraction', 0.01)
        radius = fraction * d_max if d_max > 0 else fraction
        idx = int(rng.integers(0, len(a)))
        a_new = random_point_near(a, radius, seed, idx=idx)
        return check_move_stability(a, b, idx, a_new, cfg, seed, **kwargs)

    raise UsageError(f'Unknown check "{check}".')

def _run_trial_chunk(
    trials: Sequence[TrialSpec],
    checks: list[dict],
    cfg: ApproxConfig,
    tolerances: dict[str, float],
    rotation: Transform | None
) -> list[RobustnessReport]:
    reports = []
    for spec in trials:
        a, b = generate_pair(GenSpec(spec.family, spec.m, spec.n, spec.d, spec.seed))
        for check in checks:
            tolerance = tolerances.get(check['check'], check['tolerance'])
            report = run_check(check['check'], a, b, cfg, spec.seed, tolerance, check['params'], rotation)
            details = {
                **report.details,
                'suite': check['suite'],
                'trial': spec.trial,
                'family': spec.family,
                'm': spec.m,
                'n': spec.n,
                'd': spec.d,
            }
            reports.append(replace(report, hard=report.hard and check['hard'], details=details))
    return reports

def _merge_pool_results(results: list[list[RobustnessReport]]) -> list[RobustnessReport]:
    '''
    Flattens per-chunk report lists; chunks are contiguous trial ranges, so chunk order is trial order.
    '''
    return [report for chunk in results for report in chunk]

def run_suite(
    checks: list[dict],
    trials: int,
    cfg: ApproxConfig,
    sizes: Sequence[int] = DEFAULT_SIZES,
    dims: Sequence[int] = DEFAULT_DIMS,
    seed: int = 0,
    tolerances: dict[str, float] | None = None,
    workers: int = 1,
    rotation: Transform | None = None
) -> list[RobustnessReport]:
    '''
    Runs every check in `checks` (see utils.project.write_suite_checks_dict) on every planned trial.

    Args:
        * checks (list[dict]) -- Plan rows for the suite.
        * trials (int) -- Number of generated instances.
        * cfg (ApproxConfig) -- Run configuration; plan params may override backend or mode per check.
        * sizes (Sequence[int], optional) -- Upper bounds for m and n, cycled over trials.
        * dims (Sequence[int], optional) -- Dimensions, cycled over trials.
        * seed (int, optional) -- Base seed. Defaults to 0.
        * tolerances (dict[str, float] | None, optional) -- Per-check tolerance overrides. Defaults to None.
        * workers (int, optional) -- Pool size; <= 1 runs in-process. Defaults to 1.
        * rotation (Transform | None, optional) -- Fixed rotation for the rotation check; every trial dimension must match it. Defaults to None.

    Returns:
        * list[RobustnessReport] -- Trial order, then plan order.
    '''
    specs = plan_trials(trials, sizes, dims, seed)
    tolerances = dict(tolerances or {})
    # pool workers cannot start pools of their own
    cfg = replace(cfg, workers=1)

    t0 = time.time()

    if workers <= 1 or len(specs) < 2:
        results = [_run_trial_chunk(specs, checks, cfg, tolerances, rotation)]
    else:
        chunk_size = -(-len(specs) // workers)
        chunks = [specs[i:i + chunk_size] for i in range(0, len(specs), chunk_size)]
        with Pool(workers) as p:
            results = p.starmap(
                func=_run_trial_chunk,
                iterable=[(chunk, checks, cfg, tolerances, rotation) for chunk in chunks],
                chunksize=1
            )

    reports = _merge_pool_results(results)

    t1 = time.time()

    summary = summarize_reports(reports)
    project_logger().info(json.dumps({'function': 'run_suite()', 'trials': trials, **summary, 'seconds': round(t1 - t0, 2)}))
    for report in reports:
        if report.hard and not report.passed:
            project_logger().error(json.dumps({'failed check': report.check_name, 'trial': report.details['trial'], 'seed': report.seed}))

    return reports

def summarize_reports(reports: Sequence[RobustnessReport]) -> dict:
    hard_failures = sum(1 for r in reports if r.hard and not r.passed)
    soft_failures = sum(1 for r in reports if not r.hard and not r.passed)
    return {
        'checks': len(reports),
        'passed': sum(1 for r in reports if r.passed),
        'hard_failures': hard_failures,
        'soft_failures': soft_failures,
    }

def check_summary_table(reports: Sequence[RobustnessReport]) -> pd.DataFrame:
    '''
    One row per check name: runs, passes, hard failures and the largest measured value.
    '''
    df = pd.DataFrame(
        {
            'check': [r.check_name for r in reports],
            'passed': [r.passed for r in reports],
            'hard_failure': [r.hard and not r.passed for r in reports],
            'measured_value': [r.measured_value for r in reports],
        }
    )
    if df.empty:
        return pd.DataFrame(columns=['check', 'runs', 'passed', 'hard_failures', 'max_measured'])
    return df.groupby('check', sort=False).agg(
        runs=('passed', 'size'),
        passed=('passed', 'sum'),
        hard_failures=('hard_failure', 'sum'),
        max_measured=('measured_value', 'max')
    ).reset_index()
