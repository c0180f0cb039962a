'''
Bidirectional approximate Hausdorff distance with cached distance propagation.

1. Index one set (by default the smaller one).
2. Query every point of the other set once; keep its estimate and drop it into the bucket of its returned neighbor.
3. Estimate each indexed point's distance back to the query set from its own bucket only. Points with an empty
   bucket are either resolved by a linear scan (brute-force-fallback) or recorded as +inf and left out of the
   supremum (record-infinity).
4. Take the maximum over all stored estimates.

Dual mode replaces step 3 with genuine queries against a second index on the query set, so both directions
inherit the backend's (1+eps) contract.
'''

from dataclasses import dataclass, field, replace
import itertools
import json
import math
import numpy as np
import pandas as pd
import pathlib
import time
from typing import Any, Mapping, Sequence
import sys

proj_root = pathlib.Path(__file__).parent.parent
sys.path.append(proj_root)

from process.ann_index import AnnContract, build_index, query_many, resolve_backend, resolve_params
from process.datagen import GenSpec, generate_pair
from process.geometry import PointSet, check_dims, point_distances
from process.oracle import DirectedResult, HausdorffResult, hausdorff_exact
from utils.general import UsageError, project_logger

MODES = ('cached', 'dual')
UNCOVERED_POLICIES = ('brute-force-fallback', 'record-infinity')
SWAP_POLICIES = ('index-smaller', 'index-second-arg')

# short names used on the command line
POLICY_ALIASES = {
    'fallback': 'brute-force-fallback',
    'infinity': 'record-infinity',
    'smaller': 'index-smaller',
    'second': 'index-second-arg',
}

def _resolve_choice(name: str, value: str, choices: tuple[str, ...]) -> str:
    value = POLICY_ALIASES.get(value, value)
    if value not in choices:
        raise UsageError(f'Invalid {name} "{value}", expected one of {choices}.')
    return value

@dataclass(frozen=True)
class ApproxConfig:
    '''
    Free choices of the approximation. Backend names and params are validated and merged over the
    backend defaults on construction.
    '''
    mode: str = 'cached'
    backend: str = 'exact-scan'
    params: Mapping[str, Any] = field(default_factory=dict)
    uncovered_policy: str = 'brute-force-fallback'
    swap_policy: str = 'index-smaller'
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, 'mode', _resolve_choice('mode', self.mode, MODES))
        object.__setattr__(self, 'uncovered_policy', _resolve_choice('uncovered_policy', self.uncovered_policy, UNCOVERED_POLICIES))
        object.__setattr__(self, 'swap_policy', _resolve_choice('swap_policy', self.swap_policy, SWAP_POLICIES))
        backend = resolve_backend(self.backend)
        object.__setattr__(self, 'backend', backend)
        object.__setattr__(self, 'params', resolve_params(backend, self.params))
        if isinstance(self.workers, bool) or not isinstance(self.workers, int):
            raise UsageError(f'workers must be an integer, got {self.workers!r}.')

    @property
    def epsilon(self) -> float:
        return float(self.params.get('eps', 0.0))

    def with_backend(self, backend: str, params: Mapping[str, Any] | None = None) -> 'ApproxConfig':
        return replace(self, backend=backend, params=dict(params or {}))

    def to_dict(self) -> dict:
        return {
            'mode': self.mode,
            'backend': self.backend,
            'params': dict(self.params),
            'uncovered_policy': self.uncovered_policy,
            'swap_policy': self.swap_policy,
        }

@dataclass(frozen=True, eq=False)
class ApproxResult:
    '''
    Outcome of approximate_hausdorff(). forward_* always describe A -> B and backward_* B -> A,
    whichever set was indexed.

    bucket_map[j] lists the query-set indices whose nearest-neighbor query returned indexed point j,
    in query order. The indexed set is A when indexed_side == 'A', otherwise B.
    '''
    value: float
    forward_sup: float
    backward_sup: float
    bucket_map: tuple[tuple[int, ...], ...]
    uncovered_count: int
    fallback_cost: int
    query_count: int
    visit_count: int
    forward_estimates: np.ndarray
    backward_estimates: np.ndarray
    forward_neighbors: np.ndarray
    backward_neighbors: np.ndarray
    indexed_side: str
    mode: str
    backend: str
    contract: AnnContract

    def to_hausdorff_result(self) -> HausdorffResult:
        '''
        Same value with directed witnesses: the first point attaining each supremum and the neighbor its estimate came from.
        '''
        forward_src = int(np.argmax(self.forward_estimates == self.forward_sup))
        backward_src = int(np.argmax(self.backward_estimates == self.backward_sup))
        return HausdorffResult(
            self.value,
            DirectedResult(self.forward_sup, forward_src, int(self.forward_neighbors[forward_src])),
            DirectedResult(self.backward_sup, backward_src, int(self.backward_neighbors[backward_src])),
            mode=f'approx-{self.mode}'
        )

def _estimates(results: list) -> tuple[np.ndarray, np.ndarray]:
    distances = np.array([r.distance for r in results], dtype=np.float64)
    neighbors = np.array([r.neighbor_index for r in results], dtype=np.int64)
    return distances, neighbors

def approximate_hausdorff(a: PointSet, b: PointSet, cfg: ApproxConfig | None = None, seed: int = 0) -> ApproxResult:
    '''
    Approximate symmetric Hausdorff distance between a and b.

    Args:
        * a (PointSet) -- First set.
        * b (PointSet) -- Second set.
        * cfg (ApproxConfig | None, optional) -- Mode, backend and policies. Defaults to ApproxConfig().
        * seed (int, optional) -- Seed for index construction; both indexes in dual mode use it. Defaults to 0.

    Raises:
        * UsageError -- Dimension mismatch, invalid config or seed.

    Returns:
        * ApproxResult -- value = max(forward_sup, backward_sup) plus the per-point estimates and counters.
    '''
    cfg = cfg or ApproxConfig()
    check_dims(a.dim, b.dim)

    t0 = time.time()

    swapped = cfg.swap_policy == 'index-smaller' and len(a) < len(b)
    indexed, queried = (a, b) if swapped else (b, a)

    index = build_index(indexed, cfg.backend, cfg.params, seed)
    results = query_many(index, queried.points, workers=cfg.workers)
    queried_est, queried_nb = _estimates(results)

    # built in query order, so every bucket lists its query indices ascending
    buckets = [[] for _ in range(len(indexed))]
    for i, r in enumerate(results):
        buckets[r.neighbor_index].append(i)
    uncovered_count = sum(1 for bucket in buckets if not bucket)

    query_count, visit_count = index.query_counter, index.visit_counter
    fallback_cost = 0

    if cfg.mode == 'dual':
        reverse = build_index(queried, cfg.backend, cfg.params, seed)
        indexed_est, indexed_nb = _estimates(query_many(reverse, indexed.points, workers=cfg.workers))
        query_count += reverse.query_counter
        visit_count += reverse.visit_counter
    else:
        indexed_est = np.empty(len(indexed), dtype=np.float64)
        indexed_nb = np.full(len(indexed), -1, dtype=np.int64)
        for j, bucket in enumerate(buckets):
            point = indexed.points[j]
            if bucket:
                dists = point_distances(queried.points[bucket], point)
                k = int(np.argmin(dists))
                indexed_est[j], indexed_nb[j] = dists[k], bucket[k]
            elif cfg.uncovered_policy == 'brute-force-fallback':
                dists = point_distances(queried.points, point)
                fallback_cost += len(queried)
                k = int(np.argmin(dists))
                indexed_est[j], indexed_nb[j] = dists[k], k
            else:
                indexed_est[j] = math.inf

    queried_sup = float(queried_est.max())
    # at least one bucket is non-empty, so some indexed estimate is finite
    indexed_sup = float(indexed_est[np.isfinite(indexed_est)].max())

    if swapped:
        forward_est, forward_nb, forward_sup = indexed_est, indexed_nb, indexed_sup
        backward_est, backward_nb, backward_sup = queried_est, queried_nb, queried_sup
    else:
        forward_est, forward_nb, forward_sup = queried_est, queried_nb, queried_sup
        backward_est, backward_nb, backward_sup = indexed_est, indexed_nb, indexed_sup

    for arr in (forward_est, backward_est, forward_nb, backward_nb):
        arr.flags.writeable = False

    t1 = time.time()

    project_logger().debug(
        json.dumps(
            {
                'function': 'approximate_hausdorff()',
                'mode': cfg.mode,
                'backend': cfg.backend,
                'm': len(a),
                'n': len(b),
                'uncovered': uncovered_count,
                'seconds': round(t1 - t0, 4)
            }
        )
    )

    return ApproxResult(
        value=max(forward_sup, backward_sup),
        forward_sup=forward_sup,
        backward_sup=backward_sup,
        bucket_map=tuple(tuple(bucket) for bucket in buckets),
        uncovered_count=uncovered_count,
        fallback_cost=fallback_cost,
        query_count=query_count,
        visit_count=visit_count,
        forward_estimates=forward_est,
        backward_estimates=backward_est,
        forward_neighbors=forward_nb,
        backward_neighbors=backward_nb,
        indexed_side='A' if swapped else 'B',
        mode=cfg.mode,
        backend=cfg.backend,
        contract=index.contract
    )

def swap_symmetry_gap(a: PointSet, b: PointSet, cfg: ApproxConfig | None = None, seed: int = 0) -> float:
    '''
    |d~(A, B) - d~(B, A)|. Zero whenever both argument orders reach the exact answer.
    '''
    return abs(approximate_hausdorff(a, b, cfg, seed).value - approximate_hausdorff(b, a, cfg, seed).value)

def complexity_probe(m_list: Sequence[int], n_list: Sequence[int], d: int, cfg: ApproxConfig | None = None, seed: int = 0) -> pd.DataFrame:
    '''
    Runs approximate_hausdorff on uniform-cube pairs for every (m, n) combination and tabulates the counters.
    The second argument (size n) is always the indexed set, so query_count equals m in cached mode.

    Raises:
        * UsageError -- Empty size list.

    Returns:
        * pd.DataFrame -- Columns m, n, d, query_count, visit_count, visits_per_query, wall_seconds.
    '''
    if not m_list or not n_list:
        raise UsageError('complexity_probe needs non-empty m and n lists.')
    cfg = replace(cfg or ApproxConfig(), swap_policy='index-second-arg')

    rows = []
    for m, n in itertools.product(m_list, n_list):
        a, b = generate_pair(GenSpec('uniform-cube', m, n, d, seed))
        t0 = time.perf_counter()
        result = approximate_hausdorff(a, b, cfg, seed)
        t1 = time.perf_counter()
        rows.append(
            {
                'm': m,
                'n': n,
                'd': d,
                'query_count': result.query_count,
                'visit_count': result.visit_count,
                'visits_per_query': result.visit_count / result.query_count,
                'wall_seconds': t1 - t0
            }
        )

    return pd.DataFrame(rows)

def benchmark(sizes: Sequence[int], d: int, cfg: ApproxConfig | None = None, seed: int = 0, oracle_limit: int = 25_000_000) -> pd.DataFrame:
    '''
    Wall time of the approximation against the exact computation on uniform-cube pairs with m = n = size.
    The exact computation is skipped (NaN columns) when m * n exceeds oracle_limit.

    Returns:
        * pd.DataFrame -- Columns m, n, d, value, exact_value, approx_seconds, oracle_seconds, speedup,
          query_count, visit_count, uncovered_count.
    '''
    if not sizes:
        raise UsageError('benchmark needs at least one size.')
    cfg = cfg or ApproxConfig()

    rows = []
    for size in sizes:
        a, b = generate_pair(GenSpec('uniform-cube', size, size, d, seed))

        t0 = time.perf_counter()
        result = approximate_hausdorff(a, b, cfg, seed)
        t1 = time.perf_counter()

        exact_value, oracle_seconds = math.nan, math.nan
        if size * size <= oracle_limit:
            t2 = time.perf_counter()
            exact_value = hausdorff_exact(a, b).value
            oracle_seconds = time.perf_counter() - t2

        approx_seconds = t1 - t0
        rows.append(
            {
                'm': size,
                'n': size,
                'd': d,
                'value': result.value,
                'exact_value': exact_value,
                'approx_seconds': approx_seconds,
                'oracle_seconds': oracle_seconds,
                'speedup': oracle_seconds / approx_seconds if approx_seconds > 0 else math.nan,
                'query_count': result.query_count,
                'visit_count': result.visit_count,
                'uncovered_count': result.uncovered_count
            }
        )
        project_logger().info(json.dumps({'function': 'benchmark()', 'size': size, 'approx_seconds': round(approx_seconds, 4)}))

    return pd.DataFrame(rows)
