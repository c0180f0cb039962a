'''
One interface over three nearest-neighbor backends:

* exact-scan -- linear scan, exact (eps 0, guaranteed).
* kdtree-eps -- kd-tree priority search with (1+eps) pruning (guaranteed).
* navigable-graph -- layered proximity graph (target eps, empirical only).

Indexes persist to a versioned binary file (see save_index()).
'''

import json
from multiprocessing import Pool
import numpy as np
import pathlib
import struct
import threading
from types import MappingProxyType
from typing import Any, Mapping, NamedTuple, Sequence
import sys

proj_root = pathlib.Path(__file__).parent.parent
sys.path.append(proj_root)

from process.geometry import PointSet, as_vector, check_dims, point_distances
from process.kdtree import KdTree
from process.navigable_graph import NavigableGraph
from utils.general import UsageError, project_logger

BACKENDS = ('exact-scan', 'kdtree-eps', 'navigable-graph')

# short names used on the command line
BACKEND_ALIASES = {
    'exact': 'exact-scan',
    'kdtree': 'kdtree-eps',
    'graph': 'navigable-graph',
}

DEFAULT_PARAMS = {
    'exact-scan': {},
    'kdtree-eps': {'eps': 0.1, 'leaf_size': 8},
    'navigable-graph': {'eps': 0.1, 'max_degree': 16, 'build_beam': 100, 'query_beam': 32},
}

INDEX_MAGIC = b'AHDX'
INDEX_VERSION = 1
INDEX_HEADER = struct.Struct('<4sHBQQQI')
BACKEND_IDS = {'exact-scan': 0, 'kdtree-eps': 1, 'navigable-graph': 2}

class AnnContract(NamedTuple):
    epsilon: float
    guaranteed: bool

class NnResult(NamedTuple):
    neighbor_index: int
    distance: float

def resolve_backend(backend: str) -> str:
    name = BACKEND_ALIASES.get(backend, backend)
    if name not in BACKENDS:
        raise UsageError(f'Unknown backend "{backend}", expected one of {BACKENDS} or {tuple(BACKEND_ALIASES)}.')
    return name

def resolve_params(backend: str, params: Mapping[str, Any] | None) -> dict[str, Any]:
    '''
    Merges caller params over the backend defaults and validates them.

    Raises:
        * UsageError -- Unknown key, or a value out of range.
    '''
    backend = resolve_backend(backend)
    defaults = DEFAULT_PARAMS[backend]
    params = dict(params or {})

    unknown = sorted(set(params) - set(defaults))
    if unknown:
        raise UsageError(f'Invalid params for {backend}: {unknown}. Accepted: {sorted(defaults)}.')

    resolved = {**defaults, **params}
    if 'eps' in resolved:
        try:
            resolved['eps'] = float(resolved['eps'])
        except (TypeError, ValueError) as e:
            raise UsageError(f'eps must be a real number, got {resolved["eps"]!r}.') from e
        if not np.isfinite(resolved['eps']) or resolved['eps'] < 0:
            raise UsageError(f'eps must be finite and >= 0, got {resolved["eps"]}.')

    minimums = {'leaf_size': 1, 'max_degree': 2, 'build_beam': 1, 'query_beam': 1}
    for key, lowest in minimums.items():
        if key not in resolved:
            continue
        value = resolved[key]
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < lowest:
            raise UsageError(f'{key} must be an integer >= {lowest}, got {value!r}.')
        resolved[key] = int(value)

    return resolved

def _check_seed(seed: int) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or not 0 <= seed < 2 ** 64:
        raise UsageError(f'Seed must be an unsigned 64-bit integer, got {seed!r}.')
    return int(seed)

class AnnIndex:
    '''
    Nearest-neighbor index over one PointSet.

    Queries are read-only over the structure. query_counter and visit_counter are updated under a lock,
    so concurrent query() calls keep exact totals; query_many() aggregates per-chunk counts and adds them once.
    '''

    def __init__(self, backend: str, base: PointSet, build_params: Mapping[str, Any], seed: int, structure: KdTree | NavigableGraph | None):
        self.backend = backend
        self.base = base
        self.build_params = MappingProxyType(dict(build_params))
        self.seed = seed
        self._structure = structure
        self.query_counter = 0
        self.visit_counter = 0
        self._lock = threading.Lock()

    @property
    def contract(self) -> AnnContract:
        if self.backend == 'exact-scan':
            return AnnContract(0.0, True)
        return AnnContract(self.build_params['eps'], self.backend == 'kdtree-eps')

    def __getstate__(self) -> dict:
        state = self.__dict__.copy()
        state['build_params'] = dict(self.build_params)
        del state['_lock']
        return state

    def __setstate__(self, state: dict) -> None:
        state['build_params'] = MappingProxyType(state['build_params'])
        self.__dict__.update(state)
        self._lock = threading.Lock()

    def search(self, q: np.ndarray) -> tuple[NnResult, int]:
        '''
        Nearest-neighbor search without touching the counters.

        Returns:
            * tuple[NnResult, int] -- result and number of candidate points examined.
        '''
        if self.backend == 'exact-scan':
            dists = point_distances(self.base.points, q)
            j = int(np.argmin(dists))
            return NnResult(j, float(dists[j])), len(self.base)
        if self.backend == 'kdtree-eps':
            i, d, visits = self._structure.search(q, self.build_params['eps'])
        else:
            i, d, visits = self._structure.search(q)
        return NnResult(i, d), visits

    def record(self, queries: int, visits: int) -> None:
        with self._lock:
            self.query_counter += queries
            self.visit_counter += visits

def build_index(base: PointSet, backend: str = 'exact-scan', params: Mapping[str, Any] | None = None, seed: int = 0) -> AnnIndex:
    '''
    Builds a nearest-neighbor index over base. Deterministic for a fixed seed and params.

    Args:
        * base (PointSet) -- Points to index.
        * backend (str, optional) -- 'exact-scan', 'kdtree-eps' or 'navigable-graph' (or 'exact', 'kdtree', 'graph'). Defaults to 'exact-scan'.
        * params (Mapping[str, Any] | None, optional) -- Backend params merged over DEFAULT_PARAMS. Defaults to None.
        * seed (int, optional) -- Seed for randomized construction. Defaults to 0.

    Raises:
        * UsageError -- Unknown backend, invalid params or seed.

    Returns:
        * AnnIndex -- Queryable index with zeroed counters.
    '''
    backend = resolve_backend(backend)
    resolved = resolve_params(backend, params)
    seed = _check_seed(seed)

    if backend == 'kdtree-eps':
        structure = KdTree(base.points, leaf_size=resolved['leaf_size'])
    elif backend == 'navigable-graph':
        structure = NavigableGraph(
            base.points,
            max_degree=resolved['max_degree'],
            build_beam=resolved['build_beam'],
            query_beam=resolved['query_beam'],
            seed=seed
        )
    else:
        structure = None

    project_logger().debug(json.dumps({'function': 'build_index()', 'backend': backend, 'n': len(base), 'd': base.dim, 'seed': seed}))

    return AnnIndex(backend, base, resolved, seed, structure)

def query(index: AnnIndex, q: Sequence[float] | np.ndarray) -> NnResult:
    '''
    Nearest neighbor of q in the index base. Increments query_counter by one and visit_counter by the
    number of candidates examined.

    Raises:
        * UsageError -- q has the wrong dimension or non-finite coordinates.
    '''
    q = as_vector(q)
    check_dims(index.base.dim, q.shape[0])
    result, visits = index.search(q)
    index.record(1, visits)
    return result

def _query_chunk(index: AnnIndex, points: np.ndarray) -> tuple[list[NnResult], int]:
    if index.backend == 'kdtree-eps':
        # whole chunk in one batched tree search
        idx, dists, visits = index._structure.search_many(points, index.build_params['eps'])
        return [NnResult(int(i), float(d)) for i, d in zip(idx, dists)], int(visits.sum())

    results, visits = [], 0
    for q in points:
        result, v = index.search(q)
        results.append(result)
        visits += v
    return results, visits

def _merge_pool_results(results: list[tuple[list[NnResult], int]]) -> tuple[list[NnResult], int]:
    '''
    Concatenates per-chunk results in chunk order and sums the per-chunk visit counts.
    '''
    merged = [r for chunk_results, _ in results for r in chunk_results]
    visits = sum(v for _, v in results)
    return merged, visits

def query_many(index: AnnIndex, points: np.ndarray, workers: int = 1, chunk_size: int | None = None) -> list[NnResult]:
    '''
    One query per row of points, in row order. With workers > 1 rows are split into chunks queried by a
    process pool; results are identical to sequential queries and counters are merged afterwards.

    Args:
        * index (AnnIndex) -- Index to query.
        * points (np.ndarray) -- (k, d) array of query points.
        * workers (int, optional) -- Pool size; <= 1 queries in-process. Defaults to 1.
        * chunk_size (int | None, optional) -- Rows per pool task. Defaults to an even split across workers.

    Returns:
        * list[NnResult] -- One result per row.
    '''
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise UsageError(f'Query points must be a 2-D array, got shape {points.shape}.')
    check_dims(index.base.dim, points.shape[1])

    if workers <= 1 or points.shape[0] < 2:
        results, visits = _query_chunk(index, points)
    else:
        if chunk_size is None:
            chunk_size = -(-points.shape[0] // workers)
        chunks = [points[i:i + chunk_size] for i in range(0, points.shape[0], chunk_size)]
        with Pool(workers) as p:
            pool_results = p.starmap(
                func=_query_chunk,
                iterable=[(index, chunk) for chunk in chunks],
                chunksize=1
            )
        results, visits = _merge_pool_results(pool_results)

    index.record(len(results), visits)
    return results

def empirical_epsilon(index: AnnIndex, queries: Sequence[Sequence[float]] | np.ndarray) -> float:
    '''
    max over queries of (returned distance / true nearest distance) - 1, the true distance taken by linear scan.
    A query whose true and returned distances are both 0 contributes 0; a miss at true distance 0 contributes inf.

    Raises:
        * UsageError -- Empty query set.
    '''
    queries = [as_vector(q) for q in queries]
    if not queries:
        raise UsageError('empirical_epsilon needs at least one query.')

    worst = 0.0
    for q in queries:
        returned = query(index, q).distance
        true = float(point_distances(index.base.points, q).min())
        if true == 0.0:
            ratio = 0.0 if returned == 0.0 else float('inf')
        else:
            ratio = returned / true - 1.0
        worst = max(worst, ratio)
    return worst

def save_index(index: AnnIndex, path: str | pathlib.Path) -> None:
    '''
    Writes an index to disk:

    * header '<4sHBQQQI' -- magic b'AHDX', format version, backend id, n, d, seed, params JSON byte length
    * params JSON (utf-8, sorted keys)
    * uint32 array count, then per array a uint16 name length, the utf-8 name and the array in .npy format

    The first array is always the base points.
    '''
    params_json = json.dumps(dict(index.build_params), sort_keys=True).encode('utf-8')
    arrays = {'base': index.base.points}
    if index._structure is not None:
        arrays.update(index._structure.to_arrays())

    with open(path, 'wb') as file:
        file.write(INDEX_HEADER.pack(
            INDEX_MAGIC, INDEX_VERSION, BACKEND_IDS[index.backend],
            len(index.base), index.base.dim, index.seed, len(params_json)
        ))
        file.write(params_json)
        file.write(struct.pack('<I', len(arrays)))
        for name, arr in arrays.items():
            encoded = name.encode('utf-8')
            file.write(struct.pack('<H', len(encoded)))
            file.write(encoded)
            np.save(file, np.ascontiguousarray(arr), allow_pickle=False)

def load_index(path: str | pathlib.Path) -> AnnIndex:
    '''
    Reads an index written by save_index(). Query behavior is bit-identical to the saved index;
    counters start at zero.

    Raises:
        * UsageError -- Missing file, wrong magic, unsupported version or backend id, truncated or inconsistent payload.
    '''
    path = pathlib.Path(path)
    if not path.exists():
        raise UsageError(f'{path} not found.')

    try:
        with open(path, 'rb') as file:
            header = file.read(INDEX_HEADER.size)
            if len(header) < INDEX_HEADER.size:
                raise UsageError(f'{path}: truncated index header.')
            magic, version, backend_id, n, d, seed, params_len = INDEX_HEADER.unpack(header)
            if magic != INDEX_MAGIC:
                raise UsageError(f'{path}: not an index file (magic {magic!r}).')
            if version != INDEX_VERSION:
                raise UsageError(f'{path}: unsupported index format version {version}.')
            backends = {v: k for k, v in BACKEND_IDS.items()}
            if backend_id not in backends:
                raise UsageError(f'{path}: unknown backend id {backend_id}.')
            backend = backends[backend_id]

            params = json.loads(file.read(params_len).decode('utf-8'))
            (count,) = struct.unpack('<I', file.read(4))
            arrays = {}
            for _ in range(count):
                (name_len,) = struct.unpack('<H', file.read(2))
                name = file.read(name_len).decode('utf-8')
                arrays[name] = np.load(file, allow_pickle=False)
    except (struct.error, ValueError, EOFError, UnicodeDecodeError) as e:
        if isinstance(e, UsageError):
            raise
        raise UsageError(f'{path}: malformed index file ({e}).') from e

    base = PointSet(arrays.pop('base'))
    if len(base) != n or base.dim != d:
        raise UsageError(f'{path}: header says {n} x {d} points, payload holds {len(base)} x {base.dim}.')
    params = resolve_params(backend, params)

    try:
        if backend == 'kdtree-eps':
            structure = KdTree(base.points, leaf_size=params['leaf_size'], arrays=arrays)
        elif backend == 'navigable-graph':
            structure = NavigableGraph(
                base.points,
                max_degree=params['max_degree'],
                build_beam=params['build_beam'],
                query_beam=params['query_beam'],
                seed=seed,
                arrays=arrays
            )
        else:
            structure = None
    except KeyError as e:
        raise UsageError(f'{path}: index payload is missing array {e}.') from e

    return AnnIndex(backend, base, params, seed, structure)
