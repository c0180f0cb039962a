'''
Vector and point-set primitives, the Euclidean metric, geometric transformations and
dataset-geometry statistics.

Every distance in the project goes through point_distances() or its row-paired twin paired_distances(),
so the oracle, the indexes and the cached propagation step agree bit-for-bit on the same pair of points.
'''

from dataclasses import dataclass
import math
import numpy as np
import pathlib
from typing import Iterable, NamedTuple, Sequence
import sys

proj_root = pathlib.Path(__file__).parent.parent
sys.path.append(proj_root)

from utils.general import UsageError

ORTHOGONALITY_TOLERANCE = 1e-9

TRANSFORM_KINDS = ('translation', 'rotation', 'uniform_scale', 'diagonal_scale')

def as_vector(coords: Iterable[float] | np.ndarray) -> np.ndarray:
    '''
    Validates coordinates and returns them as a read-only 1-D float64 array.

    Args:
        * coords (Iterable[float] | np.ndarray) -- Vector coordinates, length d >= 1.

    Raises:
        * UsageError -- Empty, non 1-D, or non-finite coordinates.

    Returns:
        * np.ndarray -- Frozen copy of the coordinates.
    '''
    vec = np.array(coords, dtype=np.float64)
    if vec.ndim != 1 or vec.shape[0] < 1:
        raise UsageError(f'A vector must be 1-D with at least one coordinate, got shape {vec.shape}.')
    if not np.all(np.isfinite(vec)):
        raise UsageError('Vector coordinates must be finite.')
    vec.flags.writeable = False
    return vec

@dataclass(frozen=True, eq=False)
class PointSet:
    '''
    Ordered, immutable collection of d-dimensional points (one entity's multi-vector representation).
    Duplicates are allowed; insertion order is preserved.
    '''
    points: np.ndarray

    def __post_init__(self):
        try:
            arr = np.array(self.points, dtype=np.float64, order='C')
        except (TypeError, ValueError) as e:
            raise UsageError(f'Point coordinates must be a rectangular numeric array: {e}') from e
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise UsageError(f'A point set needs at least one point of dimension >= 1, got shape {arr.shape}.')
        if not np.all(np.isfinite(arr)):
            raise UsageError('Point coordinates must be finite.')
        arr.flags.writeable = False
        object.__setattr__(self, 'points', arr)

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence[float]]) -> 'PointSet':
        rows = [as_vector(r) for r in rows]
        if not rows:
            raise UsageError('A point set needs at least one point.')
        dims = {len(r) for r in rows}
        if len(dims) > 1:
            raise UsageError(f'All points of a set must share one dimension, got {sorted(dims)}.')
        return cls(np.vstack(rows))

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def __getitem__(self, idx: int) -> np.ndarray:
        return self.points[idx]

    def append(self, vec: Sequence[float] | np.ndarray) -> 'PointSet':
        vec = as_vector(vec)
        check_dims(self.dim, len(vec))
        return PointSet(np.vstack([self.points, vec]))

    def delete(self, idx: int) -> 'PointSet':
        if len(self) < 2:
            raise UsageError('Cannot delete the only point of a set.')
        if not -len(self) <= idx < len(self):
            raise UsageError(f'Index {idx} out of range for a set of {len(self)} points.')
        return PointSet(np.delete(self.points, idx, axis=0))

    def replace(self, idx: int, vec: Sequence[float] | np.ndarray) -> 'PointSet':
        vec = as_vector(vec)
        check_dims(self.dim, len(vec))
        if not -len(self) <= idx < len(self):
            raise UsageError(f'Index {idx} out of range for a set of {len(self)} points.')
        moved = self.points.copy()
        moved[idx] = vec
        return PointSet(moved)

    def equals(self, other: 'PointSet') -> bool:
        return self.points.shape == other.points.shape and bool(np.array_equal(self.points, other.points))

class GeometryStats(NamedTuple):
    d_max: float
    delta: float
    spread: float

@dataclass(frozen=True, eq=False)
class Transform:
    '''
    One of the four transformations the robustness checks apply to both sets.
    Build instances with the classmethod constructors; the payload is validated on construction.
    '''
    kind: str
    payload: np.ndarray | float

    def __post_init__(self):
        if self.kind not in TRANSFORM_KINDS:
            raise UsageError(f'Unknown transform kind "{self.kind}", expected one of {TRANSFORM_KINDS}.')

        if self.kind == 'uniform_scale':
            factor = float(self.payload)
            if not math.isfinite(factor) or factor <= 0:
                raise UsageError(f'Uniform scale factor must be positive and finite, got {self.payload}.')
            object.__setattr__(self, 'payload', factor)
            return

        payload = np.array(self.payload, dtype=np.float64)
        if not np.all(np.isfinite(payload)):
            raise UsageError(f'{self.kind} entries must be finite.')

        if self.kind == 'rotation':
            if payload.ndim != 2 or payload.shape[0] != payload.shape[1] or payload.shape[0] < 1:
                raise UsageError(f'A rotation needs a square d x d matrix, got shape {payload.shape}.')
            deviation = np.abs(payload.T @ payload - np.eye(payload.shape[0])).max()
            if deviation > ORTHOGONALITY_TOLERANCE:
                raise UsageError(f'Rotation matrix is not orthogonal: max |RtR - I| = {deviation:.3e}.')
        else:
            if payload.ndim != 1 or payload.shape[0] < 1:
                raise UsageError(f'A {self.kind} needs a 1-D vector of length d, got shape {payload.shape}.')
            if self.kind == 'diagonal_scale' and np.any(payload <= 0):
                raise UsageError('Diagonal scale entries must all be positive.')

        payload.flags.writeable = False
        object.__setattr__(self, 'payload', payload)

    @classmethod
    def translation(cls, t: Sequence[float] | np.ndarray) -> 'Transform':
        return cls('translation', t)

    @classmethod
    def rotation(cls, matrix: Sequence[Sequence[float]] | np.ndarray) -> 'Transform':
        return cls('rotation', matrix)

    @classmethod
    def uniform_scale(cls, factor: float) -> 'Transform':
        return cls('uniform_scale', factor)

    @classmethod
    def diagonal_scale(cls, factors: Sequence[float] | np.ndarray) -> 'Transform':
        return cls('diagonal_scale', factors)

    @property
    def dim(self) -> int | None:
        '''Dimension the transform applies to; None for uniform scaling, which fits any d.'''
        if self.kind == 'uniform_scale':
            return None
        return int(self.payload.shape[0])

    def inverse(self) -> 'Transform':
        if self.kind == 'translation':
            return Transform.translation(-self.payload)
        if self.kind == 'rotation':
            return Transform.rotation(self.payload.T)
        if self.kind == 'uniform_scale':
            return Transform.uniform_scale(1.0 / self.payload)
        return Transform.diagonal_scale(1.0 / self.payload)

def check_dims(expected: int, got: int) -> None:
    if expected != got:
        raise UsageError(f'Dimension mismatch: {expected} != {got}.')

def point_distances(points: np.ndarray, q: np.ndarray) -> np.ndarray:
    '''
    Euclidean distances from q to every row of points.
    Each row is reduced independently, so a row's distance does not depend on which other rows are passed.
    '''
    diff = points - q
    return np.sqrt(np.sum(diff * diff, axis=1))

def paired_distances(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    '''
    Row-by-row distances ||x[i] - y[i]||, reduced the same way as point_distances(), so both agree bit-for-bit
    on the same pair of points.
    '''
    diff = x - y
    return np.sqrt(np.sum(diff * diff, axis=1))

def euclidean_distance(u: Sequence[float] | np.ndarray, v: Sequence[float] | np.ndarray) -> float:
    '''
    ||u - v||_2.

    Raises:
        * UsageError -- u and v have different dimensions.
    '''
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    check_dims(u.shape[-1], v.shape[-1])
    return float(point_distances(v.reshape(1, -1), u)[0])

def apply_transform(s: PointSet, transform: Transform) -> PointSet:
    '''
    Elementwise image of a point set under a transform. Cardinality and order are preserved.

    Args:
        * s (PointSet) -- Input set.
        * transform (Transform) -- Transform to apply.

    Raises:
        * UsageError -- Transform dimension does not match s.dim.

    Returns:
        * PointSet -- Transformed copy.
    '''
    if transform.dim is not None:
        check_dims(s.dim, transform.dim)

    if transform.kind == 'translation':
        return PointSet(s.points + transform.payload)
    if transform.kind == 'rotation':
        # rows are points, so R p for every p is P R^T
        return PointSet(s.points @ transform.payload.T)
    return PointSet(s.points * transform.payload)

def condition_number(scale: Transform | Sequence[float] | np.ndarray) -> float:
    '''
    kappa(Lambda) = max_i lambda_i / min_i lambda_i for a diagonal scaling.

    Raises:
        * UsageError -- Non-positive factor, or a transform that is not a diagonal scale.
    '''
    if isinstance(scale, Transform):
        if scale.kind != 'diagonal_scale':
            raise UsageError(f'Condition number is defined for diagonal scales, got {scale.kind}.')
        factors = scale.payload
    else:
        factors = np.asarray(scale, dtype=np.float64)
        if factors.ndim != 1 or factors.shape[0] < 1:
            raise UsageError('Condition number needs at least one scale factor.')
        if np.any(factors <= 0) or not np.all(np.isfinite(factors)):
            raise UsageError('Scale factors must be positive and finite.')
    return float(factors.max() / factors.min())

def geometry_stats(a: PointSet, b: PointSet) -> GeometryStats:
    '''
    Exhaustive O(mn) scan for the largest and smallest cross-set distances.

    Returns:
        * GeometryStats -- (D_max, delta, sqrt(D_max^2 - delta^2)).
    '''
    check_dims(a.dim, b.dim)
    d_max, delta = 0.0, math.inf
    for row in a.points:
        dists = point_distances(b.points, row)
        d_max = max(d_max, float(dists.max()))
        delta = min(delta, float(dists.min()))
    spread = math.sqrt(max(d_max * d_max - delta * delta, 0.0))
    return GeometryStats(d_max, delta, spread)

def random_rotation(d: int, seed: int) -> Transform:
    '''
    Deterministic random rotation: QR orthogonalization of a seeded Gaussian matrix,
    with column signs fixed so the result does not depend on the QR implementation's sign convention.

    Args:
        * d (int) -- Dimension, >= 1.
        * seed (int) -- Seed for numpy's default generator.

    Returns:
        * Transform -- kind 'rotation'.
    '''
    if d < 1:
        raise UsageError(f'Rotation dimension must be >= 1, got {d}.')
    rng = np.random.default_rng(seed)
    gaussian = rng.standard_normal((d, d))
    q, r = np.linalg.qr(gaussian)
    signs = np.where(np.diag(r) < 0, -1.0, 1.0)
    return Transform.rotation(q * signs)
