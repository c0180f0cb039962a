'''
Seeded synthetic point-set generators for sweeps, benchmarks, verification suites and tests.
Equal inputs always produce bit-identical outputs.
'''

from dataclasses import dataclass
import math
import numpy as np
import pathlib
import sys

proj_root = pathlib.Path(__file__).parent.parent
sys.path.append(proj_root)

from process.geometry import PointSet, Transform, as_vector, geometry_stats
from utils.general import UsageError

FAMILIES = ('uniform-cube', 'gaussian-clusters', 'sphere-shell')

# well_separated_pair() keeps halving the cluster radius until delta / D_max reaches this ratio
SEPARATION_RATIO = 0.9
SEPARATION_ATTEMPTS = 30

def _positive_int(name: str, value: int) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
        raise UsageError(f'{name} must be a positive integer, got {value!r}.')
    return int(value)

def _seed(value: int) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or not 0 <= value < 2 ** 64:
        raise UsageError(f'seed must be an unsigned 64-bit integer, got {value!r}.')
    return int(value)

@dataclass(frozen=True)
class GenSpec:
    '''
    Generator settings for generate_pair().

    k and cluster_spread only apply to 'gaussian-clusters'; k defaults to min(4, m, n).
    '''
    family: str
    m: int
    n: int
    d: int
    seed: int = 0
    k: int | None = None
    cluster_spread: float = 0.1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise UsageError(f'Unknown family "{self.family}", expected one of {FAMILIES}.')
        for name in ('m', 'n', 'd'):
            object.__setattr__(self, name, _positive_int(name, getattr(self, name)))
        object.__setattr__(self, 'seed', _seed(self.seed))

        if self.family == 'gaussian-clusters':
            k = min(4, self.m, self.n) if self.k is None else _positive_int('k', self.k)
            if k > min(self.m, self.n):
                raise UsageError(f'Cluster count k={k} exceeds min(m, n)={min(self.m, self.n)}.')
            object.__setattr__(self, 'k', k)
            if not math.isfinite(self.cluster_spread) or self.cluster_spread < 0:
                raise UsageError(f'cluster_spread must be finite and >= 0, got {self.cluster_spread}.')

def _unit_rows(rng: np.random.Generator, count: int, d: int) -> np.ndarray:
    gaussian = rng.standard_normal((count, d))
    norms = np.linalg.norm(gaussian, axis=1)
    # a zero draw has no direction, use the first axis
    zero = norms == 0
    gaussian[zero] = 0.0
    gaussian[zero, 0] = 1.0
    norms[zero] = 1.0
    return gaussian / norms[:, None]

def generate_pair(spec: GenSpec) -> tuple[PointSet, PointSet]:
    '''
    Draws (A, B) with |A| = spec.m, |B| = spec.n in dimension spec.d.

    * uniform-cube -- independent uniform points in [0, 1]^d.
    * gaussian-clusters -- k centers drawn uniformly in [0, 1]^d and shared by both sets; each point picks a
      center uniformly and adds N(0, cluster_spread^2) noise per coordinate.
    * sphere-shell -- points uniform on the unit sphere surface.
    '''
    rng = np.random.default_rng(spec.seed)
    m, n, d = spec.m, spec.n, spec.d

    if spec.family == 'uniform-cube':
        a = rng.random((m, d))
        b = rng.random((n, d))
    elif spec.family == 'gaussian-clusters':
        centers = rng.random((spec.k, d))
        a = centers[rng.integers(0, spec.k, m)] + spec.cluster_spread * rng.standard_normal((m, d))
        b = centers[rng.integers(0, spec.k, n)] + spec.cluster_spread * rng.standard_normal((n, d))
    else:
        a = _unit_rows(rng, m, d)
        b = _unit_rows(rng, n, d)

    return PointSet(a), PointSet(b)

def _ball(rng: np.random.Generator, count: int, d: int) -> tuple[np.ndarray, np.ndarray]:
    directions = _unit_rows(rng, count, d)
    radii = rng.random(count) ** (1.0 / d)
    return directions, radii

def well_separated_pair(d: int, gap: float, m: int, n: int, seed: int = 0, radius: float = 1.0) -> tuple[PointSet, PointSet]:
    '''
    Two ball-shaped clusters, A around the origin and B around gap * e_1, so that delta / D_max >= 0.9.
    The radius is halved and the same draws rescaled until the ratio holds.

    Raises:
        * UsageError -- Non-positive gap or radius, invalid sizes or seed.
    '''
    d, m, n = _positive_int('d', d), _positive_int('m', m), _positive_int('n', n)
    seed = _seed(seed)
    if not math.isfinite(gap) or gap <= 0:
        raise UsageError(f'gap must be positive and finite, got {gap}.')
    if not math.isfinite(radius) or radius <= 0:
        raise UsageError(f'radius must be positive and finite, got {radius}.')

    rng = np.random.default_rng(seed)
    dir_a, rad_a = _ball(rng, m, d)
    dir_b, rad_b = _ball(rng, n, d)
    offset = np.zeros(d)
    offset[0] = gap

    for _ in range(SEPARATION_ATTEMPTS):
        a = PointSet(dir_a * (radius * rad_a)[:, None])
        b = PointSet(offset + dir_b * (radius * rad_b)[:, None])
        stats = geometry_stats(a, b)
        if stats.d_max == 0 or stats.delta / stats.d_max >= SEPARATION_RATIO:
            break
        radius /= 2

    return a, b

def random_translation(d: int, scale: float = 1.0, seed: int = 0) -> Transform:
    '''
    Translation by a vector with coordinates uniform in [-scale, scale].
    '''
    d = _positive_int('d', d)
    rng = np.random.default_rng(_seed(seed))
    return Transform.translation(rng.uniform(-scale, scale, d))

def random_diagonal_scale(d: int, kappa: float, seed: int = 0) -> Transform:
    '''
    Diagonal scale with smallest factor exactly 1 and largest exactly kappa, remaining factors uniform
    in between. For d = 1 the only such scale with condition number 1 is (1.0,).

    Raises:
        * UsageError -- kappa < 1.
    '''
    d = _positive_int('d', d)
    if not math.isfinite(kappa) or kappa < 1:
        raise UsageError(f'kappa must be finite and >= 1, got {kappa}.')
    rng = np.random.default_rng(_seed(seed))
    if d == 1:
        return Transform.diagonal_scale([1.0])
    factors = rng.uniform(1.0, kappa, d)
    lowest, highest = rng.permutation(d)[:2]
    factors[lowest] = 1.0
    factors[highest] = kappa
    return Transform.diagonal_scale(factors)

def random_point_near(s: PointSet, radius: float, seed: int = 0, idx: int | None = None) -> np.ndarray:
    '''
    A point within `radius` of s[idx] (a random member when idx is None), in a uniformly random direction.
    '''
    if not math.isfinite(radius) or radius < 0:
        raise UsageError(f'radius must be finite and >= 0, got {radius}.')
    rng = np.random.default_rng(_seed(seed))
    if idx is None:
        idx = int(rng.integers(0, len(s)))
    direction = _unit_rows(rng, 1, s.dim)[0]
    return as_vector(s[idx] + direction * (radius * rng.random()))
