'''
Reference O(mn) Hausdorff distance. Ground truth for every approximation test.

The scan is deliberately plain: one pass over the source set, every target distance evaluated,
no early exit.
'''

from dataclasses import dataclass
import numpy as np
import pathlib
from typing import NamedTuple
import sys

proj_root = pathlib.Path(__file__).parent.parent
sys.path.append(proj_root)

from process.geometry import PointSet, check_dims, point_distances

class DirectedResult(NamedTuple):
    value: float
    witness_src: int
    witness_dst: int

@dataclass(frozen=True)
class HausdorffResult:
    value: float
    forward: DirectedResult
    backward: DirectedResult
    mode: str = 'exact'

def directed_hausdorff_exact(src: PointSet, dst: PointSet) -> DirectedResult:
    '''
    sup over src of the distance to the nearest point of dst.

    Ties are broken by the smallest source index, then the smallest target index.

    Args:
        * src (PointSet) -- Source set.
        * dst (PointSet) -- Target set.

    Raises:
        * UsageError -- Dimension mismatch.

    Returns:
        * DirectedResult -- value, index of the source point attaining it, index of its nearest target point.
    '''
    check_dims(src.dim, dst.dim)

    best, witness_src, witness_dst = -1.0, 0, 0
    for i, row in enumerate(src.points):
        dists = point_distances(dst.points, row)
        # argmin returns the first occurrence, i.e. the smallest target index
        j = int(np.argmin(dists))
        nearest = float(dists[j])
        if nearest > best:
            best, witness_src, witness_dst = nearest, i, j

    return DirectedResult(best, witness_src, witness_dst)

def hausdorff_exact(a: PointSet, b: PointSet) -> HausdorffResult:
    '''
    Symmetric Hausdorff distance max(d(A -> B), d(B -> A)) with both directed witnesses.
    '''
    forward = directed_hausdorff_exact(a, b)
    backward = directed_hausdorff_exact(b, a)
    return HausdorffResult(max(forward.value, backward.value), forward, backward)

def nearest_distances_exact(src: PointSet, dst: PointSet) -> np.ndarray:
    '''
    Exact nearest-neighbor distance d(x, dst) for every x in src, in src order.
    '''
    check_dims(src.dim, dst.dim)
    return np.array([point_distances(dst.points, row).min() for row in src.points], dtype=np.float64)
