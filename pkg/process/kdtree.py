'''
kd-tree with (1+eps) priority search.

Nodes are stored in flat arrays (bounding boxes, children, leaf slices into a permutation of the
point indices). A query examines leaves in order of their box distance and stops once the closest
remaining box, inflated by (1+eps), is farther than the best point found, so the returned point is
never more than (1+eps) times farther than the true nearest neighbor. Queries are answered in
vectorized blocks.
'''

import numpy as np
import pathlib
import sys

proj_root = pathlib.Path(__file__).parent.parent
sys.path.append(proj_root)

from process.geometry import paired_distances

ARRAY_NAMES = ('order', 'lo', 'hi', 'left', 'right', 'start', 'end')

# float64 elements per temporary in a block of the batched search
BLOCK_ELEMENTS = 1 << 21

class KdTree:

    def __init__(self, points: np.ndarray, leaf_size: int = 8, arrays: dict[str, np.ndarray] | None = None):
        self.points = points
        self.leaf_size = leaf_size
        if arrays is None:
            arrays = self._build(points, leaf_size)
        for name in ARRAY_NAMES:
            setattr(self, name, arrays[name])
        self._prepare_leaves()

    @staticmethod
    def _build(points: np.ndarray, leaf_size: int) -> dict[str, np.ndarray]:
        '''
        Median split on the widest axis of each node's bounding box, O(n log n).
        A node whose points all coincide stays a leaf regardless of leaf_size.
        '''
        n = points.shape[0]
        order = np.arange(n, dtype=np.int64)
        lo, hi, left, right, start, end = [], [], [], [], [], []

        # (slice start, slice end, parent node, 0 for left child / 1 for right child)
        stack = [(0, n, -1, 0)]
        while stack:
            s, e, parent, side = stack.pop()
            node = len(start)
            segment = points[order[s:e]]
            node_lo, node_hi = segment.min(axis=0), segment.max(axis=0)
            lo.append(node_lo)
            hi.append(node_hi)
            start.append(s)
            end.append(e)
            left.append(-1)
            right.append(-1)
            if parent >= 0:
                if side == 0:
                    left[parent] = node
                else:
                    right[parent] = node

            widths = node_hi - node_lo
            axis = int(np.argmax(widths))
            if e - s > leaf_size and widths[axis] > 0:
                mid = (e - s) // 2
                partition = np.argpartition(segment[:, axis], mid)
                order[s:e] = order[s:e][partition]
                # right pushed first so the left subtree gets the lower node ids
                stack.append((s + mid, e, node, 1))
                stack.append((s, s + mid, node, 0))

        return {
            'order': order,
            'lo': np.array(lo, dtype=np.float64),
            'hi': np.array(hi, dtype=np.float64),
            'left': np.array(left, dtype=np.int64),
            'right': np.array(right, dtype=np.int64),
            'start': np.array(start, dtype=np.int64),
            'end': np.array(end, dtype=np.int64),
        }

    def to_arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in ARRAY_NAMES}

    @property
    def node_count(self) -> int:
        return int(self.start.shape[0])

    def _prepare_leaves(self) -> None:
        '''
        Padded per-leaf layout for batched search: leaf boxes, point indices sorted ascending (-1 pads) and
        their coordinates. A coincident leaf wider than leaf_size keeps only its leading indices, all of which
        share one position; leaf_sizes still counts every point.
        '''
        leaves = np.flatnonzero(self.left < 0)
        sizes = self.end[leaves] - self.start[leaves]
        width = int(min(sizes.max(), max(self.leaf_size, 1)))

        slots = np.full((leaves.shape[0], width), -1, dtype=np.int64)
        for row, leaf in enumerate(leaves):
            idx = np.sort(self.order[self.start[leaf]:self.end[leaf]])[:width]
            slots[row, :idx.shape[0]] = idx

        self.leaf_lo = self.lo[leaves]
        self.leaf_hi = self.hi[leaves]
        self.leaf_sizes = sizes
        self.leaf_slots = slots
        self.leaf_points = self.points[np.maximum(slots, 0)]

    def _leaf_box_distances(self, queries: np.ndarray) -> np.ndarray:
        '''Distance from every query to every leaf box, shape (queries, leaves).'''
        n_queries, d = queries.shape
        n_leaves = self.leaf_lo.shape[0]
        gap = np.maximum(self.leaf_lo[None, :, :] - queries[:, None, :], 0.0) + \
            np.maximum(queries[:, None, :] - self.leaf_hi[None, :, :], 0.0)
        gap = gap.reshape(n_queries * n_leaves, d)
        return np.sqrt(np.sum(gap * gap, axis=1)).reshape(n_queries, n_leaves)

    def search_many(self, queries: np.ndarray, eps: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        '''
        (1+eps)-approximate nearest neighbors of a batch of queries.

        Each query examines leaves in order of their box distance and stops at the first leaf whose box
        distance, inflated by (1+eps), exceeds the best point found so far. Queries are processed in blocks;
        a query's answer does not depend on the other queries of its block.

        Args:
            * queries (np.ndarray) -- Query points, shape (k, d).
            * eps (float) -- Approximation slack, >= 0. With eps = 0 the result is the exact nearest
              neighbor with the smallest index among ties.

        Returns:
            * tuple[np.ndarray, np.ndarray, np.ndarray] -- Neighbor indices, distances and the number of
              points examined, one entry per query.
        '''
        queries = np.asarray(queries, dtype=np.float64).reshape(-1, self.points.shape[1])
        n_queries, d = queries.shape
        n_leaves, width = self.leaf_slots.shape
        slack = 1.0 + eps

        best_i = np.full(n_queries, -1, dtype=np.int64)
        best_d = np.full(n_queries, np.inf)
        visits = np.zeros(n_queries, dtype=np.int64)

        block = max(1, BLOCK_ELEMENTS // (n_leaves * d))
        for s in range(0, n_queries, block):
            q = queries[s:s + block]
            box = self._leaf_box_distances(q)
            rank = np.argsort(box, axis=1, kind='stable')
            box = np.take_along_axis(box, rank, axis=1)

            bi, bd, vis = best_i[s:s + block], best_d[s:s + block], visits[s:s + block]
            rows = np.arange(q.shape[0])
            for r in range(n_leaves):
                # box distances are sorted per row, so a pruned query never resumes
                rows = rows[box[rows, r] * slack <= bd[rows]]
                if rows.shape[0] == 0:
                    break

                leaves = rank[rows, r]
                slots = self.leaf_slots[leaves]
                dists = paired_distances(
                    self.leaf_points[leaves].reshape(-1, d),
                    np.repeat(q[rows], width, axis=0),
                ).reshape(-1, width)
                dists[slots < 0] = np.inf

                # slots are ascending, so argmin lands on the smallest index among ties
                pick = np.argmin(dists, axis=1)
                line = np.arange(rows.shape[0])
                d_min = dists[line, pick]
                candidate = slots[line, pick]
                better = (d_min < bd[rows]) | ((d_min == bd[rows]) & (candidate < bi[rows]))
                bd[rows[better]] = d_min[better]
                bi[rows[better]] = candidate[better]
                vis[rows] += self.leaf_sizes[leaves]

        return best_i, best_d, visits

    def search(self, q: np.ndarray, eps: float) -> tuple[int, float, int]:
        '''
        (1+eps)-approximate nearest neighbor of a single query, see search_many().

        Returns:
            * tuple[int, float, int] -- (neighbor index, distance, number of points examined).
        '''
        i, d, visits = self.search_many(np.asarray(q, dtype=np.float64).reshape(1, -1), eps)
        return int(i[0]), float(d[0]), int(visits[0])
