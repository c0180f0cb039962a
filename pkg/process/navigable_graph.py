'''
Hierarchical navigable small-world graph (HNSW-style) for empirical nearest-neighbor search.

Levels are drawn from a seeded exponential distribution; each point is linked to its closest
candidates found by a beam search, and neighbor lists are pruned back to the degree cap by distance.
There is no worst-case guarantee: callers measure the realized slack with empirical_epsilon().
'''

import heapq
import math
import numpy as np
import pathlib
import sys

proj_root = pathlib.Path(__file__).parent.parent
sys.path.append(proj_root)

from process.geometry import point_distances

class NavigableGraph:

    def __init__(
        self,
        points: np.ndarray,
        max_degree: int = 16,
        build_beam: int = 100,
        query_beam: int = 32,
        seed: int = 0,
        arrays: dict[str, np.ndarray] | None = None
    ):
        self.points = points
        self.max_degree = max_degree
        self.build_beam = build_beam
        self.query_beam = query_beam
        self.seed = seed

        if arrays is None:
            self._build()
        else:
            self._load_arrays(arrays)

    def _build(self) -> None:
        n = self.points.shape[0]
        rng = np.random.default_rng(self.seed)
        level_mult = 1.0 / math.log(max(self.max_degree, 2))
        # 1 - U lies in (0, 1], so the log is finite
        self.levels = np.floor(-np.log(1.0 - rng.random(n)) * level_mult).astype(np.int64)

        self.layers: list[dict[int, list[int]]] = []
        self.entry, self.top = -1, -1

        for node in range(n):
            level = int(self.levels[node])
            while len(self.layers) <= level:
                self.layers.append({})
            for layer in range(level + 1):
                self.layers[layer][node] = []

            if self.entry < 0:
                self.entry, self.top = node, level
                continue

            q = self.points[node]
            ep = self.entry
            ep_d = float(point_distances(self.points[ep:ep + 1], q)[0])
            for layer in range(self.top, level, -1):
                ep, ep_d, _ = self._greedy(q, ep, ep_d, layer)

            found = [(ep_d, ep)]
            for layer in range(min(level, self.top), -1, -1):
                found, _ = self._search_layer(q, found, self.build_beam, layer)
                cap = self._cap(layer)
                chosen = [i for _, i in found[:self.max_degree]]
                self.layers[layer][node] = chosen
                for nb in chosen:
                    links = self.layers[layer][nb]
                    links.append(node)
                    if len(links) > cap:
                        self.layers[layer][nb] = self._prune(nb, links, cap)

            if level > self.top:
                self.entry, self.top = node, level

    def _cap(self, layer: int) -> int:
        return 2 * self.max_degree if layer == 0 else self.max_degree

    def _prune(self, node: int, links: list[int], cap: int) -> list[int]:
        dists = point_distances(self.points[links], self.points[node])
        ranked = sorted(zip(dists.tolist(), links))
        return [i for _, i in ranked[:cap]]

    def _greedy(self, q: np.ndarray, ep: int, ep_d: float, layer: int) -> tuple[int, float, int]:
        visits = 0
        improved = True
        while improved:
            improved = False
            links = self.layers[layer][ep]
            if not links:
                break
            dists = point_distances(self.points[links], q)
            visits += len(links)
            for d, i in zip(dists.tolist(), links):
                if d < ep_d or (d == ep_d and i < ep):
                    ep, ep_d, improved = i, d, True
        return ep, ep_d, visits

    def _search_layer(self, q: np.ndarray, entries: list[tuple[float, int]], beam: int, layer: int) -> tuple[list[tuple[float, int]], int]:
        '''
        Beam search within one layer. Returns the closest `beam` nodes found as sorted (distance, id)
        pairs and the number of distance evaluations.
        '''
        visited = {i for _, i in entries}
        candidates = list(entries)
        heapq.heapify(candidates)
        # max-heap of the current best, keyed on (-distance, -id) so the worst sits on top
        best = [(-d, -i) for d, i in entries]
        heapq.heapify(best)
        while len(best) > beam:
            heapq.heappop(best)
        visits = 0

        while candidates:
            d, node = heapq.heappop(candidates)
            worst = -best[0][0]
            if d > worst and len(best) >= beam:
                break

            fresh = [i for i in self.layers[layer][node] if i not in visited]
            if not fresh:
                continue
            visited.update(fresh)
            dists = point_distances(self.points[fresh], q)
            visits += len(fresh)

            for nd, ni in zip(dists.tolist(), fresh):
                worst_key = best[0]
                if len(best) < beam or (nd, ni) < (-worst_key[0], -worst_key[1]):
                    heapq.heappush(candidates, (nd, ni))
                    heapq.heappush(best, (-nd, -ni))
                    if len(best) > beam:
                        heapq.heappop(best)

        return sorted((-d, -i) for d, i in best), visits

    def search(self, q: np.ndarray) -> tuple[int, float, int]:
        '''
        Approximate nearest neighbor of q: greedy descent through the upper layers,
        then a beam search of width query_beam on the bottom layer.

        Returns:
            * tuple[int, float, int] -- (neighbor index, distance, number of distance evaluations).
        '''
        ep = self.entry
        ep_d = float(point_distances(self.points[ep:ep + 1], q)[0])
        visits = 1
        for layer in range(self.top, 0, -1):
            ep, ep_d, v = self._greedy(q, ep, ep_d, layer)
            visits += v

        found, v = self._search_layer(q, [(ep_d, ep)], max(self.query_beam, 1), 0)
        visits += v
        best_d, best_i = found[0]
        return int(best_i), float(best_d), visits

    def to_arrays(self) -> dict[str, np.ndarray]:
        '''
        Flattens each layer's adjacency into (nodes, offsets, flat links) arrays.
        '''
        arrays = {
            'levels': self.levels,
            'header': np.array([self.entry, self.top, len(self.layers)], dtype=np.int64),
        }
        for layer, adjacency in enumerate(self.layers):
            nodes = sorted(adjacency)
            offsets = np.zeros(len(nodes) + 1, dtype=np.int64)
            offsets[1:] = np.cumsum([len(adjacency[i]) for i in nodes])
            flat = [i for node in nodes for i in adjacency[node]]
            arrays[f'layer{layer}_nodes'] = np.array(nodes, dtype=np.int64)
            arrays[f'layer{layer}_offsets'] = offsets
            arrays[f'layer{layer}_links'] = np.array(flat, dtype=np.int64)
        return arrays

    def _load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        self.levels = arrays['levels']
        entry, top, layer_count = (int(v) for v in arrays['header'])
        self.entry, self.top = entry, top
        self.layers = []
        for layer in range(layer_count):
            nodes = arrays[f'layer{layer}_nodes'].tolist()
            offsets = arrays[f'layer{layer}_offsets'].tolist()
            links = arrays[f'layer{layer}_links'].tolist()
            self.layers.append({node: links[offsets[k]:offsets[k + 1]] for k, node in enumerate(nodes)})
