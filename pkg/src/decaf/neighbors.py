"""KD-tree for L1 nearest-neighbor queries with deterministic tie-breaking.

Points are expected pre-normalized (each coordinate divided by its range
width) so the L1 distance matches the range-normalized proximity metric up
to a constant factor.  Ties in distance are broken by the smaller point
index, which a generic library tree does not guarantee.
"""

from __future__ import annotations

import heapq

import numpy as np

__all__ = ["KDTree"]

_LEAF_SIZE = 8


class _Node:
    __slots__ = ("axis", "split", "left", "right", "indices")

    def __init__(self, axis=-1, split=0.0, left=None, right=None, indices=None):
        self.axis = axis
        self.split = split
        self.left = left
        self.right = right
        self.indices = indices


class KDTree:
    def __init__(self, points: np.ndarray):
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or len(points) == 0:
            raise ValueError("need a non-empty 2-D point array")
        self.points = points
        self.dim = points.shape[1]
        self.root = self._build(np.arange(len(points)), 0)

    def _build(self, idx: np.ndarray, depth: int) -> _Node:
        if len(idx) <= _LEAF_SIZE:
            return _Node(indices=idx)
        axis = depth % self.dim
        order = idx[np.argsort(self.points[idx, axis], kind="stable")]
        m = len(order) // 2
        split = float(self.points[order[m], axis])
        left, right = order[:m], order[m:]
        if len(left) == 0:  # all coordinates equal on this axis
            return _Node(indices=idx)
        return _Node(axis=axis, split=split,
                     left=self._build(left, depth + 1),
                     right=self._build(right, depth + 1))

    def query(self, q, k: int) -> list[tuple[float, int]]:
        """The k nearest points by (L1 distance, index); sorted ascending."""
        if k < 1:
            raise ValueError("k must be >= 1")
        q = np.asarray(q, dtype=float)
        if q.shape != (self.dim,):
            raise ValueError(f"query must have shape ({self.dim},)")
        # max-heap of the current best k, keyed so heap[0] is the worst
        heap: list[tuple[float, int]] = []

        def offer(dist, idx):
            if len(heap) < k:
                heapq.heappush(heap, (-dist, -idx))
            elif (dist, idx) < (-heap[0][0], -heap[0][1]):
                heapq.heapreplace(heap, (-dist, -idx))

        def visit(node):
            if node.indices is not None:
                pts = self.points[node.indices]
                dists = np.sum(np.abs(pts - q), axis=1)
                for d, i in zip(dists, node.indices):
                    offer(float(d), int(i))
                return
            gap = q[node.axis] - node.split
            near, far = (node.left, node.right) if gap < 0 else (node.right, node.left)
            visit(near)
            # a far-side point can still tie the current worst, so only
            # prune on a strict bound violation
            if len(heap) < k or abs(gap) <= -heap[0][0]:
                visit(far)

        visit(self.root)
        return sorted((-d, -i) for d, i in heap)
