"""Post-detection vote log (TR) and the pairwise similarity graph.

During observation collection every task goes to exactly one pool, chosen
to greedily raise the minimum per-pair co-appearance count until each pair
of workers has shared at least ``pair_pool_target`` pools. The similarity
graph weighs each pair by how often their votes agreed over the pools they
shared; pairs that never shared a pool carry no edge (downstream consumers
treat that as weight zero but exclude it from trust normalization).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import kernel

__all__ = ["TaskRepository", "SimilarityGraph", "build_similarity_graph", "greedy_pool", "add_pool_pairs"]


def _greedy_pool(counts, n, k, out):
    """Pool of k workers around the least-covered pair; ties break low-index."""
    best_i, best_j = 0, 1
    best = counts[0, 1]
    for i in range(n - 1):
        for j in range(i + 1, n):
            if counts[i, j] < best:
                best = counts[i, j]
                best_i, best_j = i, j
    out[0] = best_i
    out[1] = best_j
    chosen = 2
    while chosen < k:
        best_w = -1
        best_s = np.int64(2**62)
        for w in range(n):
            taken = False
            for t in range(chosen):
                if out[t] == w:
                    taken = True
            if taken:
                continue
            s = np.int64(0)
            for t in range(chosen):
                s += counts[out[t], w]
            if s < best_s:
                best_s = s
                best_w = w
        out[chosen] = best_w
        chosen += 1


def _add_pool_pairs(counts, pool, k):
    """Symmetric co-appearance increment for every pair in the pool."""
    for a in range(k):
        for b in range(a + 1, k):
            i = pool[a]
            j = pool[b]
            counts[i, j] += 1
            counts[j, i] += 1


def _min_pair_count(counts, n):
    best = counts[0, 1]
    for i in range(n - 1):
        for j in range(i + 1, n):
            if counts[i, j] < best:
                best = counts[i, j]
    return best


def _accumulate_pair_stats(pools, votes, count, k, agree, cooccur):
    """Brute per-pool accumulation of agreement and co-appearance matrices."""
    for t in range(count):
        for a in range(k):
            for b in range(a + 1, k):
                i = pools[t, a]
                j = pools[t, b]
                cooccur[i, j] += 1
                cooccur[j, i] += 1
                if votes[t, a] == votes[t, b]:
                    agree[i, j] += 1
                    agree[j, i] += 1


greedy_pool = kernel(_greedy_pool)
add_pool_pairs = kernel(_add_pool_pairs)
min_pair_count = kernel(_min_pair_count)
accumulate_pair_stats = kernel(_accumulate_pair_stats)


@dataclass
class TaskRepository:
    """Single-pool vote log gathered for mitigation.

    ``pools[t]`` lists the k workers task ``tasks[t]`` went to and
    ``votes[t]`` their answers, in pool order. ``complete`` is False when
    the simulation horizon cut collection short.
    """

    n_workers: int
    pool_size: int
    tasks: np.ndarray
    pools: np.ndarray
    votes: np.ndarray
    complete: bool = True

    @property
    def count(self) -> int:
        return len(self.tasks)

    def pair_counts(self) -> np.ndarray:
        counts = np.zeros((self.n_workers, self.n_workers), dtype=np.int64)
        for t in range(self.count):
            add_pool_pairs(counts, self.pools[t], self.pool_size)
        return counts

    def task_votes(self, index: int):
        return [(int(w), int(v)) for w, v in zip(self.pools[index], self.votes[index])]


@dataclass
class SimilarityGraph:
    """Complete weighted agreement graph over the roster.

    ``weight(i, j) = agree / co_occur`` where defined; ``has_edge`` is False
    for pairs that never shared a pool.
    """

    n: int
    agree: np.ndarray
    co_occur: np.ndarray

    def weight(self, i: int, j: int) -> float | None:
        if self.co_occur[i, j] == 0:
            return None
        return float(self.agree[i, j]) / float(self.co_occur[i, j])

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self.co_occur[i, j] > 0)

    def weight_matrix(self) -> np.ndarray:
        """Dense weights with no-edge pairs as 0.0 and a zero diagonal."""
        with np.errstate(invalid="ignore", divide="ignore"):
            w = np.where(self.co_occur > 0, self.agree / np.maximum(self.co_occur, 1), 0.0)
        np.fill_diagonal(w, 0.0)
        return w

    def edge_list(self) -> list[tuple[int, int, float]]:
        edges = []
        for i in range(self.n - 1):
            for j in range(i + 1, self.n):
                if self.has_edge(i, j):
                    edges.append((i, j, self.weight(i, j)))
        return edges


def build_similarity_graph(tr: TaskRepository) -> SimilarityGraph:
    """Aggregate the repository into its similarity graph."""
    if tr.count == 0:
        raise ValueError("cannot build a similarity graph from an empty repository")
    n = tr.n_workers
    agree = np.zeros((n, n), dtype=np.int64)
    cooccur = np.zeros((n, n), dtype=np.int64)
    accumulate_pair_stats(tr.pools, tr.votes, tr.count, tr.pool_size, agree, cooccur)
    return SimilarityGraph(n, agree, cooccur)
