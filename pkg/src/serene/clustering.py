"""Graph clustering used by partitioning: MCL, spectral bisection, 1-D 2-means.

All three operate on small dense matrices (one row per worker), so they are
written as straightforward numpy code with deterministic tie-breaking.
"""

from __future__ import annotations

import numpy as np

__all__ = ["mcl_clusters", "spectral_bisection", "kmeans1d_two"]

MCL_EXPANSION = 2
MCL_INFLATION = 2.0
MCL_SELF_LOOP = 1.0
MCL_TOL = 1e-6
MCL_MAX_ITERS = 200
_ATTRACTOR_EPS = 1e-7

# Eigengap gate: a sign split only counts as real two-cluster structure when
# the algebraic connectivity sits clearly below the bulk spectrum. Complete
# graphs without block structure give ratios near 1.
SPECTRAL_GAP_MAX = 0.94


def mcl_clusters(weights: np.ndarray) -> list[list[int]]:
    """Markov clustering of a symmetric weight matrix.

    Adds unit self-loops, column-normalizes, then alternates expansion
    (matrix power) and inflation (element-wise power + renormalize) to a
    fixed point. Clusters are the supports of attractor rows, merged when
    they overlap. A uniform graph collapses to a single cluster.
    """
    n = weights.shape[0]
    if n == 1:
        return [[0]]
    m = weights.astype(np.float64).copy()
    np.fill_diagonal(m, MCL_SELF_LOOP)
    m = m / m.sum(axis=0)

    for _ in range(MCL_MAX_ITERS):
        prev = m
        m = np.linalg.matrix_power(m, MCL_EXPANSION)
        m = np.power(m, MCL_INFLATION)
        m = m / m.sum(axis=0)
        if np.abs(m - prev).max() < MCL_TOL:
            break

    attractors = [i for i in range(n) if m[i, i] > _ATTRACTOR_EPS]
    if not attractors:  # numerically degenerate; treat as unclustered
        return [list(range(n))]

    # Union attractor supports that overlap into final clusters.
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a in attractors:
        support = np.nonzero(m[a] > _ATTRACTOR_EPS)[0]
        for node in support:
            ra, rn = find(a), find(int(node))
            if ra != rn:
                parent[rn] = ra

    groups: dict[int, list[int]] = {}
    for node in range(n):
        groups.setdefault(find(node), []).append(node)
    return sorted(groups.values(), key=lambda g: (-len(g), g[0]))


def spectral_bisection(weights: np.ndarray) -> tuple[list[int], list[int]] | None:
    """Sign split of the Fiedler vector of the unnormalized Laplacian.

    Returns None when no two-cluster structure exists: a flat or one-sided
    Fiedler vector, or an eigengap ratio lambda2/lambda3 above
    ``SPECTRAL_GAP_MAX`` (the split would just carve noise). Callers treat
    None as a partitioning failure.
    """
    n = weights.shape[0]
    if n < 3:
        return None
    w = weights.astype(np.float64).copy()
    np.fill_diagonal(w, 0.0)
    lap = np.diag(w.sum(axis=1)) - w
    eigvals, eigvecs = np.linalg.eigh(lap)
    if eigvals[2] <= 1e-12 or eigvals[1] / eigvals[2] > SPECTRAL_GAP_MAX:
        return None
    fiedler = eigvecs[:, 1]
    if np.ptp(fiedler) < 1e-12:
        return None
    left = [i for i in range(n) if fiedler[i] < 0]
    right = [i for i in range(n) if fiedler[i] >= 0]
    if not left or not right:
        return None
    return left, right


def kmeans1d_two(values: np.ndarray) -> tuple[list[int], list[int]] | None:
    """Two-means over scalars: centroids start at min and max, run to a fixed point.

    Returns (low indices, high indices), or None when all values are equal
    (degenerate: no split exists). Assignment ties go to the high cluster.
    """
    vals = np.asarray(values, dtype=np.float64)
    n = len(vals)
    if n < 2 or np.ptp(vals) == 0.0:
        return None
    lo, hi = float(vals.min()), float(vals.max())
    assign = None
    for _ in range(n + 1):  # 1-D Lloyd reaches a fixed point within n steps
        new_assign = np.where(np.abs(vals - lo) < np.abs(vals - hi), 0, 1)
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        if assign.min() == assign.max():  # defensive; min/max init keeps both sides filled
            return None
        lo = float(vals[assign == 0].mean())
        hi = float(vals[assign == 1].mean())
    low = [i for i in range(n) if assign[i] == 0]
    high = [i for i in range(n) if assign[i] == 1]
    return low, high
