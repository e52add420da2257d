"""EigenTrust-style global trust over the agreement graph.

Local trust of worker i in worker j is their raw agreement count,
normalized per row; rows with no agreements at all spread trust uniformly
over the other workers. The global trust vector is the fixed point of
t <- C^T t starting from uniform. Workers whose converged trust falls
below ``tau`` times the uniform share are flagged as naive malicious:
they vote randomly, so nobody ever agrees with them and no trust flows
their way.
"""

from __future__ import annotations

import logging

import numpy as np

__all__ = ["eigentrust_scores", "eigentrust_filter"]

logger = logging.getLogger(__name__)

CONVERGENCE_TOL = 1e-6
MAX_ITERS = 1000
TRUST_THRESHOLD = 0.5  # fraction of the uniform share


def eigentrust_scores(agree: np.ndarray) -> np.ndarray:
    """Converged global trust vector; falls back to row sums on non-convergence."""
    n = agree.shape[0]
    local = agree.astype(np.float64).copy()
    np.fill_diagonal(local, 0.0)
    row_sums = local.sum(axis=1)
    c = np.empty_like(local)
    for i in range(n):
        if row_sums[i] > 0:
            c[i] = local[i] / row_sums[i]
        else:  # dangling row: uniform over the others
            c[i] = 1.0 / (n - 1)
            c[i, i] = 0.0

    t = np.full(n, 1.0 / n)
    for _ in range(MAX_ITERS):
        t_next = c.T @ t
        total = t_next.sum()
        if total > 0:
            t_next /= total
        if np.abs(t_next - t).sum() < CONVERGENCE_TOL:
            return t_next
        t = t_next
    logger.warning("eigentrust did not converge in %d iterations; using row-sum ranking", MAX_ITERS)
    total = row_sums.sum()
    if total <= 0:
        return np.full(n, 1.0 / n)
    return row_sums / total


def eigentrust_filter(agree: np.ndarray, tau: float = TRUST_THRESHOLD) -> set[int]:
    """Workers whose global trust is below tau * (1/n)."""
    n = agree.shape[0]
    scores = eigentrust_scores(agree)
    cutoff = tau / n
    return {int(i) for i in range(n) if scores[i] < cutoff}
