"""The SnE baseline: windowed observation gathering plus one-shot clustering.

SnE schedules the same greedy pair-coverage pools over the genuine stream,
keeps the last ``e`` agreement bits per worker pair, and re-clusters after
every completed observation round. The clusterer sees workers as linked
unless a pair disagreed more than once inside its window (a single slip is
tolerated as honest noise); MCL runs on that adjacency. The first
clustering that yields two or more clusters is both SnE's detection and its
mitigation: the largest cluster is presumed honest, the union of the rest
colluding, with size ties broken by the higher mean internal agreement
ratio. With a colluding majority the presumption inverts the naming, which
is the documented failure mode this baseline is compared against.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .clustering import mcl_clusters
from .engine import DetectionEvent, MitigationReport, World

__all__ = ["run_sne", "name_clusters"]


def name_clusters(clusters: list[list[int]], weights: np.ndarray):
    """(honest, colluding) by the larger-cluster presumption.

    Equal-size ties break toward the cluster whose internal edges weigh
    more; singleton clusters rank lowest.
    """

    def intra_mean(cluster: list[int]) -> float:
        if len(cluster) < 2:
            return -1.0
        acc = 0.0
        cnt = 0
        for ai in range(len(cluster) - 1):
            for bi in range(ai + 1, len(cluster)):
                acc += weights[cluster[ai], cluster[bi]]
                cnt += 1
        return acc / cnt

    ranked = sorted(
        clusters,
        key=lambda c: (len(c), intra_mean(c), -min(c)),
        reverse=True,
    )
    honest = sorted(ranked[0])
    colluding = sorted(w for c in ranked[1:] for w in c)
    return honest, colluding


DISAGREEMENT_TOLERANCE = 1  # window slips allowed before an edge is severed


def _window_weights(world: World, win_sum, win_len, window: int) -> np.ndarray:
    n = world.n
    w = np.zeros((n, n), dtype=np.float64)
    for i in range(n - 1):
        for j in range(i + 1, n):
            length = min(int(win_len[i, j]), window)
            if length > 0:
                w[i, j] = w[j, i] = win_sum[i, j] / length
    return w


def _window_adjacency(world: World, win_sum, win_len, window: int) -> np.ndarray:
    """Binary linkage: severed once a pair disagrees more than the tolerance."""
    n = world.n
    adj = np.zeros((n, n), dtype=np.float64)
    for i in range(n - 1):
        for j in range(i + 1, n):
            length = min(int(win_len[i, j]), window)
            if length > 0:
                disagreements = length - int(win_sum[i, j])
                if disagreements <= DISAGREEMENT_TOLERANCE:
                    adj[i, j] = adj[j, i] = 1.0
    return adj


def run_sne(world: World, window: int):
    """Drive one SnE run; returns (detection, report, generated, recluster_times)."""
    n, k = world.n, world.k
    total_counts = np.zeros((n, n), dtype=np.int64)
    win_bits = np.zeros((n, n, window), dtype=np.uint8)
    win_len = np.zeros((n, n), dtype=np.int64)
    win_pos = np.zeros((n, n), dtype=np.int64)
    win_sum = np.zeros((n, n), dtype=np.int64)

    slot = 0
    last_min = 0
    t_ready = 0.0
    recluster_times: list[float] = []
    detection = None
    report = None

    while slot < world.total_slots:
        status, slot, t_ready, last_min = kernels.run_sne_phase(
            world.rs, slot, world.total_slots, world.slot_dt, n, k,
            *world.behavior_args(),
            world.rtt_lo, world.rtt_hi,
            world.g_pool, world.g_votes, world.g_arr, world.g_dispatch,
            world.g_done, world.g_maj, world.g_maj_has, world.g_colluded,
            total_counts, win_bits, win_len, win_pos, win_sum, window,
            last_min, t_ready,
            world.pool_buf, world.vote_buf, world.arr_buf,
        )
        if status == 0:
            break
        recluster_times.append(float(t_ready))
        adjacency = _window_adjacency(world, win_sum, win_len, window)
        clusters = mcl_clusters(adjacency)
        if len(clusters) < 2:
            continue

        weights = _window_weights(world, win_sum, win_len, window)
        honest, colluding = name_clusters(clusters, weights)
        t_detect = float(t_ready)
        epochs = sum(
            1 for rt in recluster_times
            if world.t_act < rt <= t_detect or np.isinf(world.t_act)
        )
        detection = DetectionEvent(
            sim_time=t_detect,
            task=-1,
            triggering_workers=frozenset(colluding),
            epoch_count=epochs,
        )
        report = MitigationReport(
            variant=f"sne{window}",
            trigger_time=t_detect,
            complete=True,
            partition_method="sne-mcl",
            honest=frozenset(honest),
            colluding=frozenset(colluding),
            final_time=t_detect,
            g1_initial=frozenset(honest),
            g2_initial=frozenset(colluding),
        )
        break

    return detection, report, slot, recluster_times
