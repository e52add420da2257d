import numpy as np

from serene.repository import (
    SimilarityGraph,
    TaskRepository,
    add_pool_pairs,
    build_similarity_graph,
    greedy_pool,
    min_pair_count,
)


def _repo_from_pools(pools, votes, n=20, k=3):
    return TaskRepository(
        n_workers=n,
        pool_size=k,
        tasks=np.arange(len(pools), dtype=np.int64),
        pools=np.array(pools, dtype=np.int64),
        votes=np.array(votes, dtype=np.uint64),
    )


def test_full_agreement_weight_is_one():
    pools = [[0, 1, 2]] * 8
    votes = [[5, 5, 5]] * 8
    graph = build_similarity_graph(_repo_from_pools(pools, votes, n=3))
    assert graph.weight(0, 1) == 1.0
    assert graph.co_occur[0, 1] == 8


def test_six_of_eight_agreements():
    pools = [[0, 1, 2]] * 8
    votes = [[5, 5, 5]] * 6 + [[5, 9, 5]] * 2
    graph = build_similarity_graph(_repo_from_pools(pools, votes, n=3))
    assert graph.weight(0, 1) == 0.75
    assert graph.weight(0, 2) == 1.0


def test_never_copooled_pair_has_no_edge():
    pools = [[0, 1, 2], [3, 4, 5]]
    votes = [[5, 5, 5], [7, 7, 7]]
    graph = build_similarity_graph(_repo_from_pools(pools, votes, n=6))
    assert not graph.has_edge(0, 3)
    assert graph.weight(0, 3) is None
    assert graph.weight_matrix()[0, 3] == 0.0


def test_edge_weights_match_brute_force_recount():
    # independent oracle: recount agreements straight from the vote log
    rng = np.random.default_rng(7)
    for _ in range(200):
        n = int(rng.integers(4, 12))
        count = int(rng.integers(1, 60))
        pools = np.zeros((count, 3), dtype=np.int64)
        votes = np.zeros((count, 3), dtype=np.uint64)
        for t in range(count):
            pools[t] = rng.choice(n, size=3, replace=False)
            votes[t] = rng.integers(0, 4, size=3)  # tiny alphabet forces agreements
        repo = TaskRepository(n_workers=n, pool_size=3, tasks=np.arange(count, dtype=np.int64),
                              pools=pools, votes=votes)
        graph = build_similarity_graph(repo)

        agree = np.zeros((n, n))
        co = np.zeros((n, n))
        for t in range(count):
            members = list(pools[t])
            for a in range(3):
                for b in range(3):
                    if a == b:
                        continue
                    i, j = members[a], members[b]
                    co[i, j] += 0.5
                    if votes[t, a] == votes[t, b]:
                        agree[i, j] += 0.5
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                if co[i, j] == 0:
                    assert not graph.has_edge(i, j)
                else:
                    assert graph.weight(i, j) == agree[i, j] / co[i, j]


def test_greedy_pool_single_choice_repeats():
    counts = np.zeros((3, 3), dtype=np.int64)
    out = np.zeros(3, dtype=np.int64)
    for _ in range(8):
        greedy_pool(counts, 3, 3, out)
        assert sorted(int(w) for w in out) == [0, 1, 2]
        add_pool_pairs(counts, out, 3)
    assert int(min_pair_count(counts, 3)) == 8


def test_greedy_pool_raises_the_minimum_everywhere():
    n, k, target = 20, 3, 8
    counts = np.zeros((n, n), dtype=np.int64)
    out = np.zeros(k, dtype=np.int64)
    pools = 0
    while int(min_pair_count(counts, n)) < target:
        greedy_pool(counts, n, k, out)
        assert len({int(w) for w in out}) == k
        add_pool_pairs(counts, out, k)
        pools += 1
    # counting bound: each pool covers C(k,2)=3 of the 190 pairs
    assert pools >= int(np.ceil(target * (n * (n - 1) / 2) / 3))
    assert pools < 2 * target * (n * (n - 1) / 2) // 3  # greedy stays near the bound


def test_pair_counts_accumulate_symmetrically():
    counts = np.zeros((5, 5), dtype=np.int64)
    pool = np.array([0, 2, 4], dtype=np.int64)
    add_pool_pairs(counts, pool, 3)
    assert counts[0, 2] == counts[2, 0] == 1
    assert counts[0, 4] == counts[2, 4] == 1
    assert counts[0, 1] == 0
