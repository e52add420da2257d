import numpy as np
import pytest

from serene.engine import DetectionEvidence
from serene.mitigation import (
    PartitionState,
    ReputationScore,
    TrustedTask,
    build_trusted_tasks,
    finalize,
    greedy_fallback,
    split_by_score,
)
from serene.repository import TaskRepository


def _repo(pools, votes, n=20):
    return TaskRepository(
        n_workers=n,
        pool_size=3,
        tasks=np.arange(len(pools), dtype=np.int64),
        pools=np.array(pools, dtype=np.int64),
        votes=np.array(votes, dtype=np.uint64),
    )


def _scores(mapping):
    out = {}
    for worker, marks in mapping.items():
        r = ReputationScore()
        r.scores = list(marks)
        out[worker] = r
    return out


# --- trusted tasks -----------------------------------------------------------


def test_cross_group_unanimous_task_is_trusted():
    repo = _repo([[0, 10, 11]], [[7, 7, 7]])
    tt = build_trusted_tasks(repo, [0, 1], [10, 11])
    assert len(tt) == 1
    assert tt.tasks[0].value == 7


def test_colluded_cross_value_not_trusted():
    # g1 voters agreed with each other but not with any g2 vote
    repo = _repo([[0, 1, 10]], [[9, 9, 7]])
    tt = build_trusted_tasks(repo, [0, 1], [10, 11])
    assert len(tt) == 0


def test_partially_captured_pool_rejected():
    # a cross-group pair agrees, but a dissenting vote exposes the pool
    repo = _repo([[0, 10, 11]], [[9, 9, 7]])
    tt = build_trusted_tasks(repo, [0, 1], [10, 11])
    assert len(tt) == 0


def test_single_group_pool_not_trusted():
    repo = _repo([[0, 1, 2]], [[7, 7, 7]])
    tt = build_trusted_tasks(repo, [0, 1, 2], [10, 11])
    assert len(tt) == 0


def test_malicious_votes_ignored_for_unanimity():
    repo = _repo([[0, 10, 5]], [[7, 7, 123]])
    tt = build_trusted_tasks(repo, [0], [10], malicious={5})
    assert len(tt) == 1 and tt.tasks[0].value == 7


def test_adversarial_always_winning_ring_leaves_no_trusted_tasks():
    # every pool colluder-majority and colluding: no cross-group agreement
    pools = [[0, 1, 10], [2, 3, 11], [0, 2, 12]]
    votes = [[9, 9, 5], [8, 8, 6], [4, 4, 3]]
    repo = _repo(pools, votes)
    tt = build_trusted_tasks(repo, [0, 1, 2, 3], [10, 11, 12])
    assert len(tt) == 0


# --- reputation scores -------------------------------------------------------


def test_rs_mean_of_marks():
    r = ReputationScore()
    r.scores = [1, -1, -1]
    assert r.rs == pytest.approx(-1 / 3)


def test_rs_half_colluded_is_zero():
    r = ReputationScore()
    r.scores = [1] * 6 + [-1] * 6
    assert r.rs == 0.0


def test_rs_honest_clean_run_is_one():
    r = ReputationScore()
    r.scores = [1] * 12
    assert r.rs == 1.0


# --- split and case selection ------------------------------------------------


def test_all_ones_names_group_honest_case1():
    scores = _scores({w: [1] * 12 for w in range(5)})
    case, g1, g2, name, moves = split_by_score(list(range(5)), [10, 11], scores)
    assert case == 1 and name == "honest" and not moves
    assert g1 == list(range(5))


def test_three_high_two_low_goes_case1():
    scores = _scores({0: [1] * 12, 1: [1] * 12, 2: [1] * 12,
                      3: [1, -1, -1, -1, -1], 4: [-1, -1, -1, -1, -1]})
    case, g1, g2, name, moves = split_by_score([0, 1, 2, 3, 4], [10], scores)
    assert case == 1 and name == "honest"
    assert g1 == [0, 1, 2]
    assert set(g2) == {10, 3, 4}


def test_single_high_scorer_goes_case2():
    scores = _scores({0: [1] * 9 + [-1], 1: [-1] * 10, 2: [-1] * 10, 3: [-1] * 12})
    case, g1, g2, name, moves = split_by_score([0, 1, 2, 3], [10], scores)
    assert case == 2 and name == "colluding"
    assert g1 == [1, 2, 3]
    assert set(g2) == {10, 0}


def test_uniform_low_scores_collapse_to_case2():
    scores = _scores({w: [-1] * 12 for w in range(4)})
    case, g1, g2, name, _ = split_by_score([0, 1, 2, 3], [10], scores)
    assert case == 2 and name == "colluding"
    assert g1 == [0, 1, 2, 3]


def test_no_honest_looking_cluster_collapses_to_case2():
    # even the higher cluster is far from 1: nobody behaved honestly
    scores = _scores({0: [1, 1, -1, -1], 1: [1, -1, -1, -1],
                      2: [-1] * 4, 3: [-1] * 4})
    case, g1, g2, name, _ = split_by_score([0, 1, 2, 3], [10], scores)
    assert case == 2
    assert g1 == [0, 1, 2, 3]


def test_honest_compatible_low_cluster_is_not_exiled():
    # a lone error slip (11/12 agreement) does not indict anyone
    scores = _scores({0: [1] * 12, 1: [1] * 12, 2: [1] * 11 + [-1]})
    case, g1, g2, name, moves = split_by_score([0, 1, 2], [10], scores)
    assert case == 1 and not moves
    assert g1 == [0, 1, 2]


def test_flagged_workers_are_exiled_before_clustering():
    scores = _scores({w: [1] * 12 for w in range(4)})
    case, g1, g2, name, moves = split_by_score([0, 1, 2, 3], [10], scores, flagged={2})
    assert case == 1
    assert g1 == [0, 1, 3]
    assert 2 in g2
    assert (2, "g1", "g2") in moves


def test_fully_flagged_group_named_colluding():
    scores = _scores({0: [1], 1: [1]})
    case, g1, g2, name, _ = split_by_score([0, 1], [10], scores, flagged={0, 1})
    assert case == 2 and name == "colluding"
    assert g1 == [0, 1]


# --- greedy fallback ---------------------------------------------------------


def _evidence(minority, majority_workers, task=5, majority=111):
    return DetectionEvidence(
        task=task,
        majority=majority,
        minority_workers=frozenset(minority),
        majority_workers=frozenset(majority_workers),
        recorded={},
    )


def test_fallback_groups_minority_against_rest():
    ev = _evidence({13, 14}, set(range(4)))
    g1, g2 = greedy_fallback(ev, 20, set())
    assert g1 == [13, 14]
    assert set(g2) == set(range(20)) - {13, 14}


def test_fallback_removes_malicious_from_both_groups():
    ev = _evidence({13, 14}, set(range(4)))
    g1, g2 = greedy_fallback(ev, 20, {14, 3})
    assert g1 == [13]
    assert 14 not in g2 and 3 not in g2


def test_fallback_suspects_pool_sized_majority_side():
    # fewer than k workers ever returned the majority value: the entry's
    # majority may itself be the ring's agreed wrong value
    ev = _evidence({5, 6}, {7, 8})
    g1, g2 = greedy_fallback(ev, 20, set(), pool_size=3)
    assert set(g1) == {5, 6, 7, 8}
    assert set(g2) == set(range(20)) - {5, 6, 7, 8}


def test_fallback_keeps_large_majority_side_unsuspected():
    ev = _evidence({5, 6}, {0, 1, 2})
    g1, g2 = greedy_fallback(ev, 20, set(), pool_size=3)
    assert set(g1) == {5, 6}


# --- finalize ----------------------------------------------------------------


def _state(g1, g2, name, malicious=(), n=20):
    return PartitionState(
        roster=tuple(range(n)),
        malicious=set(malicious),
        g1=list(g1),
        g2=list(g2),
        g1_name=name,
    )


def test_finalize_honest_naming():
    state = _state(range(10), range(10, 20), "honest")
    honest, colluding, malicious = finalize(state)
    assert honest == frozenset(range(10))
    assert colluding == frozenset(range(10, 20))
    assert malicious == frozenset()


def test_finalize_is_idempotent():
    state = _state(range(10), range(10, 18), "colluding", malicious=(18, 19))
    assert finalize(state) == finalize(state)


def test_finalize_checks_conservation():
    state = _state(range(10), range(10, 19), "honest")  # worker 19 lost
    with pytest.raises(ValueError):
        finalize(state)


def test_finalize_requires_naming():
    state = _state(range(10), range(10, 20), None)
    with pytest.raises(ValueError):
        finalize(state)
