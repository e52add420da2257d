import numpy as np
import pytest

from serene import rng
from serene.cvt import REPLACEMENT_NEEDED, CvtTable


def test_admit_sets_majority_and_size():
    table = CvtTable(5, 20)
    assert table.admit(7, 1234)
    assert table.size == 1
    entry = table.entry(0)
    assert entry.task == 7 and entry.majority == 1234


def test_duplicate_admit_rejected():
    table = CvtTable(5, 20)
    assert table.admit(7, 1234)
    assert not table.admit(7, 999)
    assert table.size == 1


def test_replacement_evicts_exhausted_entry():
    table = CvtTable(2, 20)
    table.admit(1, 10)
    table.admit(2, 20)
    assert table.admit(3, 30, replace_row=0)
    assert table.size == 2
    assert table.row_of(1) < 0
    assert table.entry(0).task == 3


def test_original_votes_shrink_the_probe_pool():
    table = CvtTable(5, 20)
    table.admit(7, 1234, votes=[(0, 1234), (1, 1234), (2, 55)])
    state = rng.new_state(1)
    task, pool = table.select_probe(state, 3)
    assert task == 7
    assert set(pool).isdisjoint({0, 1, 2})


def test_fresh_entry_has_everyone_unprobed():
    table = CvtTable(5, 20)
    table.admit(7, 1234)  # admitted without recorded votes
    state = rng.new_state(2)
    pools = set()
    for _ in range(50):
        task, pool = table.select_probe(state, 3)
        pools.update(pool)
    assert pools <= set(range(20))
    assert len(pools) > 10  # pools draw from the full roster


def test_probe_needs_more_than_k_unprobed():
    table = CvtTable(5, 20)
    votes = [(j, 1234) for j in range(18)]  # 18 of 20 recorded
    table.admit(7, 1234, votes=votes)
    state = rng.new_state(3)
    assert table.select_probe(state, 3) == (REPLACEMENT_NEEDED, 7)

    table2 = CvtTable(5, 20)
    table2.admit(8, 1234, votes=[(j, 1234) for j in range(16)])  # k+1 free
    result = table2.select_probe(state, 3)
    assert result[0] == 8 and len(result[1]) == 3


def test_empty_table_probe_is_noop():
    table = CvtTable(5, 20)
    state = rng.new_state(4)
    assert table.select_probe(state, 3) is None


def test_detect_agreement_with_majority_is_clean():
    table = CvtTable(5, 20)
    table.admit(7, 1234)
    assert table.detect(7, 3, 1234) == -1
    assert table.entry(0).recorded[3] == 1234


def test_detect_second_worker_on_non_majority_value_triggers():
    # one worker already returned 99; another agreeing on 99 while the
    # majority is 1234 means two servers coordinate
    table = CvtTable(5, 20)
    table.admit(7, 1234, votes=[(0, 1234), (1, 99)])
    assert table.detect(7, 5, 99) == 1
    # the triggering vote is not recorded; the caller wipes the table
    assert 5 not in table.entry(0).recorded


def test_detect_null_majority_adopts_first_result():
    table = CvtTable(5, 20)
    table.admit(7, None)
    assert table.detect(7, 2, 777) == -1
    entry = table.entry(0)
    assert entry.majority == 777
    assert entry.recorded[2] == 777


def test_detect_vote_for_evicted_entry_ignored():
    table = CvtTable(1, 20)
    table.admit(7, 1234)
    table.admit(8, 555, replace_row=0)
    assert table.detect(7, 2, 99) == -1
    assert table.entry(0).task == 8


def test_detect_single_wrong_value_is_recorded_not_flagged():
    table = CvtTable(5, 20)
    table.admit(7, 1234, votes=[(0, 1234), (1, 1234)])
    assert table.detect(7, 5, 99) == -1
    assert table.entry(0).recorded[5] == 99


def test_wipe_clears_everything():
    table = CvtTable(5, 20)
    table.admit(7, 1234)
    table.wipe()
    assert table.size == 0
    state = rng.new_state(5)
    assert table.select_probe(state, 3) is None


class _CountingValue(int):
    """Int whose equality comparisons are tallied."""

    eq_calls = 0

    def __eq__(self, other):
        _CountingValue.eq_calls += 1
        return int(self) == int(other)

    def __ne__(self, other):
        return not self.__eq__(other)

    __hash__ = int.__hash__


def test_detect_comparison_count_constant_in_roster_size():
    # the detect step does a bounded number of comparisons plus one hash
    # lookup no matter how many workers exist
    costs = {}
    for n in (10, 100, 1000):
        table = CvtTable(4, n)
        table.admit(7, _CountingValue(1234), votes=[(j, _CountingValue(1234)) for j in range(3)])
        table.detect(7, 4, _CountingValue(99))  # records a stray value
        _CountingValue.eq_calls = 0
        assert table.detect(7, 5, _CountingValue(99)) == 1
        costs[n] = _CountingValue.eq_calls
    assert costs[10] == costs[100] == costs[1000]
    assert costs[10] <= 4
