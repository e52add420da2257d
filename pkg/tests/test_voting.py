import itertools
import random

import numpy as np
import pytest

from serene import rng
from serene.voting import InsufficientWorkersError, majority, select_pool

# chi-square critical value, df=19, alpha=0.001
_CHI2_CRIT_19_999 = 43.82


def test_pool_of_exact_size_is_forced():
    state = rng.new_state(1)
    assert set(select_pool(state, {4, 9, 2}, 3)) == {4, 9, 2}


def test_insufficient_candidates_raise():
    state = rng.new_state(1)
    with pytest.raises(InsufficientWorkersError):
        select_pool(state, {1, 2}, 3)


def test_pool_members_distinct_and_from_candidates():
    state = rng.new_state(2)
    candidates = set(range(20))
    for _ in range(200):
        pool = select_pool(state, candidates, 3)
        assert len(set(pool)) == 3
        assert set(pool) <= candidates


def test_selection_uniformity_chi_square():
    # each of N=20 workers should appear with frequency ~ k/N over many draws
    state = rng.new_state(3)
    n, k, draws = 20, 3, 100_000
    counts = np.zeros(n)
    for _ in range(draws):
        for w in select_pool(state, range(n), k):
            counts[w] += 1
    expected = draws * k / n
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    assert chi2 < _CHI2_CRIT_19_999
    freq = counts / draws
    assert np.allclose(freq, k / n, atol=0.01)


def test_majority_two_of_three():
    assert majority(["R", "R", "Rp"], 3) == "R"


def test_majority_unanimous():
    assert majority(["R", "R", "R"], 3) == "R"


def test_majority_three_way_split_is_none():
    assert majority(["R", "Rp", "Rpp"], 3) is None


def test_majority_requires_k_votes():
    with pytest.raises(ValueError):
        majority(["R"], 3)


def test_majority_permutation_invariant():
    rnd = random.Random(5)
    for _ in range(200):
        k = rnd.choice([3, 5, 7])
        votes = [rnd.randint(0, 3) for _ in range(k)]
        results = set()
        for perm in itertools.islice(itertools.permutations(votes), 24):
            results.add(majority(list(perm), k))
        assert len(results) == 1


def test_majority_multiplicity_exceeds_half():
    rnd = random.Random(6)
    for _ in range(500):
        k = rnd.choice([3, 5])
        votes = [rnd.randint(0, 4) for _ in range(k)]
        value = majority(votes, k)
        if value is not None:
            assert 2 * votes.count(value) > k
        else:
            assert all(2 * votes.count(v) <= k for v in votes)
