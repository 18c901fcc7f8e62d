import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qallpair.ledger import ResourceLedger
from qallpair.qclassify import PairProbability
from qallpair.selection import (GroverMaxFinder, ScoreList, VoteList, classical_argmax,
                                classical_mode, count_distribution, dh_budget, durr_hoyer_max,
                                mode_rounds, quantum_count, quantum_mode, store_votes,
                                vote_superposition)

from conftest import binomial_se


def dirichlet(phi, T):
    delta = phi - np.arange(T) / T
    s = np.sin(np.pi * delta)
    safe = np.where(np.abs(s) < 1e-15, 1.0, s)
    return np.where(np.abs(s) < 1e-15, 1.0, (np.sin(np.pi * T * delta) / (T * safe)) ** 2)


def counting_oracle(fraction, t):
    """Start state splits evenly over the Grover eigenvectors with phases +-theta/pi."""
    theta = math.asin(math.sqrt(fraction))
    T = 2**t
    return 0.5 * (dirichlet(theta / math.pi, T) + dirichlet(1 - theta / math.pi, T))


# ---- value types ----

def test_scorelist_validation():
    with pytest.raises(ValueError):
        ScoreList(())
    with pytest.raises(ValueError):
        ScoreList((1.0, float("nan")))


@pytest.mark.parametrize("votes, k", [((1, 2), 2), ((1, 4, 1), 3), ((), 2)])
def test_votelist_validation(votes, k):
    with pytest.raises(ValueError):
        VoteList(votes, k)


@pytest.mark.parametrize("scores, idx", [([0.1, 0.9, 0.4], 1), ([0.5, 0.5], 0), ([3.0], 0)])
def test_classical_argmax(scores, idx):
    assert classical_argmax(scores) == idx


@pytest.mark.parametrize("votes, mode", [([1, 1, 2], 1), ([3], 3), ([1, 2, 2, 1, 3, 3], 1)])
def test_classical_mode(votes, mode):
    assert classical_mode(votes) == mode


# ---- maximum finding ----

def test_dh_three_scores_success():
    scores = [0.1, 0.9, 0.4]
    finder = GroverMaxFinder(scores)
    wins = sum(finder.run(s) == classical_argmax(scores) for s in range(500))
    assert wins / 500 >= 0.5


def test_dh_equal_scores_keep_initial_index():
    for s in range(20):
        initial = int(np.random.default_rng(s).integers(5))
        assert durr_hoyer_max([0.3] * 5, s)[0] == initial


def test_dh_single_score():
    idx, ledger = durr_hoyer_max([4.2], 0)
    assert idx == 0 and ledger.grover_iterations == 0


@pytest.mark.parametrize("k", [4, 16, 64])
@pytest.mark.parametrize("mult", [0.5, 1.0, 4.0])
def test_dh_respects_budget(k, mult):
    rng = np.random.default_rng(k)
    for s in range(30):
        _, ledger = durr_hoyer_max(rng.random(k), s, mult)
        assert ledger.grover_iterations <= mult * dh_budget(k)
        assert ledger.oracle_queries == ledger.grover_iterations


def test_dh_deterministic_under_seed():
    scores = np.random.default_rng(1).random(32)
    a = [durr_hoyer_max(scores, s)[1].as_dict() for s in range(10)]
    b = [durr_hoyer_max(scores, s)[1].as_dict() for s in range(10)]
    assert a == b


def _failure_rate(k, mult, trials=1000):
    fails = 0
    for s in range(trials):
        rng = np.random.default_rng([k, s])
        scores = rng.random(k)
        fails += GroverMaxFinder(scores).run(rng, mult) != classical_argmax(scores)
    return fails / trials


def test_failure_decays_with_budget():
    assert _failure_rate(64, 2.0) <= 0.5 * _failure_rate(64, 1.0)
    low, high = _failure_rate(64, 0.05), _failure_rate(64, 0.1)
    assert low > 0.05
    assert high <= 0.5 * low


def test_rank_adoption_small():
    k, n = 16, 20_000
    finder = GroverMaxFinder(np.arange(k) / k)
    adopted = Counter()
    for s in range(n):
        seen = set()
        finder.run(s, 1e9, until=lambda i: i == k - 1, on_adopt=lambda i, _: seen.add(k - i))
        adopted.update(seen)
    for r in range(1, 7):
        p = adopted[r] / n
        se = binomial_se(1 / r, n)
        assert abs(p - 1 / r) <= max(3 * se, 1e-12)


# ---- votes ----

def test_store_votes_example():
    results = [(1, 2, PairProbability(1, 2, 0.2)), (1, 3, PairProbability(1, 3, 0.4)),
               (2, 3, PairProbability(2, 3, 0.9))]
    assert store_votes(results).votes == (1, 1, 3)


def test_store_votes_all_below_half():
    pairs = [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]
    v = store_votes([(f, s, 0.1) for f, s in pairs])
    assert v.votes == tuple(f for f, _ in pairs)


def test_store_votes_binary():
    assert store_votes([(1, 2, 0.6)]).votes == (2,)


@pytest.mark.parametrize("results", [
    [(1, 2, 0.1), (2, 3, 0.1)],
    [(1, 2, 0.1), (1, 2, 0.1), (2, 3, 0.1)],
    [(1, 3, 0.1), (1, 2, 0.1), (2, 3, 0.1)],
    [],
])
def test_store_votes_rejects_bad_pairs(results):
    with pytest.raises(ValueError):
        store_votes(results)


def test_vote_superposition_k4():
    q = vote_superposition([1, 1, 1, 2, 2, 3])
    assert q.n_qubits == 3
    np.testing.assert_allclose(q.amplitudes, [6**-0.5] * 6 + [0, 0], atol=1e-15)


def test_vote_superposition_k2():
    q = vote_superposition([2])
    assert q.n_qubits == 1
    np.testing.assert_allclose(q.amplitudes, [1, 0])


# ---- counting ----

def test_count_absent_class_is_zero():
    for s in range(20):
        assert quantum_count([1, 1, 2], 3, 8, s) == 0.0


def test_count_all_votes_is_one():
    # three slots padded to four: the padding slot is never marked, yet the share is 1
    dist = count_distribution([2, 2, 2], 2, 8)
    assert dist[128] == pytest.approx(1.0, abs=1e-12)
    assert quantum_count([2, 2, 2], 2, 8, 0) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("votes, cls, t", [([1, 1, 2], 1, 6), ([1, 2, 2, 3, 1, 1], 3, 5),
                                           ([1, 2, 3, 3, 3, 4, 1, 2, 3, 3], 3, 7)])
def test_count_distribution_matches_closed_form(votes, cls, t):
    frac = votes.count(cls) / len(votes)
    np.testing.assert_allclose(count_distribution(votes, cls, t), counting_oracle(frac, t),
                               atol=1e-10)


def test_count_two_thirds_within_tolerance():
    dist = count_distribution([1, 1, 2], 1, 6)
    est = np.sin(np.pi * np.arange(64) / 64) ** 2
    assert dist[np.abs(est - 2 / 3) <= 0.1].sum() >= 8 / np.pi**2


def test_count_error_bound():
    t = 8
    for frac_votes in ([1, 1, 2], [1, 2, 2, 2, 3, 3], [1, 2, 3, 4, 1, 1, 2, 3, 4, 1]):
        a = frac_votes.count(1) / len(frac_votes)
        dist = count_distribution(frac_votes, 1, t)
        est = np.sin(np.pi * np.arange(2**t) / 2**t) ** 2
        bound = np.pi / 2**t + (np.pi / 2**t) ** 2
        # the textbook bound carries a sqrt(a(1-a)) factor on the first term, at most 1
        assert dist[np.abs(est - a) <= 2 * bound].sum() >= 8 / np.pi**2


@pytest.mark.parametrize("votes, cls, share", [([1, 2, 1, 3, 1, 4, 1, 2, 3, 1], 1, 0.5), ([1, 1, 1, 2, 2, 2], 1, 0.5),
                                               ([3, 3, 3], 3, 1.0), ([1, 2, 1], 3, 0.0)])
def test_count_exact_shares_are_point_masses(votes, cls, share):
    for s in range(10):
        assert quantum_count(votes, cls, 8, s) == pytest.approx(share, abs=1e-12)


def test_count_quarter_fractions_snap_exactly():
    votes = [1] * 7 + [2] * 21   # k = 8, L = 28
    L = len(votes)
    for cls, share in ((1, 0.25), (2, 0.75)):
        dist = count_distribution(votes, cls, 8)
        est = np.sin(np.pi * np.arange(256) / 256) ** 2
        snapped = np.round(est * L) / L
        assert dist[np.isclose(snapped, share)].sum() >= 8 / np.pi**2


def test_count_ledger():
    ledger = ResourceLedger()
    quantum_count([1, 1, 2], 1, 5, 0, ledger)
    assert ledger.oracle_queries == 31 and ledger.qpe_qubits_used == 5


# ---- mode finding ----

def test_mode_unanimous():
    assert quantum_mode([2, 2, 2], seed=0)[0] == 2


def test_mode_simple_majority():
    hits = sum(quantum_mode([1, 1, 2], 0.1, 0.1, s)[0] == 1 for s in range(200))
    assert hits / 200 >= 0.9


def test_mode_two_way_tie_accepts_either():
    votes = [1, 2, 1, 2, 3, 3]  # k = 4: classes 1, 2, 3 each twice
    modes = {1, 2, 3}
    assert all(quantum_mode(votes, seed=s)[0] in modes for s in range(50))


@settings(max_examples=40, deadline=None)
@given(k=st.integers(2, 6), seed=st.integers(0, 2**20))
def test_mode_returns_a_mode(k, seed):
    rng = np.random.default_rng(seed)
    v = VoteList(tuple(rng.integers(1, k + 1, k * (k - 1) // 2)), k)
    c = Counter(v.votes)
    top = max(c.values())
    wins = sum(c[quantum_mode(v, 0.1, 0.1, [seed, s])[0]] == top for s in range(5))
    assert wins >= 3


@pytest.mark.parametrize("eps, delta", [(0.0, 0.1), (0.1, 1.0), (1.5, 0.1)])
def test_mode_parameter_validation(eps, delta):
    with pytest.raises(ValueError):
        quantum_mode([1, 1, 2], eps, delta, 0)


def test_mode_class_cap():
    k = 17
    with pytest.raises(ValueError, match="capped"):
        quantum_mode([1] * (k * (k - 1) // 2), seed=0)


def test_mode_empty_votes():
    with pytest.raises(ValueError):
        quantum_mode([], seed=0)


@pytest.mark.parametrize("k, rounds", [(2, 3), (3, 5), (8, 9), (16, 12)])
def test_mode_rounds(k, rounds):
    assert mode_rounds(k) == rounds


def test_mode_deterministic_under_seed():
    v = [1, 2, 2, 3, 1, 2]
    assert [quantum_mode(v, seed=s)[1].as_dict() for s in range(5)] == \
        [quantum_mode(v, seed=s)[1].as_dict() for s in range(5)]
