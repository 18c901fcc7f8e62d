"""Grover-based selection over classifier outputs.

``durr_hoyer_max`` finds the highest per-class score (one-against-all).
``quantum_mode`` finds the most frequent class in the all-pair vote list,
using amplitude estimation for the frequency counts. Classical oracles for
both live alongside.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .dataset import canonical_pairs
from .ledger import ResourceLedger
from .qclassify import PairProbability, classify_pair
from .statevector import (QState, grover_iterate, grover_operator, n_qubits_for, phase_estimate,
                          sample_basis)

# growth factor of the exponential iteration-count schedule
SCHEDULE_GROWTH = 6 / 5
MAX_MODE_CLASSES = 16

__all__ = [
    "ResourceLedger", "ScoreList", "VoteList", "GroverMaxFinder", "dh_budget", "durr_hoyer_max",
    "classical_argmax", "store_votes", "vote_superposition", "count_distribution",
    "quantum_count", "quantum_mode", "classical_mode", "mode_rounds",
]


@dataclass(frozen=True)
class ScoreList:
    scores: tuple[float, ...]

    def __post_init__(self):
        scores = tuple(float(s) for s in self.scores)
        if not scores:
            raise ValueError("need at least one score")
        if not all(math.isfinite(s) for s in scores):
            raise ValueError("scores must be finite")
        object.__setattr__(self, "scores", scores)

    def __len__(self):
        return len(self.scores)


@dataclass(frozen=True)
class VoteList:
    votes: tuple[int, ...]
    k: int

    def __post_init__(self):
        votes = tuple(int(v) for v in self.votes)
        if self.k < 2:
            raise ValueError("vote lists need k >= 2")
        if len(votes) != self.k * (self.k - 1) // 2:
            raise ValueError(f"expected {self.k * (self.k - 1) // 2} votes for k={self.k}, "
                             f"got {len(votes)}")
        if any(not 1 <= v <= self.k for v in votes):
            raise ValueError(f"votes must lie in 1..{self.k}")
        object.__setattr__(self, "votes", votes)

    def __len__(self):
        return len(self.votes)

    def frequencies(self) -> dict[int, float]:
        c = Counter(self.votes)
        return {cls: c[cls] / len(self.votes) for cls in range(1, self.k + 1)}


def _scores(scores) -> tuple[float, ...]:
    return scores.scores if isinstance(scores, ScoreList) else ScoreList(tuple(scores)).scores


def _votes(v) -> VoteList:
    if isinstance(v, VoteList):
        return v
    v = tuple(v)
    if not v:
        raise ValueError("empty vote list")
    # infer k from the length L = k(k-1)/2
    k = int(round((1 + math.sqrt(1 + 8 * len(v))) / 2))
    return VoteList(v, k)


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def classical_argmax(scores) -> int:
    """Smallest index attaining the maximum."""
    s = _scores(scores)
    return int(np.argmax(s))


def dh_budget(k: int) -> float:
    """Grover-iteration allowance 22.5 sqrt(k) + 1.4 log2(k)^2."""
    return 22.5 * math.sqrt(k) + 1.4 * math.log2(k) ** 2


def uniform_state(size: int) -> QState:
    """Equal superposition over the first ``size`` basis states of the smallest fitting register."""
    n = n_qubits_for(size)
    a = np.zeros(2**n)
    a[:size] = 1 / math.sqrt(size)
    return QState(a)


class GroverMaxFinder:
    """Threshold-raising maximum search over a fixed score list.

    Measurement distributions after j Grover iterations above a given
    threshold are memoised, so one finder can serve many seeded runs.
    """

    def __init__(self, scores):
        self.scores = np.array(_scores(scores))
        self.k = len(self.scores)
        self.start = uniform_state(self.k)
        self._padded = np.full(self.start.dim, -np.inf)
        self._padded[: self.k] = self.scores
        self._cdf: dict[tuple[int, int], np.ndarray] = {}

    def marked(self, threshold_index: int) -> np.ndarray:
        return self._padded > self.scores[threshold_index]

    def _cdf_for(self, threshold_index: int, j: int) -> np.ndarray:
        key = (threshold_index, j)
        cdf = self._cdf.get(key)
        if cdf is None:
            state = grover_iterate(self.start, self.marked(threshold_index), j)
            cdf = np.cumsum(state.probabilities())
            self._cdf[key] = cdf
        return cdf

    def measure_after(self, threshold_index: int, j: int, rng: np.random.Generator) -> int:
        cdf = self._cdf_for(threshold_index, j)
        return int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), len(cdf) - 1))

    def run(self, seed=None, budget_multiplier: float = 1.0, ledger: ResourceLedger | None = None,
            until: Callable[[int], bool] | None = None,
            on_adopt: Callable[[int, int], None] | None = None) -> int:
        """One search. ``on_adopt(index, iterations_so_far)`` sees every threshold, the random
        initial one included; ``until(index)`` may end the run early (instrumentation only)."""
        rng = _rng(seed)
        k = self.k
        index = int(rng.integers(k))
        if on_adopt is not None:
            on_adopt(index, 0)
        if k == 1:
            return 0
        budget = budget_multiplier * dh_budget(k)
        cap = math.sqrt(k)
        used = 0
        m = 1.0
        while until is None or not until(index):
            j = int(rng.integers(math.ceil(m)))
            if used + j > budget:
                break
            r = self.measure_after(index, j, rng)
            used += j
            if ledger is not None:
                ledger.record(grover_iterations=j, oracle_queries=j, measurement_shots=1)
            if r < k and self.scores[r] > self.scores[index]:
                index = r
                m = 1.0
                if on_adopt is not None:
                    on_adopt(index, used)
            else:
                m = min(SCHEDULE_GROWTH * m, cap)
        return index


def durr_hoyer_max(scores, seed=None, budget_multiplier: float = 1.0,
                   ledger: ResourceLedger | None = None) -> tuple[int, ResourceLedger]:
    ledger = ResourceLedger() if ledger is None else ledger
    return GroverMaxFinder(scores).run(seed, budget_multiplier, ledger), ledger


def store_votes(pair_results) -> VoteList:
    """Vote list from ``(f, s, PairProbability)`` triples in canonical pair order."""
    pair_results = list(pair_results)
    pairs = [(int(f), int(s)) for f, s, _ in pair_results]
    if not pairs:
        raise ValueError("no pair results")
    if len(set(pairs)) != len(pairs):
        raise ValueError("duplicate pair in results")
    k = max(s for _, s in pairs)
    expected = canonical_pairs(k)
    if pairs != expected:
        missing = sorted(set(expected) - set(pairs))
        raise ValueError(f"pair results must cover {expected} in order; missing {missing}")
    votes = []
    for f, s, p in pair_results:
        if not isinstance(p, PairProbability):
            p = PairProbability(f, s, float(p))
        votes.append(classify_pair(p))
    return VoteList(tuple(votes), k)


def vote_superposition(v) -> QState:
    return uniform_state(len(_votes(v)))


@lru_cache(maxsize=4096)
def _count_distribution(votes: tuple[int, ...], class_id: int, precision_qubits: int) -> np.ndarray:
    start = uniform_state(len(votes))
    mask = np.zeros(start.dim, dtype=bool)
    mask[: len(votes)] = np.array(votes) == class_id
    dist = phase_estimate(grover_operator(start, mask), start, precision_qubits)
    dist = np.clip(dist, 0, None)
    dist.setflags(write=False)
    return dist


def count_distribution(v, class_id: int, precision_qubits: int = 8) -> np.ndarray:
    """Exact distribution of clock readings for amplitude estimation of one class's vote share."""
    v = _votes(v)
    if not 1 <= class_id <= v.k:
        raise ValueError(f"class_id must lie in 1..{v.k}")
    return _count_distribution(v.votes, int(class_id), int(precision_qubits))


def reading_to_fraction(reading: int, precision_qubits: int) -> float:
    return float(np.sin(np.pi * reading / 2**precision_qubits) ** 2)


def quantum_count(v, class_id: int, precision_qubits: int = 8, seed=None,
                  ledger: ResourceLedger | None = None) -> float:
    """Amplitude-estimation estimate sin^2(pi m / 2^t) of the fraction of votes for ``class_id``."""
    dist = count_distribution(v, class_id, precision_qubits)
    cdf = np.cumsum(dist)
    rng = _rng(seed)
    m = int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), len(cdf) - 1))
    if ledger is not None:
        ledger.record(oracle_queries=2**precision_qubits - 1, measurement_shots=1,
                      qpe_qubits_used=precision_qubits)
    return reading_to_fraction(m, precision_qubits)


def classical_mode(v) -> int:
    """Smallest class id with the highest vote count; accepts any nonempty sequence."""
    votes = v.votes if isinstance(v, VoteList) else tuple(int(x) for x in v)
    if not votes:
        raise ValueError("empty vote list")
    c = Counter(votes)
    top = max(c.values())
    return min(cls for cls, n in c.items() if n == top)


def mode_rounds(k: int, factor: float = 3.0) -> int:
    return max(1, math.ceil(factor * math.log2(k)))


def _search_marked(start: QState, mask: np.ndarray, rng: np.random.Generator,
                   ledger: ResourceLedger | None, cache: dict) -> int | None:
    """Exponential-schedule Grover search; None once the allowance (twice the 4.5 sqrt(N)
    expected bound) is spent without a hit. Each attempt costs its iterations plus one
    preparation, so a one-slot register cannot loop forever."""
    n_slots = int(np.count_nonzero(start.amplitudes))
    allowance = 9.0 * math.sqrt(n_slots)
    key_mask = mask.tobytes()
    m, used = 1.0, 0
    while True:
        j = int(rng.integers(math.ceil(m)))
        if used + j + 1 > allowance:
            return None
        key = (key_mask, j)
        state = cache.get(key)
        if state is None:
            state = cache[key] = grover_iterate(start, mask, j)
        slot = sample_basis(state, rng)
        used += j + 1
        if ledger is not None:
            ledger.record(grover_iterations=j, oracle_queries=j, measurement_shots=1)
        if mask[slot]:
            return slot
        m = min(SCHEDULE_GROWTH * m, math.sqrt(n_slots))


def quantum_mode(v, eps: float = 0.1, delta: float = 0.1, seed=None, precision_qubits: int = 8,
                 round_factor: float = 3.0, ledger: ResourceLedger | None = None) -> tuple[int, ResourceLedger]:
    """Approximate mode of the vote list.

    Per-class vote shares come from :func:`quantum_count`, snapped to the
    nearest multiple of 1/L (L = number of votes) and taken as the median of
    2*ceil(ln(1/delta)) + 1 independent estimates. A candidate is replaced
    only when the new class's share beats it by more than eps / (k(k-1)).
    """
    v = _votes(v)
    if not (0 < eps < 1 and 0 < delta < 1):
        raise ValueError("eps and delta must lie in (0, 1)")
    if v.k > MAX_MODE_CLASSES:
        raise ValueError(f"mode finding is capped at k = {MAX_MODE_CLASSES}")
    ledger = ResourceLedger() if ledger is None else ledger
    rng = _rng(seed)
    L, k = len(v), v.k
    repeats = 2 * math.ceil(math.log(1 / delta)) + 1

    def share(cls: int) -> float:
        ests = [quantum_count(v, cls, precision_qubits, rng, ledger) for _ in range(repeats)]
        return round(float(np.median(ests)) * L) / L

    start = vote_superposition(v)
    cache: dict = {}
    candidate = v.votes[int(rng.integers(L))]
    best = share(candidate)
    margin = eps / (k * (k - 1))
    for _ in range(mode_rounds(k, round_factor)):
        estimates = {cls: share(cls) for cls in sorted(set(v.votes))}
        mask = np.zeros(start.dim, dtype=bool)
        mask[:L] = [estimates[c] > best + margin for c in v.votes]
        slot = _search_marked(start, mask, rng, ledger, cache)
        if slot is None:
            continue
        new = v.votes[slot]
        new_share = share(new)
        if new_share > best + margin:
            candidate, best = new, new_share
    return candidate, ledger
