"""Swap-test classification of a query against one trained pair classifier.

The training state puts b on slot 0 and alpha_l * x_l on slot l; the query
state puts 1 on slot 0 and x on every other slot. Their overlap is the
classical margin divided by both normalisations, so the ancilla statistic
P = (1 - Re<u|x>)/2 sits below 1/2 exactly when the margin is positive.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dataset import PairSubset
from .ledger import ResourceLedger
from .lssvm import LSSVMModel
from .statevector import (H as HADAMARD, QState, apply_gate, evolve, n_qubits_for,
                          probability_of)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=float)


@dataclass(frozen=True)
class TrainingState:
    state: QState
    norm_const: float
    index_qubits: int
    data_qubits: int


@dataclass(frozen=True)
class QueryState:
    state: QState
    norm_const: float
    index_qubits: int
    data_qubits: int


@dataclass(frozen=True)
class PairProbability:
    f: int
    s: int
    p: float
    shots_used: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"probability {self.p} outside [0, 1]")


def norm_hamiltonian(norm_i: float, norm_j: float) -> np.ndarray:
    """(|x_i| |0><0| + |x_j| |1><1|) (x) sigma_x on ancilla-then-work qubit order."""
    return np.kron(np.diag([norm_i, norm_j]), SIGMA_X)


def norm_probe_probability(x_i, x_j, t: float) -> float:
    """Simulated probability of reading 1 on the work qubit after evolving
    (|0> - |1>)/sqrt(2) (x) |0> under :func:`norm_hamiltonian` for time t."""
    a, b = float(np.linalg.norm(x_i)), float(np.linalg.norm(x_j))
    start = QState(np.array([1, 0, -1, 0], dtype=complex) / np.sqrt(2))
    out = evolve(start, norm_hamiltonian(a, b), t)
    return probability_of(out, 1, 1)


def estimate_norm_sum(x_i, x_j, t: float, shots: int | None = None, seed=None,
                      ledger: ResourceLedger | None = None) -> float:
    """Small-angle estimate 2 p / t^2 of |x_i|^2 + |x_j|^2.

    ``shots=None`` uses the exact probability; otherwise p is a Bernoulli
    frequency over ``shots`` seeded draws. The bias is O(t^2).
    """
    if not t > 0:
        raise ValueError("t must be positive")
    a, b = float(np.linalg.norm(x_i)), float(np.linalg.norm(x_j))
    if max(a, b) * t > 0.2:
        warnings.warn(f"max norm * t = {max(a, b) * t:.3g} exceeds 0.2; small-angle bias grows",
                      RuntimeWarning, stacklevel=2)
    p = norm_probe_probability(x_i, x_j, t)
    if shots is not None:
        if shots <= 0:
            raise ValueError("shots must be positive in sampled mode")
        p = np.random.default_rng(seed).binomial(shots, p) / shots
        if ledger is not None:
            ledger.record(measurement_shots=shots)
    return 2.0 * p / t**2


def _layout(M: int, d: int) -> tuple[int, int]:
    return n_qubits_for(M + 1), n_qubits_for(d)


def build_training_state(model: LSSVMModel, subset: PairSubset | None = None) -> TrainingState:
    if model.kernel.kind != "linear":
        raise ValueError("kernel unsupported in quantum path: swap-test states encode raw vectors")
    X = model.X if subset is None else subset.X
    if X.shape[0] != model.M:
        raise ValueError("model and subset sizes differ")
    alpha = np.asarray(model.alpha)
    if model.b == 0 and not np.any(alpha):
        raise ValueError("degenerate model: b and alpha all zero")
    M, d = X.shape
    iq, dq = _layout(M, d)
    grid = np.zeros((2**iq, 2**dq))
    grid[0, 0] = model.b
    grid[1 : M + 1, :d] = alpha[:, None] * X
    norm_const = model.b**2 + float(np.sum(alpha**2 * np.sum(X**2, axis=1)))
    return TrainingState(QState(grid.ravel() / math.sqrt(norm_const)), norm_const, iq, dq)


def build_query_state(x, subset) -> QueryState:
    """``subset`` supplies the slot count M and dimension d (a PairSubset or an LSSVMModel)."""
    x = np.asarray(x, dtype=float)
    M, d = subset.X.shape
    if x.shape != (d,):
        raise ValueError(f"query must have dimension {d}")
    if not np.any(x):
        raise ValueError("zero query vector")
    iq, dq = _layout(M, d)
    grid = np.zeros((2**iq, 2**dq))
    grid[0, 0] = 1.0
    grid[1 : M + 1, :d] = x
    norm_const = M * float(x @ x) + 1.0
    return QueryState(QState(grid.ravel() / math.sqrt(norm_const)), norm_const, iq, dq)


def swap_state(u: QState, x: QState) -> QState:
    """(|0>|u> + |1>|x>)/sqrt(2), ancilla as qubit 0."""
    if u.dim != x.dim:
        raise ValueError("register layouts differ")
    return QState(np.concatenate([u.amplitudes, x.amplitudes]) / math.sqrt(2))


def overlap_probability(u: QState, x: QState) -> float:
    """Probability of ancilla 1 after a Hadamard on the swap state: (1 - Re<u|x>)/2."""
    psi = apply_gate(swap_state(u, x), HADAMARD, [0])
    return min(max(probability_of(psi, 0, 1), 0.0), 1.0)


def pair_probability(u: TrainingState, x: QueryState, pair: tuple[int, int] = (1, 2),
                     mode: str = "exact", shots: int | None = None, seed=None,
                     ledger: ResourceLedger | None = None) -> PairProbability:
    if (u.index_qubits, u.data_qubits) != (x.index_qubits, x.data_qubits):
        raise ValueError("training and query register layouts differ")
    p = overlap_probability(u.state, x.state)
    f, s = pair
    if mode == "exact":
        return PairProbability(f, s, p, 0)
    if mode != "sampled":
        raise ValueError(f"unknown probability mode {mode!r}")
    if shots is None or shots <= 0:
        raise ValueError("sampled mode needs a positive shot count")
    p_hat = np.random.default_rng(seed).binomial(shots, p) / shots
    if ledger is not None:
        ledger.record(measurement_shots=shots)
    return PairProbability(f, s, float(p_hat), int(shots))


def classify_pair(p: PairProbability) -> int:
    """f when P < 1/2 (classified +1), otherwise s."""
    return p.f if p.p < 0.5 else p.s


def shots_for_accuracy(p_hint: float, eps: float) -> int:
    if not eps > 0:
        raise ValueError("eps must be positive")
    return max(16, math.ceil(p_hint * (1 - p_hint) / eps**2 - 1e-9))
