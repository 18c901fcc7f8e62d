"""Quantum training of one pair classifier by phase-estimation matrix inversion.

The trace-normalised system matrix F/trF is exponentiated, its eigenphases
are written to a clock register, an ancilla is rotated by a filtered
reciprocal of each reading, the clock is uncomputed and the ancilla
post-selected. What is left on the system register is proportional to
(b, alpha).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .ledger import ResourceLedger
from .lssvm import system_matrix
from .statevector import (HermitianOp, QState, amplitude_encode, expm_hermitian, n_qubits_for,
                          qpe_amplitudes, trotter_exp, uncompute_qpe)

#: largest solution register simulated, in qubits
MAX_SYSTEM_QUBITS = 6


class PostSelectionError(RuntimeError):
    """Post-selection left (almost) no probability mass."""


class CapacityError(ValueError):
    """Problem does not fit the simulator register caps."""


@dataclass(frozen=True)
class FHat:
    matrix: np.ndarray
    trace_F: float
    gamma: float
    J: np.ndarray = field(repr=False)
    K: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def M(self) -> int:
        return self.dim - 1

    def terms(self) -> list[np.ndarray]:
        """The three normalised summands J/trF, K/trF and (I/gamma)/trF, padded with a
        leading zero row/column for the bias slot where needed."""
        M = self.M
        Kb = np.zeros_like(self.matrix)
        Kb[1:, 1:] = self.K
        Ib = np.zeros_like(self.matrix)
        Ib[1:, 1:] = np.eye(M) / self.gamma
        return [self.J / self.trace_F, Kb / self.trace_F, Ib / self.trace_F]


@dataclass(frozen=True)
class InversionConfig:
    precision_qubits: int = 8
    eps_kr: float = 2.0**-4
    t0: float = np.pi
    max_postselect_attempts: int = 1000
    trotter_steps: int | None = None
    min_success: float = 1e-6

    def __post_init__(self):
        if not 1 <= self.precision_qubits <= 12:
            raise ValueError("precision_qubits must lie in 1..12")
        if not 0 < self.eps_kr <= 1:
            raise ValueError("eps_kr must lie in (0, 1]")
        if not self.t0 > 0:
            raise ValueError("t0 must be positive")
        if self.trotter_steps is not None and self.trotter_steps < 1:
            raise ValueError("trotter_steps must be >= 1")


@dataclass(frozen=True)
class SolveResult:
    state: QState
    success_probability: float
    dim: int
    final_state: QState | None = field(default=None, repr=False)

    @property
    def solution(self) -> np.ndarray:
        """Amplitudes on the (M+1)-dimensional support: (b, alpha_1..alpha_M) up to scale."""
        return self.state.amplitudes[: self.dim]


def build_fhat(K, gamma: float) -> FHat:
    K = np.asarray(K, dtype=float)
    if not gamma > 0 and not np.isinf(gamma):
        raise ValueError("gamma must be positive")
    F = system_matrix(K, gamma)
    M = K.shape[0]
    J = np.zeros_like(F)
    J[0, 1:] = J[1:, 0] = 1.0
    tr = float(np.trace(F))
    if tr <= 0:
        raise ValueError("system matrix has non-positive trace")
    fhat = F / tr
    fhat.setflags(write=False)
    return FHat(fhat, tr, float(gamma), J, K.copy())


def pad_and_embed(fhat: FHat, n_qubits: int | None = None) -> HermitianOp:
    """Direct sum of F-hat with a zero block, sized to a whole qubit register."""
    n = n_qubits_for(fhat.dim) if n_qubits is None else n_qubits
    if 2**n < fhat.dim:
        raise CapacityError(f"{fhat.dim}-dimensional operator does not fit {n} qubits")
    if n > MAX_SYSTEM_QUBITS:
        raise CapacityError(
            f"solution register needs {n} qubits, above the {MAX_SYSTEM_QUBITS}-qubit cap "
            f"(M+1 = {fhat.dim})")
    out = np.zeros((2**n, 2**n))
    out[: fhat.dim, : fhat.dim] = fhat.matrix
    return HermitianOp(out)


def eigenvalue_filter(lambda_hat: float, eps_kr: float) -> float:
    """Ancilla amplitude eps_kr / |lambda_hat|, or 0 below the eigenvalue floor."""
    mag = abs(lambda_hat)
    return eps_kr / mag if mag >= eps_kr else 0.0


def reading_to_eigenvalue(readings: np.ndarray, precision_qubits: int, t0: float) -> np.ndarray:
    """Clock reading m -> eigenvalue estimate, with the upper half of the register read as
    negative phases (two's complement)."""
    T = 2**precision_qubits
    phase = np.asarray(readings) / T
    phase = np.where(phase >= 0.5, phase - 1.0, phase)
    return 2 * np.pi * phase / t0


def _evolution_unitary(fhat: FHat, op: HermitianOp, cfg: InversionConfig) -> np.ndarray:
    # QPE runs on exp(+i F t0) so that positive eigenvalues give positive phases
    if cfg.trotter_steps is None:
        return expm_hermitian(op.matrix, -cfg.t0)
    dim = op.matrix.shape[0]
    terms = []
    for term in fhat.terms():
        padded = np.zeros((dim, dim))
        padded[: fhat.dim, : fhat.dim] = term
        terms.append(-padded)
    return trotter_exp(terms, cfg.t0 / cfg.trotter_steps, cfg.trotter_steps)


def quantum_solve(fhat: FHat, y, cfg: InversionConfig = InversionConfig(),
                  ledger: ResourceLedger | None = None, keep_final_state: bool = False) -> SolveResult:
    """Prepare |0, y>, invert F-hat on it, and post-select the successful branch.

    Success means ancilla |1> with the clock register returned to |0...0>.
    The returned probability is the exact mass of that branch.
    """
    y = np.asarray(y, dtype=float)
    if len(y) != fhat.M:
        raise ValueError("target vector length must equal M")
    op = pad_and_embed(fhat)
    D = op.matrix.shape[0]
    rhs = amplitude_encode(np.concatenate([[0.0], y, np.zeros(D - fhat.dim)]))
    U = _evolution_unitary(fhat, op, cfg)
    t = cfg.precision_qubits
    T = 2**t

    joint = qpe_amplitudes(U, rhs, t)
    lam = reading_to_eigenvalue(np.arange(T), t, cfg.t0)
    weights = np.array([eigenvalue_filter(l, cfg.eps_kr) for l in lam]) * np.sign(lam)
    if not np.any(weights):
        warnings.warn("no clock reading clears the eigenvalue floor; resolution too coarse",
                      RuntimeWarning, stacklevel=2)
    branch1 = joint * weights[:, None]
    branch0 = joint * np.sqrt(1.0 - weights**2)[:, None]
    branch1 = uncompute_qpe(U, branch1)
    branch0 = uncompute_qpe(U, branch0)

    if ledger is not None:
        ledger.record(qpe_qubits_used=2 * t)

    sol = branch1[0]
    success = float(np.vdot(sol, sol).real)
    if success < cfg.min_success:
        raise PostSelectionError(
            f"post-selection probability {success:.3g} below {cfg.min_success:g}; "
            "the eigenvalue filter removed essentially all mass")
    if ledger is not None:
        # repeat-until-success: expected number of attempts, capped
        attempts = min(int(np.ceil(1.0 / success)), cfg.max_postselect_attempts)
        ledger.record(measurement_shots=attempts)

    final = None
    if keep_final_state:
        # layout: clock (t qubits) | system | ancilla (last qubit)
        full = np.stack([branch0, branch1], axis=-1).reshape(-1)
        final = QState(full)
    return SolveResult(QState.from_unnormalized(sol), success, fhat.dim, final)


def extract_solution(result: SolveResult, fhat: FHat, y) -> tuple[float, np.ndarray]:
    """Read (b, alpha) off the solution amplitudes.

    The global phase is removed by rotating the largest component onto the
    real axis; the scale is the least-squares fit of F * c * v to (0, y).
    """
    v = result.solution
    pivot = v[np.argmax(np.abs(v))]
    v = (v * np.conj(pivot) / abs(pivot)).real
    F = fhat.matrix * fhat.trace_F
    rhs = np.concatenate([[0.0], np.asarray(y, dtype=float)])
    Fv = F @ v
    c = float(Fv @ rhs / (Fv @ Fv))
    sol = c * v
    return float(sol[0]), sol[1:]


def classical_direction(fhat: FHat, y) -> np.ndarray:
    """Unit vector along F^-1 (0, y), by a dense solve."""
    rhs = np.concatenate([[0.0], np.asarray(y, dtype=float)])
    sol = np.linalg.solve(fhat.matrix, rhs)
    return sol / np.linalg.norm(sol)


def fidelity(result: SolveResult, target) -> float:
    target = np.asarray(target, dtype=complex)
    target = target / np.linalg.norm(target)
    return float(abs(np.vdot(target, result.solution)) ** 2)
