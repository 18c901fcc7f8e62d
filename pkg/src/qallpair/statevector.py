"""Dense statevector simulator.

Qubit 0 is the most significant bit of a basis index, so on three qubits
|q0 q1 q2> sits at index 4*q0 + 2*q1 + q2. Every operation returns a new
state; nothing is mutated in place.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .ledger import ResourceLedger

MAX_QUBITS = 24
NORM_TOL = 1e-10

H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)


def ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def phase(theta: float) -> np.ndarray:
    return np.diag([1.0, np.exp(1j * theta)])


def n_qubits_for(length: int) -> int:
    """Qubits needed to index ``length`` slots (at least one)."""
    return max(1, int(np.ceil(np.log2(length)))) if length > 1 else 1


@dataclass(frozen=True)
class QState:
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex).ravel()
        n = int(np.log2(len(a))) if len(a) else -1
        if n < 1 or 2**n != len(a):
            raise ValueError(f"amplitude vector length {len(a)} is not 2**n with n >= 1")
        if n > MAX_QUBITS:
            raise ValueError(f"{n} qubits exceeds the {MAX_QUBITS}-qubit cap")
        norm = np.linalg.norm(a)
        if abs(norm - 1) > NORM_TOL:
            raise ValueError(f"state norm {norm!r} differs from 1")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def n_qubits(self) -> int:
        return int(np.log2(len(self.amplitudes)))

    @property
    def dim(self) -> int:
        return len(self.amplitudes)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def inner(self, other: "QState") -> complex:
        """<self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def tensor(self, other: "QState") -> "QState":
        """|self> (x) |other>, with self on the leading qubits."""
        return QState(np.kron(self.amplitudes, other.amplitudes))

    @classmethod
    def basis(cls, index: int, n_qubits: int) -> "QState":
        a = np.zeros(2**n_qubits, dtype=complex)
        a[index] = 1
        return cls(a)

    @classmethod
    def from_unnormalized(cls, v) -> "QState":
        v = np.asarray(v, dtype=complex)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise ValueError("cannot normalise the zero vector")
        return cls(v / norm)


@dataclass(frozen=True)
class HermitianOp:
    matrix: np.ndarray
    targets: tuple[int, ...] | None = None

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("operator must be a square matrix")
        if not np.allclose(m, m.conj().T, atol=1e-12, rtol=0):
            raise ValueError("operator is not Hermitian")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def unitary(self, t: float) -> np.ndarray:
        return expm_hermitian(self.matrix, t)


@dataclass(frozen=True)
class MeasurementRecord:
    outcome: int
    probability: float
    post_state: QState


def _as_matrix(op) -> np.ndarray:
    return op.matrix if isinstance(op, HermitianOp) else np.asarray(op, dtype=complex)


def expm_hermitian(Hm, t: float) -> np.ndarray:
    """exp(-i H t) through the eigendecomposition of Hermitian H."""
    Hm = _as_matrix(Hm)
    if not np.allclose(Hm, Hm.conj().T, atol=1e-12, rtol=0):
        raise ValueError("operator is not Hermitian")
    w, V = np.linalg.eigh(Hm)
    return (V * np.exp(-1j * w * t)) @ V.conj().T


def is_unitary(U, tol: float = 1e-10) -> bool:
    U = np.asarray(U)
    return U.ndim == 2 and U.shape[0] == U.shape[1] and np.allclose(
        U.conj().T @ U, np.eye(U.shape[0]), atol=tol, rtol=0)


def amplitude_encode(v) -> QState:
    """Normalised copy of ``v``, zero-padded at the high end to a power-of-two length."""
    v = np.asarray(v, dtype=complex).ravel()
    if len(v) == 0 or not np.any(v):
        raise ValueError("cannot encode the zero vector")
    n = n_qubits_for(len(v))
    padded = np.zeros(2**n, dtype=complex)
    padded[: len(v)] = v
    return QState.from_unnormalized(padded)


def apply_gate(q: QState, gate, targets: Sequence[int], controls: Sequence[int] = ()) -> QState:
    """Apply ``gate`` to ``targets`` (targets[0] is the gate's most significant qubit),
    conditioned on every qubit in ``controls`` being |1>."""
    U = _as_matrix(gate)
    targets, controls = list(targets), list(controls)
    n = q.n_qubits
    if U.shape != (2 ** len(targets),) * 2:
        raise ValueError(f"gate shape {U.shape} does not match {len(targets)} target qubits")
    if not is_unitary(U):
        raise ValueError("gate is not unitary")
    used = targets + controls
    if len(set(used)) != len(used):
        raise ValueError("target/control qubits collide")
    if any(not 0 <= i < n for i in used):
        raise ValueError(f"qubit index out of range for {n} qubits")

    psi = q.amplitudes.reshape([2] * n).copy()
    sel = [slice(None)] * n
    for c in controls:
        sel[c] = 1
    sel = tuple(sel)
    remaining = [i for i in range(n) if i not in controls]
    pos = [remaining.index(t) for t in targets]
    front = list(range(len(targets)))
    sub = np.moveaxis(psi[sel], pos, front)
    shape = sub.shape
    sub = (U @ sub.reshape(2 ** len(targets), -1)).reshape(shape)
    psi[sel] = np.moveaxis(sub, front, pos)
    return QState(psi.ravel())


def probability_of(q: QState, qubit: int, outcome: int) -> float:
    """Exact probability that measuring ``qubit`` yields ``outcome``; no collapse."""
    n = q.n_qubits
    if not 0 <= qubit < n:
        raise ValueError("qubit index out of range")
    p = q.probabilities().reshape([2] * n)
    return float(np.take(p, outcome, axis=qubit).sum())


def measure(q: QState, qubit: int, seed=None) -> MeasurementRecord:
    rng = np.random.default_rng(seed)
    p1 = probability_of(q, qubit, 1)
    outcome = int(rng.random() < p1)
    prob = p1 if outcome else 1.0 - p1
    psi = q.amplitudes.reshape([2] * q.n_qubits).copy()
    sel = [slice(None)] * q.n_qubits
    sel[qubit] = 1 - outcome
    psi[tuple(sel)] = 0
    return MeasurementRecord(outcome, prob, QState(psi.ravel() / np.sqrt(prob)))


def sample_basis(q: QState, rng: np.random.Generator) -> int:
    """Measure every qubit; returns the basis index."""
    cdf = np.cumsum(q.probabilities())
    return int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), q.dim - 1))


def evolve(q: QState, Hm, t: float, targets: Sequence[int] | None = None) -> QState:
    """exp(-i H t)|q>, exact; ``targets`` restricts H to a subset of qubits."""
    if isinstance(Hm, HermitianOp) and targets is None:
        targets = Hm.targets
    U = expm_hermitian(Hm, t)
    if targets is None:
        if U.shape[0] != q.dim:
            raise ValueError("Hamiltonian dimension does not match the state")
        return QState(U @ q.amplitudes)
    return apply_gate(q, U, targets)


def trotter_exp(terms, dt: float, steps: int) -> np.ndarray:
    """First-order product formula (prod_k exp(-i H_k dt))^steps, leftmost term applied last."""
    mats = [_as_matrix(t) for t in terms]
    if not mats:
        raise ValueError("need at least one term")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    dim = mats[0].shape
    if any(m.shape != dim for m in mats):
        raise ValueError("terms differ in dimension")
    step = np.eye(dim[0], dtype=complex)
    for m in mats:
        step = step @ expm_hermitian(m, dt)
    return np.linalg.matrix_power(step, steps)


def marked_mask(marked, dim: int) -> np.ndarray:
    if callable(marked):
        return np.fromiter((bool(marked(i)) for i in range(dim)), dtype=bool, count=dim)
    mask = np.asarray(marked, dtype=bool)
    if mask.shape != (dim,):
        raise ValueError("marked mask length must equal the state dimension")
    return mask


def grover_iterate(q: QState, marked: Callable[[int], bool] | np.ndarray, iterations: int,
                   ledger: ResourceLedger | None = None, start: QState | None = None) -> QState:
    """Apply (diffusion . phase oracle)^iterations.

    The diffusion reflects about ``start`` (default: ``q`` itself), which for
    a uniform start is the usual inversion about the mean. Each iteration is
    one oracle query.
    """
    if iterations < 0:
        raise ValueError("iterations must be non-negative")
    mask = marked_mask(marked, q.dim)
    s = (start or q).amplitudes
    psi = q.amplitudes.copy()
    for _ in range(iterations):
        psi[mask] *= -1
        psi = 2 * s * np.vdot(s, psi) - psi
    if ledger is not None:
        ledger.record(grover_iterations=iterations, oracle_queries=iterations)
    return QState(psi)


def grover_operator(start: QState, mask: np.ndarray) -> np.ndarray:
    """Dense matrix of one Grover iteration (reflect about start after the phase oracle)."""
    s = start.amplitudes
    oracle = np.diag(np.where(mask, -1.0, 1.0)).astype(complex)
    return (2 * np.outer(s, s.conj()) - np.eye(start.dim)) @ oracle


def qpe_amplitudes(U, psi, precision_qubits: int) -> np.ndarray:
    """Joint (clock, system) amplitudes after the controlled-U^(2^j) ladder and inverse QFT.

    Row m is the system-register component attached to clock reading m,
    i.e. phase estimate m / 2**precision_qubits.
    """
    U = np.asarray(U, dtype=complex)
    psi = np.asarray(psi.amplitudes if isinstance(psi, QState) else psi, dtype=complex)
    if precision_qubits < 1:
        raise ValueError("precision_qubits must be >= 1")
    if U.shape != (len(psi), len(psi)):
        raise ValueError("unitary does not match the input dimension")
    if not is_unitary(U, 1e-8):
        raise ValueError("U is not unitary")
    T = 2**precision_qubits
    joint = np.tile(psi, (T, 1)) / np.sqrt(T)
    readings = np.arange(T)
    power = U
    for j in range(precision_qubits):
        rows = (readings >> j) & 1 == 1
        joint[rows] = joint[rows] @ power.T
        power = power @ power
    return inverse_qft(joint)


def inverse_qft(joint: np.ndarray) -> np.ndarray:
    """Inverse QFT over axis 0: out[r] = T^-1/2 sum_m exp(-2 pi i r m / T) in[m]."""
    return np.fft.fft(joint, axis=0) / np.sqrt(joint.shape[0])


def qft(joint: np.ndarray) -> np.ndarray:
    return np.fft.ifft(joint, axis=0) * np.sqrt(joint.shape[0])


def uncompute_qpe(U, joint: np.ndarray) -> np.ndarray:
    """Inverse of :func:`qpe_amplitudes`'s circuit: QFT, then controlled-U^(-2^j) ladder, then
    Hadamards on the clock. Returns joint amplitudes in the computational clock basis."""
    U = np.asarray(U, dtype=complex)
    T = joint.shape[0]
    t = int(np.log2(T))
    out = qft(joint)
    readings = np.arange(T)
    power = U.conj().T
    for j in range(t):
        rows = (readings >> j) & 1 == 1
        out[rows] = out[rows] @ power.T
        power = power @ power
    # Hadamard on every clock qubit is the Walsh-Hadamard transform
    return _walsh_hadamard(out)


def _walsh_hadamard(a: np.ndarray) -> np.ndarray:
    a = a.copy()
    h = 1
    T = a.shape[0]
    while h < T:
        a = a.reshape(T // (2 * h), 2, h, *a.shape[1:])
        x, y = a[:, 0].copy(), a[:, 1].copy()
        a[:, 0], a[:, 1] = x + y, x - y
        a = a.reshape(T, *a.shape[3:])
        h *= 2
    return a / np.sqrt(T)


def phase_estimate(U, input_state, precision_qubits: int) -> np.ndarray:
    """Exact output distribution over the 2**precision_qubits clock readings."""
    joint = qpe_amplitudes(U, input_state, precision_qubits)
    return (np.abs(joint) ** 2).sum(axis=1)
