"""Classical least-squares SVM: Gram matrices, the bordered linear system and the decision function.

The solve here is both the baseline classifier and the exactness oracle
for quantum training.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import PairSubset


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "linear"
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel {self.kind!r}")
        if self.kind == "rbf" and not self.sigma > 0:
            raise ValueError("rbf kernel needs sigma > 0")

    def __call__(self, A, B) -> np.ndarray:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        if A.shape[1] != B.shape[1]:
            raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
        if self.kind == "linear":
            return A @ B.T
        sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2 * A @ B.T
        return np.exp(-np.maximum(sq, 0.0) / (2 * self.sigma**2))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "sigma": self.sigma}


LINEAR = KernelSpec("linear")


def gram_matrix(subset, kernel: KernelSpec = LINEAR) -> np.ndarray:
    """K_ij = K(x_i, x_j) over the rows of a PairSubset or a plain (M, d) array."""
    X = subset.X if isinstance(subset, PairSubset) else np.asarray(subset, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("need a nonempty (M, d) example matrix")
    K = kernel(X, X)
    # exact symmetry; the rbf distance expansion can leave 1-ulp asymmetry
    return (K + K.T) / 2


def system_matrix(K: np.ndarray, gamma: float) -> np.ndarray:
    """The (M+1)x(M+1) matrix [[0, 1^T], [1, K + I/gamma]]."""
    M = K.shape[0]
    F = np.zeros((M + 1, M + 1))
    F[0, 1:] = 1.0
    F[1:, 0] = 1.0
    F[1:, 1:] = K + np.eye(M) / gamma
    return F


@dataclass(frozen=True)
class LSSVMModel:
    b: float
    alpha: np.ndarray
    gamma: float
    kernel: KernelSpec
    X: np.ndarray
    pair: tuple[int, int] = (1, 2)

    @property
    def M(self) -> int:
        return len(self.alpha)

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def residual(self, y) -> float:
        """Relative residual of the bordered system for targets ``y``."""
        F = system_matrix(gram_matrix(self.X, self.kernel), self.gamma)
        rhs = np.concatenate([[0.0], np.asarray(y, dtype=float)])
        sol = np.concatenate([[self.b], self.alpha])
        return float(np.linalg.norm(F @ sol - rhs) / np.linalg.norm(rhs))


def solve_lssvm(K, y, gamma: float = 1.0, *, kernel: KernelSpec = LINEAR, X=None,
                pair: tuple[int, int] = (1, 2)) -> LSSVMModel:
    """Solve [[0, 1^T], [1, K + I/gamma]] (b, alpha) = (0, y) by LU with partial pivoting."""
    K = np.asarray(K, dtype=float)
    y = np.asarray(y, dtype=float)
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if K.ndim != 2 or K.shape[0] != K.shape[1] or K.shape[0] != len(y):
        raise ValueError("K must be square and match len(y)")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("targets must be +1/-1")
    F = system_matrix(K, gamma)
    rhs = np.concatenate([[0.0], y])
    try:
        sol = np.linalg.solve(F, rhs)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"singular LS-SVM system: {exc}") from None
    if not np.all(np.isfinite(sol)):
        raise np.linalg.LinAlgError("singular LS-SVM system: non-finite solution")
    X = np.zeros((len(y), 0)) if X is None else np.asarray(X, dtype=float)
    alpha = sol[1:].copy()
    alpha.setflags(write=False)
    return LSSVMModel(float(sol[0]), alpha, float(gamma), kernel, X, tuple(pair))


def train_pair(subset: PairSubset, gamma: float = 1.0, kernel: KernelSpec = LINEAR) -> LSSVMModel:
    K = gram_matrix(subset, kernel)
    return solve_lssvm(K, subset.binary_labels, gamma, kernel=kernel, X=subset.X,
                       pair=(subset.f, subset.s))


def decision(model: LSSVMModel, x) -> float | np.ndarray:
    """Pre-sign margin sum_l alpha_l K(x_l, x) + b; vectorised over rows of a 2-D ``x``."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if x.shape[-1] != model.d:
        raise ValueError(f"expected dimension {model.d}, got {x.shape[-1]}")
    margins = model.kernel(x, model.X) @ model.alpha + model.b
    return float(margins[0]) if single else margins


def classify_binary(model: LSSVMModel, x):
    """+1 for class f, -1 for class s; a zero margin goes to s."""
    m = decision(model, x)
    return np.where(np.asarray(m) > 0, 1, -1) if np.ndim(m) else (1 if m > 0 else -1)
