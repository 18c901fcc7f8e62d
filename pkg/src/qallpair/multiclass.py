"""All-pair and one-against-all ensembles: training, prediction and evaluation."""
from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, canonical_pairs, pair_subsets
from .ledger import ResourceLedger
from .lssvm import (LINEAR, KernelSpec, LSSVMModel, classify_binary, decision, gram_matrix,
                    solve_lssvm)
from .qclassify import (PairProbability, build_query_state, build_training_state, pair_probability,
                        shots_for_accuracy)
from .qtrain import (MAX_SYSTEM_QUBITS, CapacityError, InversionConfig, build_fhat,
                     extract_solution, quantum_solve)
from .selection import (VoteList, classical_argmax, classical_mode, durr_hoyer_max, quantum_mode,
                        store_votes)

TRAINING_MODES = ("classical", "quantum")


@dataclass(frozen=True)
class PredictConfig:
    """How a query is pushed through the quantum pipeline.

    ``eps`` sets the shot count in sampled mode when ``shots`` is not given;
    ``mode_eps``/``delta`` are the mode finder's accuracy and failure
    parameters; ``selector`` picks quantum or classical vote/score resolution.
    """

    probability_mode: str = "exact"
    shots: int | None = None
    eps: float = 0.01
    selector: str = "classical"
    mode_eps: float = 0.1
    delta: float = 0.1
    count_precision: int = 8
    budget_multiplier: float = 1.0

    def __post_init__(self):
        if self.probability_mode not in ("exact", "sampled"):
            raise ValueError("probability_mode must be 'exact' or 'sampled'")
        if self.selector not in ("classical", "quantum"):
            raise ValueError("selector must be 'classical' or 'quantum'")
        if self.shots is not None and self.shots <= 0:
            raise ValueError("shots must be positive")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not self.budget_multiplier > 0:
            raise ValueError("budget_multiplier must be positive")

    @property
    def shot_count(self) -> int:
        return self.shots if self.shots is not None else shots_for_accuracy(0.5, self.eps)


@dataclass
class AllPairEnsemble:
    models: dict[tuple[int, int], LSSVMModel]
    k: int
    d: int
    training_mode: str = "classical"
    kernel: KernelSpec = LINEAR
    gamma: float = 1.0
    label_names: tuple[str, ...] | None = None
    ledger: ResourceLedger = field(default_factory=ResourceLedger)

    def __post_init__(self):
        if sorted(self.models) != canonical_pairs(self.k):
            raise ValueError("ensemble needs exactly one model per canonical pair")
        if any(m.d != self.d for m in self.models.values()):
            raise ValueError("models disagree on feature dimension")

    strategy = "all-pair"


@dataclass
class OneVsAllEnsemble:
    models: list[LSSVMModel]
    k: int
    d: int
    training_mode: str = "classical"
    kernel: KernelSpec = LINEAR
    gamma: float = 1.0
    label_names: tuple[str, ...] | None = None
    ledger: ResourceLedger = field(default_factory=ResourceLedger)

    def __post_init__(self):
        if len(self.models) != self.k:
            raise ValueError("one-vs-all ensemble needs k models")

    strategy = "one-vs-all"


@dataclass
class PredictionTrace:
    chosen: int
    probabilities: list[PairProbability] = field(default_factory=list)
    scores: list[float] | None = None
    votes: VoteList | None = None
    ledger: dict[str, int] = field(default_factory=dict)
    low_margin: bool = False

    def to_dict(self) -> dict:
        return {
            "chosen": self.chosen,
            "probabilities": [{"f": p.f, "s": p.s, "p": p.p, "shots": p.shots_used}
                              for p in self.probabilities],
            "scores": self.scores,
            "votes": list(self.votes.votes) if self.votes is not None else None,
            "ledger": self.ledger,
            "low_margin": self.low_margin,
        }


def sub_rng(seed, *tags) -> np.random.Generator:
    """Child generator fixed by (seed, tags), so results do not depend on evaluation order."""
    if seed is None:
        return np.random.default_rng()
    return np.random.default_rng([int(seed), *map(int, tags)])


def _train_binary(X: np.ndarray, labels_pm: np.ndarray, pair, gamma: float, kernel: KernelSpec,
                  mode: str, cfg: InversionConfig, ledger: ResourceLedger) -> LSSVMModel:
    K = gram_matrix(X, kernel)
    if mode == "classical":
        return solve_lssvm(K, labels_pm, gamma, kernel=kernel, X=X, pair=pair)
    if kernel.kind != "linear":
        raise ValueError("kernel unsupported in quantum path")
    fhat = build_fhat(K, gamma)
    floor = float(np.min(np.abs(np.linalg.eigvalsh(fhat.matrix))))
    if floor < cfg.eps_kr:
        warnings.warn(f"pair {pair}: smallest |eigenvalue| of F-hat is {floor:.3g}, below "
                      f"eps_kr = {cfg.eps_kr:g}; those components are filtered and the trained "
                      "model is approximate (lower eps_kr and raise precision_qubits)",
                      RuntimeWarning, stacklevel=3)
    res = quantum_solve(fhat, labels_pm, cfg, ledger)
    b, alpha = extract_solution(res, fhat, labels_pm)
    alpha.setflags(write=False)
    return LSSVMModel(b, alpha, gamma, kernel, X, pair)


def _check_quantum_capacity(sizes, kernel: KernelSpec) -> None:
    if kernel.kind != "linear":
        raise ValueError("kernel unsupported in quantum path")
    biggest = max(sizes)
    if biggest + 1 > 2**MAX_SYSTEM_QUBITS:
        raise CapacityError(
            f"subset with M = {biggest} needs M+1 = {biggest + 1} amplitudes, above the "
            f"{MAX_SYSTEM_QUBITS}-qubit register cap ({2**MAX_SYSTEM_QUBITS})")


def train_all_pair(ds: Dataset, gamma: float = 1.0, kernel: KernelSpec = LINEAR,
                   mode: str = "classical", cfg: InversionConfig = InversionConfig(),
                   pair_gammas: dict[tuple[int, int], float] | None = None) -> AllPairEnsemble:
    if mode not in TRAINING_MODES:
        raise ValueError(f"unknown training mode {mode!r}")
    subsets = pair_subsets(ds)
    if mode == "quantum":
        _check_quantum_capacity([s.M for s in subsets], kernel)
    pair_gammas = pair_gammas or {}
    ledger = ResourceLedger()
    models = {}
    for sub in subsets:
        g = pair_gammas.get((sub.f, sub.s), gamma)
        models[(sub.f, sub.s)] = _train_binary(sub.X, sub.binary_labels, (sub.f, sub.s), g,
                                               kernel, mode, cfg, ledger)
    return AllPairEnsemble(models, ds.k, ds.d, mode, kernel, gamma, ds.label_names, ledger)


def train_one_vs_all(ds: Dataset, gamma: float = 1.0, kernel: KernelSpec = LINEAR,
                     mode: str = "classical", cfg: InversionConfig = InversionConfig()) -> OneVsAllEnsemble:
    if mode not in TRAINING_MODES:
        raise ValueError(f"unknown training mode {mode!r}")
    if mode == "quantum":
        _check_quantum_capacity([ds.M], kernel)
    ledger = ResourceLedger()
    models = []
    for c in range(1, ds.k + 1):
        y_pm = np.where(ds.y == c, 1.0, -1.0)
        models.append(_train_binary(ds.X, y_pm, (c, 0), gamma, kernel, mode, cfg, ledger))
    return OneVsAllEnsemble(models, ds.k, ds.d, mode, kernel, gamma, ds.label_names, ledger)


def _check_query(ens, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (ens.d,):
        raise ValueError(f"query must have dimension {ens.d}, got shape {x.shape}")
    return x


def _probability(model: LSSVMModel, x, pair, cfg: PredictConfig, rng, ledger) -> PairProbability:
    u = build_training_state(model)
    q = build_query_state(x, model)
    if cfg.probability_mode == "exact":
        return pair_probability(u, q, pair)
    return pair_probability(u, q, pair, "sampled", cfg.shot_count, rng, ledger)


def predict_all_pair(ens: AllPairEnsemble, x, cfg: PredictConfig = PredictConfig(),
                     seed=None) -> tuple[int, PredictionTrace]:
    x = _check_query(ens, x)
    ledger = ResourceLedger()
    results = []
    for j, (pair, model) in enumerate(sorted(ens.models.items())):
        p = _probability(model, x, pair, cfg, sub_rng(seed, 0, j), ledger)
        results.append((pair[0], pair[1], p))
    votes = store_votes(results)
    if cfg.selector == "quantum":
        chosen, _ = quantum_mode(votes, cfg.mode_eps, cfg.delta, sub_rng(seed, 1),
                                 cfg.count_precision, ledger=ledger)
    else:
        chosen = classical_mode(votes)
    counts = sorted(Counter(votes.votes).values(), reverse=True)
    low_margin = len(counts) > 1 and counts[0] == counts[1]
    trace = PredictionTrace(chosen, [p for _, _, p in results], None, votes, ledger.as_dict(),
                            low_margin)
    return chosen, trace


def predict_one_vs_all(ens: OneVsAllEnsemble, x, cfg: PredictConfig = PredictConfig(),
                       seed=None) -> tuple[int, PredictionTrace]:
    """Score of class i is 1 - P_i, so the most confident classifier has the highest score."""
    x = _check_query(ens, x)
    ledger = ResourceLedger()
    probs = [_probability(m, x, (c, 0), cfg, sub_rng(seed, 0, c), ledger)
             for c, m in enumerate(ens.models, start=1)]
    scores = [1.0 - p.p for p in probs]
    if cfg.selector == "quantum":
        idx, _ = durr_hoyer_max(scores, sub_rng(seed, 1), cfg.budget_multiplier, ledger)
    else:
        idx = classical_argmax(scores)
    top = sorted(scores, reverse=True)
    low_margin = len(top) > 1 and top[0] == top[1]
    return idx + 1, PredictionTrace(idx + 1, probs, scores, None, ledger.as_dict(), low_margin)


def predict(ens, x, cfg: PredictConfig = PredictConfig(), seed=None):
    if isinstance(ens, AllPairEnsemble):
        return predict_all_pair(ens, x, cfg, seed)
    return predict_one_vs_all(ens, x, cfg, seed)


def classical_all_pair_predict(ens: AllPairEnsemble, x) -> int:
    """Reference pipeline: sign of each pair's classical margin, then the classical mode."""
    x = np.asarray(x, dtype=float)
    votes = [f if classify_binary(m, x) == 1 else s for (f, s), m in sorted(ens.models.items())]
    return classical_mode(VoteList(tuple(votes), ens.k))


def pair_margins(ens: AllPairEnsemble, X) -> dict[tuple[int, int], np.ndarray]:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return {pair: np.atleast_1d(decision(m, X)) for pair, m in sorted(ens.models.items())}


def outside_band(margins: np.ndarray, fraction: float = 0.05) -> np.ndarray:
    """True where |margin| exceeds ``fraction`` of the largest |margin| in the batch."""
    margins = np.asarray(margins)
    return np.abs(margins) > fraction * np.max(np.abs(margins))


@dataclass
class Evaluation:
    accuracy: float
    confusion: np.ndarray
    ledger: dict[str, int]
    predictions: np.ndarray


def evaluate(ens, test: Dataset, cfg: PredictConfig = PredictConfig(), seed=None) -> Evaluation:
    return evaluate_arrays(ens, test.X, test.y, cfg, seed)


def evaluate_arrays(ens, X, y, cfg: PredictConfig = PredictConfig(), seed=None) -> Evaluation:
    """Like :func:`evaluate` for raw arrays, so a test file need not contain every class."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("empty test set")
    if X.shape[1] != ens.d:
        raise ValueError(f"test data has dimension {X.shape[1]}, model expects {ens.d}")
    if y.shape != (X.shape[0],) or y.min() < 1 or y.max() > ens.k:
        raise ValueError(f"test labels must lie in 1..{ens.k}")
    total = ResourceLedger()
    confusion = np.zeros((ens.k, ens.k), dtype=int)
    preds = np.empty(len(y), dtype=int)
    for i, (x, truth) in enumerate(zip(X, y)):
        point_seed = None if seed is None else point_seed_for(seed, i)
        chosen, trace = predict(ens, x, cfg, point_seed)
        total.record(**trace.ledger)
        preds[i] = chosen
        confusion[truth - 1, chosen - 1] += 1
    accuracy = float(np.mean(preds == y))
    return Evaluation(accuracy, confusion, total.as_dict(), preds)


def point_seed_for(seed, i: int) -> int:
    """Per-row seed, so row i's randomness does not depend on the other rows."""
    return int(np.random.SeedSequence([int(seed), int(i)]).generate_state(1)[0])
