"""Simulated quantum all-pair least-squares SVM for multiclass classification."""

__version__ = "0.1.0"

from .dataset import Dataset, DatasetError, gaussian_blobs, load_csv, pair_subsets, unit_normalize
from .ledger import ResourceLedger
from .lssvm import KernelSpec, LSSVMModel, decision, solve_lssvm, train_pair
from .multiclass import (AllPairEnsemble, OneVsAllEnsemble, PredictConfig, evaluate, predict,
                         train_all_pair, train_one_vs_all)
from .qtrain import InversionConfig, build_fhat, quantum_solve
from .selection import durr_hoyer_max, quantum_count, quantum_mode

__all__ = [
    "AllPairEnsemble", "Dataset", "DatasetError", "InversionConfig", "KernelSpec", "LSSVMModel",
    "OneVsAllEnsemble", "PredictConfig", "ResourceLedger", "build_fhat", "decision",
    "durr_hoyer_max", "evaluate", "gaussian_blobs", "load_csv", "pair_subsets", "predict",
    "quantum_count", "quantum_mode", "quantum_solve", "solve_lssvm", "train_all_pair",
    "train_one_vs_all", "train_pair", "unit_normalize",
]
