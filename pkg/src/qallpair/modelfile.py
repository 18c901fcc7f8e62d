"""JSON persistence for trained ensembles."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .lssvm import KernelSpec, LSSVMModel
from .multiclass import AllPairEnsemble, OneVsAllEnsemble

FORMAT_VERSION = 1


class ModelFileError(ValueError):
    pass


def _model_entry(m: LSSVMModel) -> dict:
    return {
        "f": int(m.pair[0]),
        "s": int(m.pair[1]),
        "gamma": float(m.gamma),
        "b": float(m.b),
        "alpha": [float(a) for a in m.alpha],
        "X": [[float(v) for v in row] for row in m.X],
    }


def to_dict(ens, metadata: dict | None = None, normalized: bool = False) -> dict:
    models = ens.models.values() if isinstance(ens, AllPairEnsemble) else ens.models
    return {
        "format_version": FORMAT_VERSION,
        "strategy": ens.strategy,
        "k": ens.k,
        "d": ens.d,
        "label_names": list(ens.label_names) if ens.label_names else None,
        "kernel": ens.kernel.to_dict(),
        "gamma": float(ens.gamma),
        "training_mode": ens.training_mode,
        "normalized": bool(normalized),
        "models": [_model_entry(m) for m in models],
        "metadata": metadata or {},
    }


def from_dict(data: dict):
    if not isinstance(data, dict):
        raise ModelFileError("malformed model file: top level must be a JSON object")
    if data.get("format_version") != FORMAT_VERSION:
        raise ModelFileError(f"unsupported model format version {data.get('format_version')!r}")
    try:
        kernel = KernelSpec(**data["kernel"])
        models = []
        for e in data["models"]:
            X = np.array(e["X"], dtype=float).reshape(len(e["X"]), data["d"])
            alpha = np.array(e["alpha"], dtype=float)
            alpha.setflags(write=False)
            models.append(LSSVMModel(float(e["b"]), alpha, float(e["gamma"]), kernel, X,
                                     (int(e["f"]), int(e["s"]))))
        names = tuple(data["label_names"]) if data.get("label_names") else None
        common = dict(k=int(data["k"]), d=int(data["d"]), training_mode=data["training_mode"],
                      kernel=kernel, gamma=float(data["gamma"]), label_names=names)
        if data["strategy"] == "all-pair":
            return AllPairEnsemble({m.pair: m for m in models}, **common)
        if data["strategy"] == "one-vs-all":
            return OneVsAllEnsemble(models, **common)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"malformed model file: {exc}") from None
    raise ModelFileError(f"unknown strategy {data['strategy']!r}")


def save(ens, path, metadata: dict | None = None, normalized: bool = False) -> None:
    text = json.dumps(to_dict(ens, metadata, normalized), indent=1)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load(path) -> tuple[object, dict]:
    """Returns (ensemble, raw dict); the raw dict carries ``normalized`` and metadata."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFileError(f"cannot read model file {path}: {exc}") from None
    return from_dict(data), data
