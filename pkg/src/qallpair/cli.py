"""``qallpair`` command line: train, predict, evaluate, demo, bench.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__, modelfile
from .dataset import DatasetError, load_csv, unit_normalize
from .ledger import ResourceLedger
from .lssvm import KernelSpec, solve_lssvm
from .multiclass import (PredictConfig, evaluate_arrays, point_seed_for, predict, sub_rng,
                         train_all_pair, train_one_vs_all)
from .qclassify import overlap_probability
from .qtrain import (MAX_SYSTEM_QUBITS, CapacityError, InversionConfig, PostSelectionError,
                     build_fhat, classical_direction, extract_solution, fidelity, quantum_solve)
from .selection import (MAX_MODE_CLASSES, GroverMaxFinder, VoteList, classical_argmax, dh_budget,
                        quantum_mode)
from .statevector import QState

SEED_ENV = "QALLPAIR_SEED"
MAX_DEMO_K = 1024
MAX_BENCH_K = 4096
MAX_SWAP_DIM = 64


class UsageError(Exception):
    """Bad arguments or configuration (exit 2)."""


class RunFailure(Exception):
    """The command was well-formed but could not complete (exit 1)."""


def _out(line: str = "") -> None:
    sys.stdout.write(line + "\n")


def resolve_seed(args, required: bool) -> int | None:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    if required:
        raise UsageError(f"this path is randomized: pass --seed or set {SEED_ENV}")
    return None


def _config(factory, **kwargs):
    try:
        return factory(**kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _inversion_config(args) -> InversionConfig:
    return _config(InversionConfig, precision_qubits=args.precision_qubits, eps_kr=args.eps_kr,
                   t0=args.t0, trotter_steps=args.trotter_steps)


def _predict_config(args) -> PredictConfig:
    if args.delta is not None and not 0 < args.delta < 1:
        raise UsageError("delta must lie in (0, 1)")
    if not 0 < args.mode_eps < 1:
        raise UsageError("mode-eps must lie in (0, 1)")
    return _config(PredictConfig, probability_mode=args.probability_mode, shots=args.shots,
                   eps=args.eps, selector=args.mode_finder, mode_eps=args.mode_eps,
                   delta=args.delta, count_precision=args.count_precision,
                   budget_multiplier=args.budget_multiplier)


def _needs_seed(cfg: PredictConfig) -> bool:
    return cfg.probability_mode == "sampled" or cfg.selector == "quantum"


def read_rows(path, d: int, label_names=None) -> tuple[np.ndarray, np.ndarray | None]:
    """Feature rows, plus labels when the last header column is ``label``."""
    path = Path(path)
    if not path.is_file():
        raise RunFailure(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise RunFailure(f"{path}: missing header row")
    header, body = rows[0], [(i, r) for i, r in enumerate(rows[1:], start=2) if r]
    has_label = header[-1].strip().lower() == "label"
    width = len(header) - has_label
    if width != d:
        raise RunFailure(f"{path}: input has {width} feature columns, model expects d = {d}")
    if not body:
        raise RunFailure(f"{path}: no examples")
    X = np.empty((len(body), d))
    labels = []
    lookup = {n: i + 1 for i, n in enumerate(label_names)} if label_names else None
    for n, (lineno, row) in enumerate(body):
        if len(row) != len(header):
            raise RunFailure(f"{path}: row {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            X[n] = [float(v) for v in row[:d]]
        except ValueError:
            raise RunFailure(f"{path}: row {lineno}: non-numeric feature") from None
        if not np.all(np.isfinite(X[n])):
            raise RunFailure(f"{path}: row {lineno}: non-finite feature")
        if has_label:
            lab = row[d].strip()
            if lookup is not None:
                if lab not in lookup:
                    raise RunFailure(f"{path}: row {lineno}: unknown label {lab!r}")
                labels.append(lookup[lab])
            else:
                try:
                    labels.append(int(lab))
                except ValueError:
                    raise RunFailure(f"{path}: row {lineno}: non-integer label {lab!r}") from None
    return X, (np.array(labels, dtype=int) if has_label else None)


def _normalize_rows(X: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0):
        raise RunFailure(f"zero feature vector at row {int(np.flatnonzero(norms == 0)[0]) + 2}")
    return X / norms[:, None]


def _label_text(ens, c: int) -> str:
    return ens.label_names[c - 1] if ens.label_names else str(c)


def _ledger_line(ledger: dict) -> str:
    return "ledger " + " ".join(f"{k}={v}" for k, v in ledger.items())


# ---- train / predict / evaluate ----

def cmd_train(args) -> int:
    if not args.gamma > 0:
        raise UsageError("gamma must be positive")
    kernel = _config(KernelSpec, kind=args.kernel, sigma=args.sigma)
    inv = _inversion_config(args)
    seed = resolve_seed(args, required=args.mode == "quantum")
    if args.mode == "quantum" and kernel.kind != "linear":
        raise UsageError("kernel unsupported in quantum path: use --kernel linear")
    ds = load_csv(args.data, map_labels=args.map_labels)
    if args.normalize:
        ds = unit_normalize(ds)
    if args.strategy == "all-pair":
        ens = train_all_pair(ds, args.gamma, kernel, args.mode, inv)
    else:
        ens = train_one_vs_all(ds, args.gamma, kernel, args.mode, inv)
    meta = {
        "tool": f"qallpair {__version__}",
        "data_sha256": hashlib.sha256(Path(args.data).read_bytes()).hexdigest(),
        "n_train": ds.M,
        "seed": seed,
    }
    if args.mode == "quantum":
        meta["inversion"] = {"precision_qubits": inv.precision_qubits, "eps_kr": inv.eps_kr,
                             "t0": inv.t0, "trotter_steps": inv.trotter_steps}
    modelfile.save(ens, args.out, meta, normalized=args.normalize)
    n_models = len(ens.models)
    _out(f"trained {ens.strategy} ensemble: k={ens.k} d={ens.d} models={n_models} "
         f"mode={ens.training_mode} -> {args.out}")
    if args.mode == "quantum":
        _out(_ledger_line(ens.ledger.as_dict()))
    return 0


def _load_model(path):
    try:
        return modelfile.load(path)
    except modelfile.ModelFileError as exc:
        raise RunFailure(str(exc)) from None


def _prepare(args):
    ens, raw = _load_model(args.model)
    cfg = _predict_config(args)
    seed = resolve_seed(args, required=_needs_seed(cfg))
    X, labels = read_rows(args.data, ens.d, ens.label_names)
    if raw.get("normalized"):
        X = _normalize_rows(X)
    return ens, cfg, seed, X, labels


def cmd_predict(args) -> int:
    ens, cfg, seed, X, _ = _prepare(args)
    traces = []
    lines = []
    for i, x in enumerate(X):
        chosen, trace = predict(ens, x, cfg, None if seed is None else point_seed_for(seed, i))
        lines.append(_label_text(ens, chosen))
        if args.trace:
            traces.append({"row": i, **trace.to_dict()})
    sys.stdout.write("\n".join(lines) + "\n")
    if args.trace:
        Path(args.trace).write_text(json.dumps(traces, indent=1) + "\n", encoding="utf-8")
    return 0


def cmd_evaluate(args) -> int:
    ens, cfg, seed, X, labels = _prepare(args)
    if labels is None:
        raise RunFailure(f"{args.data}: evaluation needs a 'label' column")
    ev = evaluate_arrays(ens, X, labels, cfg, seed)
    correct = int(np.sum(ev.predictions == labels))
    _out(f"accuracy {ev.accuracy:.6f} ({correct}/{len(labels)})")
    names = [_label_text(ens, c) for c in range(1, ens.k + 1)]
    width = max(6, *(len(n) for n in names), len(str(int(ev.confusion.max()))))
    _out("confusion (rows = true, columns = predicted)")
    _out(" " * width + " " + " ".join(n.rjust(width) for n in names))
    for name, row in zip(names, ev.confusion):
        _out(name.rjust(width) + " " + " ".join(str(int(v)).rjust(width) for v in row))
    _out(_ledger_line(ev.ledger))
    if args.confusion_csv:
        with Path(args.confusion_csv).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["true\\predicted", *names])
            for name, row in zip(names, ev.confusion):
                w.writerow([name, *map(int, row)])
    return 0


# ---- demos ----

def demo_grover_max(args) -> int:
    if not 2 <= args.k <= MAX_DEMO_K:
        raise UsageError(f"k must lie in 2..{MAX_DEMO_K}")
    if args.trials < 1:
        raise UsageError("trials must be >= 1")
    if not args.budget_multiplier > 0:
        raise UsageError("budget-multiplier must be positive")
    seed = resolve_seed(args, required=True)
    total = ResourceLedger()
    wins = 0
    _out(f"maximum finding over k={args.k} random scores, budget "
         f"{args.budget_multiplier * dh_budget(args.k):.2f} Grover iterations")
    for t in range(args.trials):
        rng = sub_rng(seed, t)
        scores = rng.random(args.k)
        ledger = ResourceLedger()
        idx = GroverMaxFinder(scores).run(rng, args.budget_multiplier, ledger)
        ok = idx == classical_argmax(scores)
        wins += ok
        total.merge(ledger)
        _out(f"trial {t}: found {idx} true {classical_argmax(scores)} "
             f"queries {ledger.oracle_queries} {'ok' if ok else 'miss'}")
    _out(f"success rate {wins / args.trials:.4f} ({wins}/{args.trials})")
    _out(_ledger_line(total.as_dict()))
    return 0


def _parse_votes(text: str) -> VoteList:
    try:
        votes = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"votes must be comma-separated integers, got {text!r}") from None
    k = int(round((1 + math.sqrt(1 + 8 * len(votes))) / 2))
    if k * (k - 1) // 2 != len(votes):
        raise UsageError(f"{len(votes)} votes is not k(k-1)/2 for any k")
    if k > MAX_MODE_CLASSES:
        raise UsageError(f"mode finding is capped at k = {MAX_MODE_CLASSES}")
    try:
        return VoteList(votes, k)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def demo_mode_find(args) -> int:
    v = _parse_votes(args.votes)
    if not (0 < args.eps < 1 and 0 < args.delta < 1):
        raise UsageError("eps and delta must lie in (0, 1)")
    if args.trials < 1:
        raise UsageError("trials must be >= 1")
    if not 1 <= args.precision_qubits <= 12:
        raise UsageError("precision-qubits must lie in 1..12")
    seed = resolve_seed(args, required=True)
    freq = v.frequencies()
    top = max(freq.values())
    modes = sorted(c for c, f in freq.items() if f == top)
    _out(f"votes {','.join(map(str, v.votes))} (k={v.k}); true mode(s) {modes}")
    total = ResourceLedger()
    hits = 0
    for t in range(args.trials):
        ledger = ResourceLedger()
        cls, _ = quantum_mode(v, args.eps, args.delta, sub_rng(seed, t), args.precision_qubits,
                              ledger=ledger)
        hits += cls in modes
        total.merge(ledger)
        _out(f"trial {t}: class {cls} {'ok' if cls in modes else 'miss'}")
    _out(f"mode recovered in {hits / args.trials:.4f} of trials ({hits}/{args.trials})")
    _out(_ledger_line(total.as_dict()))
    return 0


def demo_swap_test(args) -> int:
    if not 2 <= args.dim <= MAX_SWAP_DIM or args.dim & (args.dim - 1):
        raise UsageError(f"dim must be a power of two in 2..{MAX_SWAP_DIM}")
    if args.shots is not None and args.shots < 1:
        raise UsageError("shots must be >= 1")
    u = np.zeros(args.dim, dtype=complex)
    u[0] = 1.0
    if args.identical:
        kind, x = "identical", u.copy()
    elif args.orthogonal:
        kind, x = "orthogonal", np.roll(u, 1)
    elif args.antipodal:
        kind, x = "antipodal", -u
    else:
        rng = np.random.default_rng(resolve_seed(args, required=True))
        kind = "random"
        u = rng.standard_normal(args.dim) + 1j * rng.standard_normal(args.dim)
        x = rng.standard_normal(args.dim) + 1j * rng.standard_normal(args.dim)
        u, x = u / np.linalg.norm(u), x / np.linalg.norm(x)
    p = overlap_probability(QState(u), QState(x))
    law = 0.5 * (1 - np.vdot(u, x).real)
    _out(f"swap test on {kind} states of dimension {args.dim}")
    _out(f"Re<u|x> = {np.vdot(u, x).real:.12f}")
    _out(f"P(ancilla=1) simulated = {p:.12f}")
    _out(f"P(ancilla=1) closed form = {law:.12f}")
    if args.shots:
        rng = np.random.default_rng(resolve_seed(args, required=True))
        hits = int(rng.binomial(args.shots, p))
        _out(f"sampled estimate over {args.shots} shots = {hits / args.shots:.6f}")
        _out(_ledger_line(ResourceLedger(measurement_shots=args.shots).as_dict()))
    return 0


def demo_qpe_solve(args) -> int:
    inv = _inversion_config(args)
    if not args.gamma > 0:
        raise UsageError("gamma must be positive")
    if args.random_m is None:
        K, y = np.eye(2), np.array([1.0, -1.0])
        _out(f"instance: K = I_2, y = (1, -1), gamma = {args.gamma:g}")
    else:
        if not 1 <= args.random_m or args.random_m + 1 > 2**MAX_SYSTEM_QUBITS:
            raise UsageError(f"random-m must lie in 1..{2**MAX_SYSTEM_QUBITS - 1}")
        rng = np.random.default_rng(resolve_seed(args, required=True))
        Xr = rng.standard_normal((args.random_m, 2))
        K = Xr @ Xr.T
        y = rng.choice([-1.0, 1.0], size=args.random_m)
        _out(f"instance: random linear-kernel M = {args.random_m}, gamma = {args.gamma:g}")
    fhat = build_fhat(K, args.gamma)
    eig = np.linalg.eigvalsh(fhat.matrix)
    _out("eigenvalues of F-hat: " + " ".join(f"{e:.6f}" for e in eig))
    if np.min(np.abs(eig)) < inv.eps_kr:
        _out(f"note: some eigenvalues lie below eps_kr = {inv.eps_kr:g} and are filtered")
    ledger = ResourceLedger()
    res = quantum_solve(fhat, y, inv, ledger)
    target = classical_direction(fhat, y)
    _out(f"post-selection probability {res.success_probability:.6f}")
    _out("solution amplitudes: " + " ".join(f"{a.real:+.6f}" for a in res.solution))
    _out("classical direction: " + " ".join(f"{a:+.6f}" for a in target))
    _out(f"fidelity {fidelity(res, target):.8f}")
    b, alpha = extract_solution(res, fhat, y)
    ref = solve_lssvm(K, y, args.gamma)
    _out(f"extracted b {b:+.6f} alpha " + " ".join(f"{a:+.6f}" for a in alpha))
    _out(f"classical b {ref.b:+.6f} alpha " + " ".join(f"{a:+.6f}" for a in ref.alpha))
    _out(_ledger_line(ledger.as_dict()))
    return 0


# ---- bench ----

def _bench_ks(args) -> list[int]:
    if args.ks:
        try:
            ks = sorted({int(v) for v in args.ks.split(",")})
        except ValueError:
            raise UsageError(f"ks must be comma-separated integers, got {args.ks!r}") from None
    else:
        if args.k_min < 2 or args.k_max < args.k_min:
            raise UsageError("need 2 <= k-min <= k-max")
        ks = []
        k = args.k_min
        while k <= args.k_max:
            ks.append(k)
            k *= 2
    if not ks or ks[0] < 2 or ks[-1] > MAX_BENCH_K:
        raise UsageError(f"k values must lie in 2..{MAX_BENCH_K}")
    return ks


def run_bench(ks, trials: int, seed: int, budget_multiplier: float = 1.0) -> list[tuple]:
    """(k, trials, mean oracle queries, success rate) per k, over seeded random score lists."""
    rows = []
    for k in ks:
        queries, wins = 0, 0
        for t in range(trials):
            rng = sub_rng(seed, k, t)
            scores = rng.random(k)
            ledger = ResourceLedger()
            idx = GroverMaxFinder(scores).run(rng, budget_multiplier, ledger)
            queries += ledger.oracle_queries
            wins += idx == classical_argmax(scores)
        rows.append((k, trials, queries / trials, wins / trials))
    return rows


def fit_exponent(ks, values) -> float:
    return float(np.polyfit(np.log(ks), np.log(values), 1)[0])


def cmd_bench(args) -> int:
    if args.trials < 1:
        raise UsageError("trials must be >= 1")
    if not args.budget_multiplier > 0:
        raise UsageError("budget-multiplier must be positive")
    ks = _bench_ks(args)
    seed = resolve_seed(args, required=True)
    rows = run_bench(ks, args.trials, seed, args.budget_multiplier)
    lines = ["k,trials,mean_queries,success_rate"]
    lines += [f"{k},{n},{q:.6f},{s:.6f}" for k, n, q, s in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    if len(rows) >= 2:
        b = fit_exponent([r[0] for r in rows], [r[2] for r in rows])
        _out(f"fitted query exponent b = {b:.4f}")
    else:
        _out("single k: no exponent fit")
    return 0


# ---- parser ----

def _add_seed(p):
    p.add_argument("--seed", type=int, default=None,
                   help=f"RNG seed (falls back to ${SEED_ENV})")


def _add_inversion(p):
    p.add_argument("--precision-qubits", type=int, default=8)
    p.add_argument("--eps-kr", type=float, default=2.0**-4)
    p.add_argument("--t0", type=float, default=math.pi)
    p.add_argument("--trotter-steps", type=int, default=None)


def _add_prediction(p):
    p.add_argument("--probability-mode", choices=["exact", "sampled"], default="exact")
    p.add_argument("--shots", type=int, default=None)
    p.add_argument("--eps", type=float, default=0.01,
                   help="target accuracy that sets the shot count when --shots is absent")
    p.add_argument("--mode-finder", choices=["classical", "quantum"], default="classical")
    p.add_argument("--mode-eps", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--count-precision", type=int, default=8)
    p.add_argument("--budget-multiplier", type=float, default=1.0)
    _add_seed(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qallpair", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qallpair {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train an ensemble and write a model file")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--strategy", choices=["all-pair", "one-vs-all"], default="all-pair")
    p.add_argument("--mode", choices=["classical", "quantum"], default="classical")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--kernel", choices=["linear", "rbf"], default="linear")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--normalize", action="store_true", help="scale each example to unit norm")
    p.add_argument("--map-labels", action="store_true", help="accept string labels")
    _add_inversion(p)
    _add_seed(p)
    p.set_defaults(func=cmd_train)

    for name, func, extra in (("predict", cmd_predict, "--trace"),
                              ("evaluate", cmd_evaluate, "--confusion-csv")):
        p = sub.add_parser(name)
        p.add_argument("--model", required=True)
        p.add_argument("--data", required=True)
        p.add_argument(extra, default=None)
        _add_prediction(p)
        p.set_defaults(func=func)

    demo = sub.add_parser("demo", help="standalone algorithm demonstrations")
    dsub = demo.add_subparsers(dest="demo", required=True)
    p = dsub.add_parser("grover-max")
    p.add_argument("--k", type=int, default=16)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--budget-multiplier", type=float, default=1.0)
    _add_seed(p)
    p.set_defaults(func=demo_grover_max)

    p = dsub.add_parser("mode-find")
    p.add_argument("--votes", required=True, help="comma-separated class per pair, e.g. 1,1,2")
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--precision-qubits", type=int, default=8)
    _add_seed(p)
    p.set_defaults(func=demo_mode_find)

    p = dsub.add_parser("swap-test")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--identical", action="store_true")
    g.add_argument("--orthogonal", action="store_true")
    g.add_argument("--antipodal", action="store_true")
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--shots", type=int, default=None)
    _add_seed(p)
    p.set_defaults(func=demo_swap_test)

    p = dsub.add_parser("qpe-solve")
    p.add_argument("--random-m", type=int, default=None)
    p.add_argument("--gamma", type=float, default=1.0)
    _add_inversion(p)
    _add_seed(p)
    p.set_defaults(func=demo_qpe_solve)

    p = sub.add_parser("bench", help="query-count scaling of maximum finding")
    p.add_argument("--k-min", type=int, default=4)
    p.add_argument("--k-max", type=int, default=64)
    p.add_argument("--ks", default=None, help="explicit comma-separated k values")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--budget-multiplier", type=float, default=1.0)
    p.add_argument("--out", default=None)
    _add_seed(p)
    p.set_defaults(func=cmd_bench)
    return parser


def _show_warning(message, category, filename, lineno, file=None, line=None) -> None:
    print(f"qallpair: warning: {message}", file=sys.stderr)


def main(argv=None) -> int:
    warnings.showwarning = _show_warning
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"qallpair: usage error: {exc}", file=sys.stderr)
        return 2
    except (RunFailure, DatasetError, CapacityError, PostSelectionError, OSError, ValueError) as exc:
        print(f"qallpair: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
