import numpy as np
import pytest

from qallpair.dataset import Dataset, gaussian_blobs
from qallpair.lssvm import KernelSpec, LSSVMModel, decision
from qallpair.multiclass import (AllPairEnsemble, PredictConfig, classical_all_pair_predict,
                                 evaluate, evaluate_arrays, outside_band, pair_margins, predict,
                                 predict_all_pair, predict_one_vs_all, sub_rng, train_all_pair,
                                 train_one_vs_all)
from qallpair.qclassify import classify_pair
from qallpair.qtrain import CapacityError, InversionConfig
from qallpair.selection import classical_argmax

QUANTUM = PredictConfig(selector="quantum")


@pytest.fixture(scope="module")
def trained(toy3):
    return train_all_pair(toy3, 1.0)


def grid_points(n=60, seed=3):
    rng = np.random.default_rng(seed)
    return rng.uniform(-2.5, 2.5, (n, 2))


def test_all_pair_model_count(trained):
    assert sorted(trained.models) == [(1, 2), (1, 3), (2, 3)]
    assert trained.strategy == "all-pair"


def test_quantum_training_toy_pair():
    ds = Dataset(np.eye(2), np.array([1, 2]), 2)
    cl = train_all_pair(ds, 1.0).models[(1, 2)]
    qu = train_all_pair(ds, 1.0, mode="quantum").models[(1, 2)]
    a, b = np.array([cl.b, *cl.alpha]), np.array([qu.b, *qu.alpha])
    assert abs(a @ b) ** 2 / ((a @ a) * (b @ b)) >= 0.99


def test_quantum_training_small_blobs():
    ds = gaussian_blobs(3, seed=2)
    cl = train_all_pair(ds, 1.0)
    with pytest.warns(RuntimeWarning, match="eps_kr"):
        train_all_pair(ds, 1.0, mode="quantum")
    qu = train_all_pair(ds, 1.0, mode="quantum",
                        cfg=InversionConfig(precision_qubits=10, eps_kr=2**-6))
    assert qu.training_mode == "quantum" and qu.ledger.qpe_qubits_used > 0
    for pair in cl.models:
        a = np.array([cl.models[pair].b, *cl.models[pair].alpha])
        b = np.array([qu.models[pair].b, *qu.models[pair].alpha])
        assert abs(a @ b) ** 2 / ((a @ a) * (b @ b)) >= 0.999


def test_quantum_rejects_rbf(toy3):
    with pytest.raises(ValueError, match="kernel unsupported in quantum path"):
        train_all_pair(toy3, kernel=KernelSpec("rbf", 1.0), mode="quantum")


def test_quantum_capacity(toy3):
    big = gaussian_blobs(40, seed=1)
    with pytest.raises(CapacityError, match="cap"):
        train_all_pair(big, mode="quantum")


def test_unknown_training_mode(toy3):
    with pytest.raises(ValueError):
        train_all_pair(toy3, mode="annealed")


def test_exact_pipeline_matches_classical_on_grid(trained):
    X = grid_points()
    margins = pair_margins(trained, X)
    keep = np.all([outside_band(m) for m in margins.values()], axis=0)
    for x in X[keep]:
        assert predict_all_pair(trained, x)[0] == classical_all_pair_predict(trained, x)


def test_exact_pipeline_matches_everywhere(trained):
    # the swap-test decision equals the margin sign, so no band is needed in exact mode
    X = grid_points(200, seed=9)
    assert all(predict_all_pair(trained, x)[0] == classical_all_pair_predict(trained, x) for x in X)


def test_quantum_mode_finder_agreement(trained):
    X = grid_points()
    agree = [predict_all_pair(trained, x, QUANTUM, seed=i)[0] == classical_all_pair_predict(trained, x)
             for i, x in enumerate(X)]
    assert np.mean(agree) >= 0.95


def test_binary_reduces_to_single_pair():
    ds = gaussian_blobs(10, k=2, seed=4)
    ens = train_all_pair(ds)
    x = np.array([0.3, -0.2])
    chosen, trace = predict_all_pair(ens, x)
    assert len(trace.probabilities) == 1 and len(trace.votes) == 1
    assert chosen == classify_pair(trace.probabilities[0])


def test_trace_contents(trained):
    chosen, trace = predict_all_pair(trained, [1.5, 0.0])
    d = trace.to_dict()
    assert d["chosen"] == chosen and len(d["probabilities"]) == 3
    assert all(0 <= p["p"] <= 1 for p in d["probabilities"])


def test_low_margin_flag_on_three_way_tie():
    # each class wins exactly one pair: a cyclic vote
    X = np.zeros((6, 2))
    models = {}
    for (f, s), b in zip([(1, 2), (1, 3), (2, 3)], [1.0, -1.0, 1.0]):
        models[(f, s)] = LSSVMModel(b, np.zeros(2), 1.0, KernelSpec(), np.eye(2), (f, s))
    ens = AllPairEnsemble(models, 3, 2)
    _, trace = predict_all_pair(ens, [1.0, 0.0])
    assert sorted(trace.votes.votes) == [1, 2, 3] and trace.low_margin


def test_sampled_prediction_reproducible(trained):
    cfg = PredictConfig(probability_mode="sampled", selector="quantum")
    a = predict_all_pair(trained, [0.5, 0.5], cfg, seed=7)[1].to_dict()
    b = predict_all_pair(trained, [0.5, 0.5], cfg, seed=7)[1].to_dict()
    assert a == b


def test_query_dimension_checked(trained):
    with pytest.raises(ValueError, match="dimension"):
        predict_all_pair(trained, [1.0, 2.0, 3.0])


def test_pair_gamma_override(toy3):
    ens = train_all_pair(toy3, 1.0, pair_gammas={(1, 3): 5.0})
    assert ens.models[(1, 3)].gamma == 5.0 and ens.models[(1, 2)].gamma == 1.0


# ---- one against all ----

def test_one_vs_all_counts(toy3):
    ens = train_one_vs_all(toy3)
    assert len(ens.models) == 3 and ens.strategy == "one-vs-all"


def test_one_vs_all_binary_mirror():
    ds = gaussian_blobs(10, k=2, seed=8)
    ens = train_one_vs_all(ds)
    X = grid_points(30)
    m1, m2 = decision(ens.models[0], X), decision(ens.models[1], X)
    np.testing.assert_allclose(m1, -m2, atol=1e-10)


def test_one_vs_all_singleton_class():
    X = np.array([[1.0, 0.0], [1.1, 0.1], [0.0, 1.0], [-1.0, -1.0]])
    ens = train_one_vs_all(Dataset(X, np.array([1, 1, 2, 3]), 3))
    assert len(ens.models) == 3


def test_one_vs_all_classical_selector(toy3):
    ens = train_one_vs_all(toy3)
    x = np.array([1.9, 0.0])
    chosen, trace = predict_one_vs_all(ens, x)
    assert chosen == classical_argmax(trace.scores) + 1 == 1
    assert predict_one_vs_all(ens, x)[0] == chosen


@pytest.mark.parametrize("mult, floor", [(1.0, 0.5), (4.0, 0.9)])
def test_one_vs_all_quantum_selector(mult, floor):
    ds = gaussian_blobs(6, k=8, seed=2)
    ens = train_one_vs_all(ds, 0.05)
    cfg = PredictConfig(selector="quantum", budget_multiplier=mult)
    X = grid_points(20, seed=4)
    hits = 0
    for i, x in enumerate(X):
        chosen, trace = predict_one_vs_all(ens, x, cfg, seed=i)
        hits += chosen == classical_argmax(trace.scores) + 1
    assert hits / len(X) >= floor


def test_one_vs_all_equal_scores_seeded():
    models = [LSSVMModel(1.0, np.zeros(1), 1.0, KernelSpec(), np.ones((1, 2)), (c, 0))
              for c in (1, 2, 3)]
    from qallpair.multiclass import OneVsAllEnsemble
    ens = OneVsAllEnsemble(models, 3, 2)
    outs = [predict_one_vs_all(ens, [1.0, 0.0], QUANTUM, seed=s)[0] for s in range(10)]
    assert outs == [predict_one_vs_all(ens, [1.0, 0.0], QUANTUM, seed=s)[0] for s in range(10)]
    assert set(outs) <= {1, 2, 3}


# ---- evaluation ----

def test_evaluate_perfect(toy3, trained):
    ev = evaluate(trained, toy3)
    assert ev.accuracy == 1.0
    np.testing.assert_array_equal(ev.confusion, np.diag([2, 2, 2]))


def test_evaluate_majority_predictor():
    # pairs (1, s) always vote 1, so class 1 wins every query
    models = {p: LSSVMModel(5.0, np.zeros(1), 1.0, KernelSpec(), np.ones((1, 2)), p)
              for p in [(1, 2), (1, 3), (2, 3)]}
    ens = AllPairEnsemble(models, 3, 2)
    test = gaussian_blobs(20, seed=5)
    ev = evaluate(ens, test)
    assert ev.accuracy == pytest.approx(1 / 3)
    assert ev.confusion[:, 0].sum() == 60


def test_evaluate_errors(trained):
    with pytest.raises(ValueError, match="empty"):
        evaluate_arrays(trained, np.zeros((0, 2)), np.zeros(0, dtype=int))
    with pytest.raises(ValueError, match="dimension"):
        evaluate_arrays(trained, np.zeros((3, 4)), np.ones(3, dtype=int))


def test_evaluate_ledger_reproducible(trained):
    test = gaussian_blobs(5, seed=6)
    cfg = PredictConfig(probability_mode="sampled", shots=200, selector="quantum")
    a, b = evaluate(trained, test, cfg, seed=3), evaluate(trained, test, cfg, seed=3)
    assert a.ledger == b.ledger and a.ledger["measurement_shots"] > 0
    np.testing.assert_array_equal(a.predictions, b.predictions)


def test_predict_dispatch(toy3, trained):
    assert predict(trained, [1.8, 0.0])[0] == 1
    assert predict(train_one_vs_all(toy3), [1.8, 0.0])[0] == 1


def test_sub_rng_independent_of_call_order():
    a = sub_rng(5, 0, 2).random()
    sub_rng(5, 0, 1).random()
    assert sub_rng(5, 0, 2).random() == a


@pytest.mark.parametrize("kwargs", [dict(probability_mode="noisy"), dict(selector="vote"),
                                    dict(shots=0), dict(eps=0.0), dict(budget_multiplier=0.0)])
def test_predict_config_validation(kwargs):
    with pytest.raises(ValueError):
        PredictConfig(**kwargs)


def test_shot_count_from_eps():
    assert PredictConfig(eps=0.01).shot_count == 2500
    assert PredictConfig(shots=40).shot_count == 40
