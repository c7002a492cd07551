import numpy as np
import pytest
from oracles import central_gradient

from ucreduce import lr
from ucreduce.datagen import Sample
from ucreduce.errors import DimensionMismatch, ShapeMismatch
from ucreduce.grid import DemandProfile


def _draw(rng):
    m, d = int(rng.integers(5, 30)), int(rng.integers(1, 8))
    X = rng.normal(size=(m, d))
    y = rng.integers(0, 2, size=m)
    return rng.normal(size=d), float(rng.normal()), X, y, float(rng.uniform(0.1, 5.0))


@pytest.mark.parametrize("seed", range(20))
def test_gradient_matches_central_differences(seed):
    w, c, X, y, C = _draw(np.random.default_rng(seed))
    gw, gc = lr.logistic_grad(w, c, X, y, C)
    z0 = np.append(w, c)
    fd = central_gradient(lambda z: lr.logistic_loss(z[:-1], z[-1], X, y, C), z0, h=1e-5)
    analytic = np.append(gw, gc)
    assert np.linalg.norm(analytic - fd) <= 1e-6 * np.linalg.norm(fd)


def test_gradient_at_origin():
    rng = np.random.default_rng(3)
    X, y, C = rng.normal(size=(12, 4)), rng.integers(0, 2, size=12), 0.7
    s = 2.0 * y - 1.0
    gw, gc = lr.logistic_grad(np.zeros(4), 0.0, X, y, C)
    assert np.allclose(gw, -(C / 2) * (s @ X))
    assert gc == pytest.approx(-(C / 2) * s.sum())


@pytest.mark.parametrize("seed", range(8))
def test_loss_history_non_increasing_and_converged(seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, size=(40, 6))
    y = (X @ rng.normal(size=6) + 0.3 * rng.normal(size=40) > 0).astype(int)
    if len(set(y)) < 2:
        y[0] = 1 - y[0]
    model = lr.train_target(X, y, C=1.0)
    hist = np.array(model.loss_history)
    assert np.all(np.diff(hist) <= 1e-12)
    assert hist[-1] == pytest.approx(lr.logistic_loss(model.weights, model.intercept, X, y, 1.0), rel=1e-9)
    gw, gc = lr.logistic_grad(model.weights, model.intercept, X, y, 1.0)
    assert max(np.max(np.abs(gw)), abs(gc)) <= 1e-6 or model.n_iter == 1000


def test_separable_ordering():
    model = lr.train_target([[0.0], [1.0]], [0, 1], C=100.0)
    p = model.predict_proba([[0.0], [1.0]])
    assert p[0] < 0.5 < p[1]


@pytest.mark.parametrize("label", [0, 1])
def test_single_class_is_constant(label):
    model = lr.train_target(np.ones((3, 2)), [label] * 3)
    assert model.constant_class == label
    assert np.all(model.predict_proba(np.random.default_rng(0).normal(size=(4, 2))) == float(label))


def test_training_deterministic():
    rng = np.random.default_rng(8)
    X, y = rng.uniform(size=(30, 5)), rng.integers(0, 2, size=30)
    a, b = lr.train_target(X, y), lr.train_target(X, y)
    assert np.array_equal(a.weights, b.weights) and a.intercept == b.intercept


def test_label_validation():
    with pytest.raises(ValueError):
        lr.train_target(np.ones((2, 1)), [0, 2])
    with pytest.raises(ShapeMismatch):
        lr.train_target(np.ones((2, 1)), [0, 1, 1])


def test_featurize_conventions():
    lo = DemandProfile([[1.0, 2.0], [5.0, 5.0]])
    hi = DemandProfile([[3.0, 4.0], [5.0, 5.0]])
    scaler = lr.FeatureScaler.fit([lo, hi])
    assert np.array_equal(lr.featurize(lo, scaler), [0, 0, 0, 0])
    assert np.array_equal(lr.featurize(hi, scaler), [1, 1, 0, 0])
    # unseen values extrapolate, constant features stay 0
    out = lr.featurize(DemandProfile([[5.0, 0.0], [9.0, 1.0]]), scaler)
    assert np.array_equal(out, [2.0, -1.0, 0.0, 0.0])
    with pytest.raises(DimensionMismatch):
        lr.featurize(DemandProfile([[1.0]]), scaler)


def test_accuracy_arithmetic():
    truth = np.array([[[1, 0], [0, 1]]])
    assert lr.accuracy(truth, truth) == 1.0
    one_off = truth.copy()
    one_off[0, 1, 1] = 0
    assert lr.accuracy(one_off, truth) == 0.75
    assert lr.accuracy(1 - truth, truth) == 0.0
    with pytest.raises(ShapeMismatch):
        lr.accuracy(truth, truth[:, :1])


def test_accuracy_symmetric_and_order_invariant():
    rng = np.random.default_rng(2)
    a, b = rng.integers(0, 2, size=(7, 3, 4)), rng.integers(0, 2, size=(7, 3, 4))
    perm = rng.permutation(7)
    assert lr.accuracy(a, b) == lr.accuracy(b, a) == lr.accuracy(a[perm], b[perm])


def test_classify_threshold_monotone():
    probs = np.random.default_rng(4).uniform(size=(5, 3, 6))
    counts = [lr.classify(probs, th).sum() for th in np.linspace(0, 1, 21)]
    assert counts == sorted(counts, reverse=True)
    assert np.array_equal(lr.classify(probs, 0.5), (probs >= 0.5).astype(np.int8))


def _samples(n, rng, always_on=True):
    out = []
    for i in range(n):
        d = rng.uniform(10, 20, size=(2, 3))
        u = np.zeros((2, 3), dtype=np.int8)
        u[0] = 1 if always_on else (d[0] > 15)
        u[1] = d[1] > 15
        out.append(Sample(i, DemandProfile(d), u, 0.0, 0.0))
    return out


def test_ensemble_shapes_and_constant_rows():
    samples = _samples(30, np.random.default_rng(0))
    ens = lr.train_ensemble(samples, lr.LrConfig(C=10.0))
    assert ens.shape == (2, 3)
    assert all(m.constant_class == 1 for m in ens.models[0])
    probs = ens.predict_proba([s.demand for s in samples])
    assert probs.shape == (30, 2, 3) and np.all((probs >= 0) & (probs <= 1))
    pred = ens.predict(samples[0].demand)
    assert np.array_equal(pred.classified, lr.classify(pred.probabilities, ens.threshold))
    truth = np.array([s.commitment for s in samples])
    assert lr.accuracy(lr.classify(probs, 0.5), truth) > 0.9


def test_ensemble_deterministic():
    samples = _samples(20, np.random.default_rng(1), always_on=False)
    a, b = lr.train_ensemble(samples), lr.train_ensemble(samples)
    assert lr.ensemble_to_dict(a) == lr.ensemble_to_dict(b)


def test_tune_threshold_tie_breaks_high():
    class Fixed:
        config = lr.LrConfig()

        def predict_proba(self, demands):
            return np.full((len(demands), 1, 1), 0.9)

    samples = [Sample(i, DemandProfile([[1.0]]), np.ones((1, 1), dtype=np.int8), 0, 0) for i in range(3)]
    assert lr.tune_threshold(Fixed(), samples, lr.DEFAULT_GRID) == 0.8
    assert lr.tune_threshold(Fixed(), samples, [0.5]) == 0.5
    assert lr.tune_threshold(Fixed(), samples, [0.85, 0.9, 0.95]) == 0.9


def test_default_grid():
    assert lr.DEFAULT_GRID[0] == 0.2 and lr.DEFAULT_GRID[-1] == 0.8 and len(lr.DEFAULT_GRID) == 13


def test_model_round_trip(tmp_path):
    samples = _samples(25, np.random.default_rng(5), always_on=False)
    ens = lr.train_ensemble(samples, system_hash="abc").with_threshold(0.35)
    lr.save_ensemble(ens, tmp_path / "a.json")
    back = lr.load_ensemble(tmp_path / "a.json")
    lr.save_ensemble(back, tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    demands = [s.demand for s in samples]
    assert np.array_equal(back.predict_proba(demands), ens.predict_proba(demands))
    assert back.threshold == 0.35 and back.system_hash == "abc"
