import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmsarc import svm
from mmsarc.vector import Block, FeatureVector, LayoutMismatch

from oracles import svm_primal


def rows(X, name="x"):
    return [FeatureVector.of(Block.from_dense(name, r)) for r in np.atleast_2d(X)]


def random_problem(seed, n_max=20, d_max=5):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, n_max + 1))
    d = int(rng.integers(1, d_max + 1))
    X = rng.normal(size=(n, d))
    y = np.where(rng.random(n) < 0.5, 1, -1)
    y[:2] = (1, -1)
    return X, y, float(rng.choice([0.1, 1.0, 10.0]))


def test_one_dimensional_optimum():
    m = svm.train(rows([[1.0], [-1.0]]), [1, -1], svm.TrainConfig(C=1.0))
    assert m.w[0] == pytest.approx(1.0, abs=1e-3)
    assert m.b == pytest.approx(0.0, abs=1e-3)
    assert svm.predict(m, rows([[-3.0]])[0])[0] == -1


def test_separable_four_points():
    X = [[2.0, 1.0], [1.0, 2.0], [-1.0, -2.0], [-2.0, -1.0]]
    y = [1, 1, -1, -1]
    m = svm.train(rows(X), y)
    pred, _ = svm.predict_many(m, rows(X))
    assert pred.tolist() == y


def test_deterministic():
    X, y, C = random_problem(5)
    a = svm.train(rows(X), y, svm.TrainConfig(C=C, seed=3))
    b = svm.train(rows(X), y, svm.TrainConfig(C=C, seed=3))
    assert a.w.tobytes() == b.w.tobytes() and a.b == b.b


@pytest.mark.parametrize("seed", range(10))
def test_dual_feasible_every_epoch(seed):
    X, y, C = random_problem(seed)
    seen = []

    def check(epoch, alpha, w):
        seen.append(epoch)
        assert np.all(alpha >= 0.0) and np.all(alpha <= C)

    svm.train(rows(X), y, svm.TrainConfig(C=C, tol=1e-8, max_epochs=200), callback=check)
    assert seen


@pytest.mark.parametrize("seed", range(10))
def test_dual_ascent_and_weak_duality(seed):
    X, y, C = random_problem(seed)
    m = svm.train(rows(X), y, svm.TrainConfig(C=C, tol=1e-9, max_epochs=5000), track_objective=True)
    primal = np.array([p for p, _ in m.history])
    dual = np.array([d for _, d in m.history])
    assert np.all(np.diff(dual) >= -1e-9 * np.maximum(1.0, np.abs(dual[1:])))
    assert np.all(primal >= dual - 1e-9)
    # converged: the duality gap closes
    assert primal[-1] - dual[-1] <= 1e-4 * max(1.0, abs(primal[-1]))


def test_history_matches_independent_objective():
    X, y, C = random_problem(11)
    m = svm.train(rows(X), y, svm.TrainConfig(C=C, tol=1e-9, max_epochs=5000), track_objective=True)
    assert m.history[-1][0] == pytest.approx(svm_primal(m.w, m.b, X, y, C), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(1e-3, 1e3))
def test_prediction_scale_invariant(seed, k):
    X, y, C = random_problem(seed)
    m = svm.train(rows(X), y, svm.TrainConfig(C=C))
    scaled = svm.SvmModel(m.w * k, m.b * k, m.C, m.feature_layout)
    test = rows(np.random.default_rng(seed).normal(size=(10, X.shape[1])))
    assert svm.predict_many(m, test)[0].tolist() == svm.predict_many(scaled, test)[0].tolist()


def test_predict_examples():
    m = svm.SvmModel(np.array([1.0, 0.0]), 0.0, 1.0, {"x": (0, 2)})
    assert svm.predict(m, rows([[2.0, 5.0]])[0]) == (1, 2.0)
    assert svm.predict(m, rows([[0.0, 5.0]])[0])[0] == 1


def test_predict_layout_mismatch():
    m = svm.SvmModel(np.array([1.0, 0.0]), 0.0, 1.0, {"x": (0, 2)})
    with pytest.raises(LayoutMismatch):
        svm.predict(m, rows([[2.0, 5.0]], name="other")[0])


def test_degenerate_labels():
    with pytest.raises(svm.DegenerateLabels):
        svm.train(rows([[1.0], [2.0]]), [1, 1])


def test_bad_config():
    with pytest.raises(ValueError):
        svm.TrainConfig(C=0.0)
    with pytest.raises(ValueError):
        svm.TrainConfig(tol=0.0)


@pytest.mark.parametrize("scale", [False, True])
def test_round_trip_lossless(tmp_path, scale):
    X, y, C = random_problem(7)
    fv = [FeatureVector.of(Block.from_dense("a", r[:1]), Block.onehot("b", 3, [i % 3])) for i, r in enumerate(X)]
    m = svm.train(fv, y, svm.TrainConfig(C=C, scale_features=scale))
    svm.save_model(m, tmp_path / "m.svm")
    back = svm.load_model(tmp_path / "m.svm")
    assert back.w.tobytes() == m.w.tobytes() and back.b == m.b and back.C == m.C
    assert back.feature_layout == m.feature_layout
    assert (back.scale is None) == (m.scale is None)
    assert svm.predict_many(back, fv)[1].tobytes() == svm.predict_many(m, fv)[1].tobytes()


def test_sparse_and_dense_agree():
    X, y, C = random_problem(3)
    Xs = np.where(np.abs(X) < 0.5, 0.0, X)
    dense = svm.train(rows(Xs), y, svm.TrainConfig(C=C))
    sparse_rows = []
    for r in Xs:
        nz = np.flatnonzero(r)
        sparse_rows.append(FeatureVector.of(Block("x", len(r), indices=nz, values=r[nz])))
    sparse = svm.train(sparse_rows, y, svm.TrainConfig(C=C))
    assert sparse.w.tobytes() == dense.w.tobytes()
