import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iot_energy import svr
from iot_energy.preprocess import WindowedDataset
from iot_energy.svr import (
    ConvergenceWarning,
    SvrConfig,
    SvrModel,
    kkt_violations,
    predict_many,
    predict_svr,
    rbf_kernel,
    train_svr,
)


def dataset(x, y):
    x = np.asarray(x, float)
    return WindowedDataset(x.shape[1], x, y, np.arange(len(y)))


def noisy_problem(n=300, d=5, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 1, (n, d))
    y = 0.5 + 0.3 * np.sin(3 * x.sum(1)) + rng.normal(0, 0.02, n)
    return dataset(x, y)


def test_rbf_examples():
    x = np.array([0.3, -1.2, 4.0])
    assert rbf_kernel(x, x, 0.7) == 1.0
    assert rbf_kernel([0.0], [1.0], 1.0) == pytest.approx(math.exp(-1), abs=1e-15)
    assert rbf_kernel([0.0], [1.0], 1.0) == pytest.approx(0.367879, abs=1e-6)
    assert rbf_kernel([0, 5], [3, -2], 1e-12) == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ValueError):
        rbf_kernel([1, 2], [1], 1.0)


@settings(max_examples=100)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=6).flatmap(
    lambda a: st.tuples(st.just(a), st.lists(st.floats(-5, 5), min_size=len(a), max_size=len(a)))),
    st.floats(1e-3, 10))
def test_rbf_symmetric_and_bounded(pair, gamma):
    a, b = pair
    k = rbf_kernel(a, b, gamma)
    assert k == rbf_kernel(b, a, gamma)
    assert 0 <= k <= 1


def test_predict_constant_and_single_vector():
    m = SvrModel(np.zeros((0, 3)), [], 0.42, 1.0, metadata={"lookback": 3})
    assert predict_svr(m, [1, 2, 3]) == 0.42
    s = np.array([0.2, 0.4, 0.1])
    m = SvrModel(s[None, :], [0.75], 0.0, 2.0, metadata={"lookback": 3})
    assert predict_svr(m, s) == pytest.approx(0.75, abs=1e-15)
    with pytest.raises(ValueError):
        predict_svr(m, [1.0, 2.0])


def test_predict_matches_direct_sum():
    rng = np.random.default_rng(4)
    sv = rng.uniform(size=(3, 4))
    coef = rng.normal(size=3)
    m = SvrModel(sv, coef, 0.1, 0.5, metadata={"lookback": 4})
    for q in rng.uniform(size=(10, 4)):
        brute = sum(coef[k] * math.exp(-0.5 * sum((sv[k][j] - q[j]) ** 2 for j in range(4)))
                    for k in range(3)) + 0.1
        assert predict_svr(m, q) == pytest.approx(brute, abs=1e-12)


def test_constant_targets_give_bias_only_model():
    rng = np.random.default_rng(0)
    ds = dataset(rng.uniform(size=(50, 4)), np.full(50, 0.3))
    m = train_svr(SvrConfig(lookback=4, epsilon=0.1), ds)
    assert len(m) == 0 and m.converged
    assert m.bias == pytest.approx(0.3, abs=1e-12)
    assert np.all(np.abs(predict_many(m, rng.uniform(size=(20, 4))) - 0.3) <= 0.1)


def test_linear_ramp_within_epsilon():
    # windows are ramp segments a, a+s, ...; target continues the ramp
    rng = np.random.default_rng(1)
    lookback, slope = 6, 0.02
    starts = rng.uniform(0, 0.8, 400)
    x = starts[:, None] + slope * np.arange(lookback)
    y = starts + slope * lookback
    order = rng.permutation(400)
    train, test = order[:320], order[320:]
    cfg = SvrConfig(lookback=lookback, epsilon=0.005, c=100, tolerance=1e-5)
    m = train_svr(cfg, dataset(x[train], y[train]))
    assert np.mean(np.abs(predict_many(m, x[test]) - y[test])) < cfg.epsilon


@pytest.fixture(scope="module")
def trained():
    ds = noisy_problem()
    cfg = SvrConfig(lookback=5, c=5.0, epsilon=0.02, tolerance=1e-4)
    return cfg, ds, train_svr(cfg, ds)


def test_dual_feasibility_and_kkt(trained):
    cfg, ds, m = trained
    assert m.converged
    assert np.all(np.abs(m.dual_coefficients) <= cfg.c + 1e-9)
    assert np.all(m.dual_coefficients != 0)
    assert m.dual_coefficients.sum() == pytest.approx(0.0, abs=1e-9)
    assert kkt_violations(m, cfg, ds).max() <= cfg.tolerance


def test_prediction_bound(trained):
    _, _, m = trained
    bound = np.abs(m.dual_coefficients).sum() + abs(m.bias)
    q = np.random.default_rng(9).uniform(-3, 3, (200, 5))
    assert np.all(np.abs(predict_many(m, q)) <= bound)


def test_matches_libsvm(trained):
    sklearn_svm = pytest.importorskip("sklearn.svm")
    cfg, ds, m = trained
    ref = sklearn_svm.SVR(C=cfg.c, epsilon=cfg.epsilon, gamma=cfg.kernel_gamma, tol=1e-6)
    ref.fit(ds.inputs, ds.targets)
    q = np.random.default_rng(3).uniform(size=(50, 5))
    np.testing.assert_allclose(predict_many(m, q), ref.predict(q), atol=5e-3)


def test_non_convergence_warns():
    ds = noisy_problem(n=200, seed=2)
    cfg = SvrConfig(lookback=5, c=100, epsilon=0.001, tolerance=1e-12, max_passes=1)
    with pytest.warns(ConvergenceWarning):
        m = train_svr(cfg, ds)
    assert not m.converged
    assert np.all(np.isfinite(predict_many(m, ds)))


def test_subsample_cap_uses_most_recent_rows():
    ds = noisy_problem(n=120)
    m = train_svr(SvrConfig(lookback=5, max_train_rows=50), ds)
    assert m.metadata["train_rows"] == 50
    recent = {r.tobytes() for r in ds.inputs[-50:]}
    assert all(r.tobytes() in recent for r in m.support_vectors)


def test_small_cache_gives_same_model(trained):
    cfg, ds, m = trained
    from dataclasses import replace
    m2 = train_svr(replace(cfg, cache_mb=0.001), ds)
    np.testing.assert_allclose(m2.dual_coefficients, m.dual_coefficients, atol=1e-12)


def test_errors():
    with pytest.raises(ValueError, match="empty"):
        train_svr(SvrConfig(lookback=2), dataset(np.zeros((0, 2)), []))
    with pytest.raises(ValueError):
        SvrConfig(epsilon=1.5)
    with pytest.raises(ValueError):
        SvrConfig(c=0)


def test_model_file_roundtrip(tmp_path, trained):
    cfg, ds, m = trained
    svr.save_model(m, cfg, tmp_path / "svr.json")
    m2, cfg2 = svr.load_model(tmp_path / "svr.json")
    assert cfg2 == cfg and m2.converged == m.converged
    np.testing.assert_array_equal(predict_many(m2, ds), predict_many(m, ds))
