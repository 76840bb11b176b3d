import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sirhawkes import predict as P
from sirhawkes.fit import FitResult
from sirhawkes.kernels import KernelSpec
from sirhawkes.likelihood import HawkesNParams
from sirhawkes.cascades import Cascade


def test_predict_size_example():
    assert P.predict_size(0.5, 100, 400.0) == 250.0
    with pytest.raises(ValueError):
        P.predict_size(0.5, 0, 10.0)


def test_are_examples():
    assert P.are(250.0, 200) == pytest.approx(0.25)
    assert P.are(100.0, 200) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        P.are(1.0, 0)


def test_combine():
    assert P.combine_predictions([100.0, 300.0]) == 200.0
    with pytest.raises(ValueError):
        P.combine_predictions([1.0])


@given(st.integers(1, 500), st.integers(0, 500), st.floats(1.0, 2000.0))
def test_sigma_target_inverts_prediction(C_t, extra, slack):
    C_inf = C_t + extra
    N_hat = C_t + max(slack, 1.0)
    s = float(P.sigma_target(C_inf, C_t, N_hat))
    if s < P.SIGMA_CAP:
        assert P.predict_size(s, C_t, N_hat) == pytest.approx(C_inf, rel=1e-12)


def test_sigma_target_guards():
    # N_hat barely above C_t: denominator floored at 1, then capped
    assert P.sigma_target(300, 100, 100.5) == P.SIGMA_CAP
    assert P.sigma_target(105, 100, 100.5) == pytest.approx(5.0)


def test_stump_matches_hand_computation():
    X = np.array([[0.0]] * 6 + [[1.0]] * 6)
    y = np.array([1.0] * 6 + [3.0] * 6)
    m = P.fit_gbm(X, y, P.GbmConfig(rounds=1, learning_rate=1.0, depth=1, min_leaf=5))
    np.testing.assert_allclose(m.predict([[0.0], [1.0]]), [1.0, 3.0], rtol=1e-14)
    assert m.trees[0].threshold == 0.5


def test_min_leaf_blocks_small_splits():
    X = np.arange(8.0)[:, None]
    y = np.array([0, 0, 0, 0, 0, 0, 0, 10.0])
    m = P.fit_gbm(X, y, P.GbmConfig(rounds=1, learning_rate=1.0, depth=1, min_leaf=5))
    assert np.all(m.predict(X) == pytest.approx(y.mean()))


def test_constant_target():
    X = np.random.default_rng(0).normal(size=(30, 3))
    m = P.fit_gbm(X, np.full(30, 0.25))
    assert m.trees == [] and np.all(m.predict(X) == 0.25)


def test_boosting_reduces_training_error(rng):
    X = rng.uniform(0, 1, (200, 2))
    y = np.sin(6 * X[:, 0]) + X[:, 1] ** 2
    short = P.fit_gbm(X, y, P.GbmConfig(rounds=5))
    long = P.fit_gbm(X, y, P.GbmConfig(rounds=200))
    assert np.mean((long.predict(X) - y) ** 2) < np.mean((short.predict(X) - y) ** 2)


def test_fold_assignment():
    f = P.fold_assignment(95, 10, seed=3)
    np.testing.assert_array_equal(np.bincount(f), [10] * 5 + [9] * 5)
    np.testing.assert_array_equal(f, P.fold_assignment(95, 10, seed=3))
    assert not np.array_equal(f, P.fold_assignment(95, 10, seed=4))


def synthetic_rows(rng, n):
    X = rng.uniform(0, 1, (n, 3))
    C_t = rng.integers(20, 60, n).astype(float)
    N_hat = C_t + 200.0
    sigma = 0.1 + 0.8 * X[:, 0]
    C_inf = np.round(C_t + sigma * (N_hat - C_t))
    return X, C_t, N_hat, C_inf


def test_cross_validation_learns_signal_and_is_deterministic(rng):
    X, C_t, N_hat, C_inf = synthetic_rows(rng, 200)
    res = P.cross_validate(X, C_t, N_hat, C_inf)
    again = P.cross_validate(X, C_t, N_hat, C_inf)
    np.testing.assert_array_equal(res.C_inf_hat, again.C_inf_hat)
    assert np.median(res.are) < 0.1
    assert np.median(res.are) < np.median(P.baseline_are(C_t, C_inf))
    assert len(res.fold_are) == 10


def test_shuffled_targets_lose_the_signal(rng):
    X, C_t, N_hat, C_inf = synthetic_rows(rng, 200)
    true = np.median(P.cross_validate(X, C_t, N_hat, C_inf).are)
    perm = rng.permutation(len(X))
    shuffled = np.median(P.cross_validate(X[perm], C_t, N_hat, C_inf).are)
    assert shuffled > 2 * true


def test_cv_rejects_bad_rotation():
    X = np.zeros((40, 1))
    with pytest.raises(ValueError):
        P.cross_validate(X, np.ones(40), np.ones(40) * 5, np.ones(40), P.CvConfig(train_folds=10))


def test_training_needs_twenty_rows():
    with pytest.raises(ValueError):
        P.train_sigma(np.zeros((19, 2)), np.ones(19), np.ones(19) * 5, np.ones(19))


def fitted(kappa=2.0, theta=0.5, N=300.0, rho=0.0, family="exp"):
    spec = KernelSpec(family, kappa, theta, 2.0 if family == "powerlaw" else None)
    return FitResult("M", HawkesNParams(spec, N, rho), 10.0, True, [], 5, ["x"])


def test_extract_features_exp():
    c = Cascade.from_times([0.0, 10.0, 20.0, 5000.0], None, "x")
    row = P.extract_features(fitted(), c, 3600.0)
    assert row.names == ("beta", "gamma", "rho", "N", "n_star")
    np.testing.assert_allclose(row.values, [1.0, 0.5, 0.0, 300.0, 2.0])
    assert row.C_t == 3


def test_extract_features_powerlaw_names():
    assert P.feature_names("powerlaw") == ("beta", "theta", "c", "rho", "N", "n_star")


def test_extract_features_drops_divergent_fit():
    c = Cascade.from_times([0.0, 1.0, 2.0])
    with pytest.warns(UserWarning):
        assert P.extract_features(fitted(rho=1.5), c, 10.0) is None


def test_feature_matrix_shape():
    c = Cascade.from_times([0.0, 1.0, 2.0])
    rows = [P.extract_features(fitted(kappa=k), c, 5.0) for k in (1.0, 2.0, 3.0)]
    assert P.feature_matrix(rows).shape == (3, 5)
    assert math.isclose(P.feature_matrix(rows)[2, 4], 3.0)
