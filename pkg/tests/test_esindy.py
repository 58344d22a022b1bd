import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bindy.cases import LEGENDRE_SMALL_TERMS, LEGENDRE_ZERO_TERMS, LegendreSetup, legendre_data
from bindy.errors import ConfigError, InputError, NumericalError
from bindy.esindy import (
    EnsembleConfig,
    StlsqConfig,
    ensemble_inclusion_stats,
    ensemble_sindy,
    stlsq,
)


def _replay(X, y, threshold, sweeps):
    # straightforward reference: plain lstsq on the active columns each sweep
    D = X.shape[1]
    active = np.ones(D, dtype=bool)
    coef = np.zeros(D)
    for _ in range(sweeps):
        coef = np.zeros(D)
        if active.any():
            coef[active] = np.linalg.lstsq(X[:, active], y, rcond=None)[0]
        new = np.abs(coef) >= threshold
        coef[~new] = 0.0
        if np.array_equal(new, active):
            break
        active = new
    return coef


@pytest.fixture
def problem(rng):
    X = rng.standard_normal((200, 6))
    true = np.array([1.5, 0.0, -0.8, 0.05, 0.0, 2.0])
    return X, X @ true + 0.01 * rng.standard_normal(200), true


def test_zero_threshold_is_least_squares(problem):
    X, y, _ = problem
    ols = np.linalg.lstsq(X, y, rcond=None)[0]
    np.testing.assert_allclose(stlsq(X, y, StlsqConfig(0.0, ridge=0.0)), ols, rtol=1e-10)


def test_replay_oracle(problem):
    X, y, true = problem
    got = stlsq(X, y, StlsqConfig(0.1, ridge=0.0))
    np.testing.assert_allclose(got, _replay(X, y, 0.1, 20), rtol=1e-10, atol=1e-12)
    assert np.array_equal(got != 0, np.abs(true) >= 0.1)


def test_large_threshold_gives_zero(problem):
    X, y, _ = problem
    assert np.all(stlsq(X, y, StlsqConfig(100.0)) == 0)


def test_support_shrinks_with_sweeps(rng):
    X = rng.standard_normal((40, 10))
    y = X @ rng.uniform(-0.3, 0.3, 10) + 0.3 * rng.standard_normal(40)
    supports = [stlsq(X, y, StlsqConfig(0.15, max_sweeps=k)) != 0 for k in range(1, 8)]
    for a, b in zip(supports, supports[1:]):
        assert not np.any(b & ~a)


@settings(max_examples=20, deadline=None)
@given(st.permutations(list(range(6))))
def test_column_permutation_invariance(perm):
    rng = np.random.default_rng(3)
    X = rng.standard_normal((80, 6))
    y = X @ np.array([1.0, 0.0, 0.3, -0.5, 0.0, 0.02]) + 0.05 * rng.standard_normal(80)
    perm = np.array(perm)
    base = stlsq(X, y, StlsqConfig(0.1))
    np.testing.assert_allclose(stlsq(X[:, perm], y, StlsqConfig(0.1)), base[perm], rtol=1e-9, atol=1e-12)


def test_singular_without_ridge(rng):
    x = rng.standard_normal(30)
    X = np.column_stack([x, x, rng.standard_normal(30)])
    with pytest.raises(NumericalError):
        stlsq(X, x, StlsqConfig(0.05, ridge=0.0))
    assert np.all(np.isfinite(stlsq(X, x, StlsqConfig(0.05, ridge=1e-5))))


def test_input_and_config_errors():
    with pytest.raises(InputError):
        stlsq(np.zeros((3, 2)), np.zeros(4))
    with pytest.raises(ConfigError):
        StlsqConfig(threshold=-1)
    with pytest.raises(ConfigError):
        EnsembleConfig(n_models=0)
    with pytest.raises(ConfigError):
        ensemble_sindy(np.ones((5, 1)), np.ones(5), StlsqConfig(), EnsembleConfig(3), np.random.default_rng(0))


def test_legendre_small_terms_removed():
    data = legendre_data(LegendreSetup(n_points=5000), np.random.default_rng(1))
    coef = stlsq(data.library.design, data.targets, StlsqConfig(0.1))
    for j in LEGENDRE_ZERO_TERMS + LEGENDRE_SMALL_TERMS:
        assert coef[j] == 0
    for j in (0, 2, 3, 4):
        assert coef[j] == pytest.approx(data.coefficients[j], abs=0.02)


def test_ensemble_reproducible(problem):
    X, y, _ = problem
    cfg = EnsembleConfig(50)
    a = ensemble_sindy(X, y, StlsqConfig(0.1), cfg, np.random.default_rng(4))
    b = ensemble_sindy(X, y, StlsqConfig(0.1), cfg, np.random.default_rng(4))
    np.testing.assert_array_equal(a.coefs, b.coefs)
    assert a.coefs.shape == (50, 6) and not a.failed.any()


def test_single_member_without_bagging_is_stlsq(problem):
    X, y, _ = problem
    cfg = EnsembleConfig(1, data_bagging=False, library_bagging=False)
    ens = ensemble_sindy(X, y, StlsqConfig(0.1), cfg, np.random.default_rng(0))
    np.testing.assert_allclose(ens.coefs[0], stlsq(X, y, StlsqConfig(0.1)), rtol=1e-12)


def test_multi_target_members_share_resampling(problem):
    X, y, _ = problem
    Y = np.column_stack([y, 2 * y])
    ens = ensemble_sindy(X, Y, StlsqConfig(0.0), EnsembleConfig(20), np.random.default_rng(9))
    assert ens.coefs.shape == (20, 2, 6)
    np.testing.assert_allclose(ens.for_target(1), 2 * ens.for_target(0), rtol=1e-8, atol=1e-10)
    # a dropped column is zero in both targets
    np.testing.assert_array_equal(ens.coefs[:, 0] == 0, ens.coefs[:, 1] == 0)


def test_inclusion_stats():
    members = np.array([[1.0, 0.0], [3.0, 0.0], [0.0, 2.0], [2.0, 0.0]])
    st_ = ensemble_inclusion_stats(members)
    np.testing.assert_allclose(st_.frequency, [0.75, 0.25])
    np.testing.assert_allclose(st_.mean, [1.5, 0.5])
    np.testing.assert_allclose(st_.std, [np.std([1, 3, 0, 2]), np.std([0, 0, 2, 0])])
    with pytest.raises(InputError):
        ensemble_inclusion_stats(np.zeros((0, 3)))
