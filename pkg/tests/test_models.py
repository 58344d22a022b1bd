from math import comb

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from bindy.errors import ConfigError, InputError
from bindy.models import (
    FlatPrior,
    GeometricPrior,
    ModelIndex,
    PerTermPrior,
    enumerate_models,
    log_model_prior,
    model_prior_from_config,
    propose_bitflip,
)


def test_mask_basics():
    m = ModelIndex.from_indices([0, 3, 4], 6)
    assert m.d == 3
    assert list(m.indices) == [0, 3, 4]
    assert 3 in m and 1 not in m
    assert m.hex == "19"
    assert ModelIndex.from_hex("19", 6) == m
    assert ModelIndex.from_bools(m.bools()) == m
    assert m.flip(1).d == 4 and m.flip(0).d == 2


def test_mask_too_wide():
    with pytest.raises(InputError):
        ModelIndex(1 << 5, 5)


def test_flat_prior_constant():
    assert log_model_prior(FlatPrior(), ModelIndex.full(7)) == 0.0
    assert FlatPrior().log_prob(ModelIndex.empty(7)) == 0.0


def test_geometric_log_ratio():
    p = GeometricPrior(0.99)
    m4 = ModelIndex.full(7).flip(0).flip(1).flip(2)
    small, large = ModelIndex((1 << 7) - 1, 10), ModelIndex((1 << 8) - 1, 10)
    assert small.d == 7 and large.d == 8
    ratio = p.log_prob(small) - p.log_prob(large)
    assert ratio == pytest.approx(-np.log(1 - 0.99), rel=1e-12)
    assert ratio == pytest.approx(4.605, abs=1e-3)
    assert p.log_prob(m4) == pytest.approx(4 * np.log(0.01) + np.log(0.99))


@given(st.integers(0, 2**10 - 1), st.integers(0, 9), st.floats(0.01, 0.99))
def test_geometric_neighbour_ratio(mask, i, theta):
    p = GeometricPrior(theta)
    m = ModelIndex(mask, 10)
    diff = p.log_prob(m.flip(i)) - p.log_prob(m)
    assert abs(abs(diff) - abs(np.log(1 - theta))) < 1e-12


def test_per_term_half_is_flat():
    p = PerTermPrior(np.full(5, 0.5))
    vals = {p.log_prob(m) for m in enumerate_models(5)}
    assert len(vals) == 1


def test_per_term_factorizes():
    probs = np.array([0.2, 0.7, 0.5])
    p = PerTermPrior(probs)
    total = sum(np.exp(p.log_prob(m)) for m in enumerate_models(3))
    assert total == pytest.approx(1.0)
    m = ModelIndex.from_indices([1], 3)
    assert np.exp(p.log_prob(m)) == pytest.approx(0.8 * 0.7 * 0.5)


@pytest.mark.parametrize("bad", [0.0, 1.0, 1.5])
def test_prior_parameters_validated(bad):
    with pytest.raises(ConfigError):
        GeometricPrior(bad)
    with pytest.raises(ConfigError):
        PerTermPrior([0.5, bad])


def test_prior_from_config():
    assert isinstance(model_prior_from_config("flat"), FlatPrior)
    assert model_prior_from_config({"geometric": 0.99}).theta == 0.99
    assert isinstance(model_prior_from_config({"per_term": [0.3, 0.4]}), PerTermPrior)
    with pytest.raises(ConfigError):
        model_prior_from_config({"laplace": 1})


def test_bitflip_full_and_empty(rng):
    for _ in range(200):
        m, log_j = propose_bitflip(ModelIndex.full(10), rng)
        assert m.d == 9 and log_j == 0.0
        assert propose_bitflip(ModelIndex.empty(10), rng)[0].d == 1


def test_bitflip_uniform(rng):
    D = 10
    m = ModelIndex.from_indices([1, 4, 5], D)
    counts = np.zeros(D)
    for _ in range(100_000):
        new, _ = propose_bitflip(m, rng)
        counts[int(np.log2(new.mask ^ m.mask))] += 1
    assert stats.chisquare(counts).pvalue > 1e-3


def test_bitflip_symmetric_neighbourhood(rng):
    m = ModelIndex.from_indices([2], 4)
    for _ in range(50):
        new, _ = propose_bitflip(m, rng)
        assert bin(new.mask ^ m.mask).count("1") == 1
        assert any(new.flip(i) == m for i in range(4))


def test_enumeration():
    assert [m.mask for m in enumerate_models(2)] == [0, 1, 2, 3]
    assert sum(1 for _ in enumerate_models(10)) == 1024
    with pytest.raises(InputError):
        next(enumerate_models(21))


def test_prior_sampling_frequencies(rng):
    p = GeometricPrior(0.5)
    sizes = np.array([p.sample(6, rng).d for _ in range(20_000)])
    # exact distribution of d under p(m) proportional to (1-theta)^d over all masks
    w = np.array([comb(6, d) * 0.5**d for d in range(7)])
    w /= w.sum()
    obs = np.bincount(sizes, minlength=7)
    assert stats.chisquare(obs, w * obs.sum()).pvalue > 1e-3
