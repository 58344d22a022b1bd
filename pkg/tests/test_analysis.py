import numpy as np
import pytest

from bindy.analysis import (
    SweepSettings,
    batch_means_se,
    empirical_model_distribution,
    exact_model_posterior,
    inclusion_from_distribution,
    model_frequencies,
    model_probability,
    parameterization_sweep,
    robustness_sweep,
    split_shift,
    summarize_chain,
    total_variation,
    trace_report,
    trajectory_mse_stats,
)
from bindy.bayes import ParamPrior
from bindy.cases import LegendreSetup, LorenzSetup
from bindy.errors import InputError
from bindy.esindy import EnsembleConfig
from bindy.models import FlatPrior, ModelIndex
from bindy.sampler import Chain, SamplerConfig
from bindy.signal import TimeSeries


def _chain(inclusion, params, sigma2=None, scales=None):
    inclusion = np.asarray(inclusion, dtype=bool)
    params = np.where(inclusion, np.asarray(params, dtype=float), np.nan)
    n, D = inclusion.shape
    return Chain(
        inclusion, params, np.ones(n) if sigma2 is None else np.asarray(sigma2, dtype=float),
        np.zeros(n, dtype=bool), 0.0, SamplerConfig(n_iterations=n + 1, burn_in=1),
        np.ones(D) if scales is None else np.asarray(scales, dtype=float),
    )


def test_summary_worked_example():
    c = _chain([[1, 0], [1, 1], [1, 0], [0, 0]], [[2.0, 0], [4.0, 1.0], [3.0, 0], [0, 0]], [1, 2, 3, 4])
    s = summarize_chain(c, ["a", "b"])
    np.testing.assert_allclose(s.inclusion_prob, [0.75, 0.25])
    np.testing.assert_allclose(s.cond_mean, [3.0, 1.0])
    np.testing.assert_allclose(s.cond_std, [np.std([2, 4, 3]), 0.0])
    np.testing.assert_allclose(s.marg_mean, [9 / 4, 1 / 4])
    assert s.mode == ModelIndex.from_indices([0], 2) and s.mode_prob == 0.5
    assert s.sigma2_mean == 2.5 and s.n_samples == 4
    d = s.to_dict()
    assert d["mode_terms"] == ["a"] and d["mode"] == "1"


def test_summary_absent_term_and_raw_units():
    c = _chain([[1, 0], [1, 0]], [[2.0, 0], [4.0, 0]], scales=[2.0, 1.0])
    s = summarize_chain(c)
    assert np.isnan(s.cond_mean[1]) and not s.present[1]
    assert s.cond_mean[0] == 1.5
    assert summarize_chain(c, raw=False).cond_mean[0] == 3.0
    assert s.to_dict()["cond_mean"][1] is None


def test_model_frequencies_and_probability():
    c = _chain([[1, 0], [1, 1], [1, 0], [0, 0]], np.ones((4, 2)))
    masks, freq = model_frequencies(c)
    assert list(masks) == [0, 1, 3]
    np.testing.assert_allclose(freq, [0.25, 0.5, 0.25])
    np.testing.assert_allclose(empirical_model_distribution(c), [0.25, 0.5, 0, 0.25])
    assert model_probability(c, ModelIndex(1, 2)) == 0.5


def test_exact_posterior_single_column(rng):
    x = rng.standard_normal(50)
    y = 0.4 * x + rng.standard_normal(50)
    p = exact_model_posterior(x[:, None], y, ParamPrior.isotropic(1, 2.0), FlatPrior(), 1.0)
    # closed form Bayes factor for one column with a N(0, v) prior
    v, s2 = 2.0, 1.0
    prec = x @ x / s2 + 1 / v
    log_bf = 0.5 * (x @ y / s2) ** 2 / prec - 0.5 * np.log(v * prec)
    assert p[1] == pytest.approx(1 / (1 + np.exp(-log_bf)), rel=1e-10)
    assert p.sum() == pytest.approx(1.0)


def test_exact_posterior_duplicated_columns(rng):
    x = rng.standard_normal(40)
    X = np.column_stack([x, x, rng.standard_normal(40)])
    p = exact_model_posterior(X, 0.5 * x + 0.2 * rng.standard_normal(40), ParamPrior.isotropic(3, 1.0),
                              FlatPrior(), 0.04)
    inc = inclusion_from_distribution(p, 3)
    assert inc[0] == pytest.approx(inc[1], rel=1e-9)
    assert p[0b001] == pytest.approx(p[0b010], rel=1e-9)


def test_exact_posterior_refuses_large_libraries():
    with pytest.raises(InputError):
        exact_model_posterior(np.ones((5, 21)), np.ones(5), ParamPrior.isotropic(21, 1.0), FlatPrior(), 1.0)


def test_total_variation():
    assert total_variation([0.5, 0.5], [0.5, 0.5]) == 0
    assert total_variation([1, 0], [0, 1]) == 1
    assert total_variation([0.2, 0.8], [0.4, 0.6]) == pytest.approx(0.2)


def test_batch_means_on_white_noise(rng):
    x = rng.standard_normal(40_000)
    assert batch_means_se(x) == pytest.approx(1 / np.sqrt(40_000), rel=0.2)


def test_constant_trace_has_zero_shift():
    c = _chain(np.ones((200, 2)), np.full((200, 2), 3.0))
    rep = trace_report([c, c])
    np.testing.assert_array_equal(rep.shift, 0.0)
    assert rep.converged and rep.traces.shape == (2, 200, 2)
    assert split_shift(np.ones(10)) == (0.0, 0.0)


def test_drifting_trace_flagged():
    n = 400
    c = _chain(np.ones((n, 1)), np.linspace(0, 10, n)[:, None] + 0.01 * np.random.default_rng(1).standard_normal((n, 1)))
    rep = trace_report([c])
    assert not rep.converged and rep.shift[0] > 3


def _series(values, t=None):
    values = np.asarray(values, dtype=float)
    return TimeSeries(np.arange(len(values)) * 0.1 if t is None else t, values)


def test_mse_identical_is_zero():
    ref = _series(np.column_stack([np.sin(np.arange(20)), np.arange(20.0)]))
    st = trajectory_mse_stats([ref, ref], ref)
    np.testing.assert_array_equal(st.median, 0.0)
    assert st.n_diverged == 0


def test_mse_values_and_permutation_invariance():
    ref = _series(np.zeros(10) + 1.0)
    fans = [_series(np.full(10, 1.0 + d)) for d in (0.1, 0.3, 0.2)]
    st = trajectory_mse_stats(fans, ref)
    assert st.median[0] == pytest.approx(0.04)
    assert st.mean[0] == pytest.approx((0.01 + 0.09 + 0.04) / 3)
    st2 = trajectory_mse_stats(fans[::-1], ref)
    np.testing.assert_allclose([st.median, st.mean, st.std], [st2.median, st2.mean, st2.std])


def test_mse_window_cap_and_divergence():
    ref = _series(np.ones(10))
    bad = TimeSeries(ref.t, np.r_[np.ones(5), np.full(5, np.nan)], diverged=True)
    st = trajectory_mse_stats([bad], ref)
    assert st.n_diverged == 1
    assert st.mean[0] == pytest.approx(0.5 * 4.0)
    assert trajectory_mse_stats([bad], ref, window=slice(0, 5)).mean[0] == 0
    far = _series(np.full(10, 100.0))
    assert trajectory_mse_stats([far], ref, cap=7.0).mean[0] == 7.0


def test_mse_misaligned_grid():
    ref = _series(np.ones(10))
    with pytest.raises(InputError):
        trajectory_mse_stats([_series(np.ones(10), np.arange(10) * 0.2)], ref)
    with pytest.raises(InputError):
        trajectory_mse_stats([_series(np.ones(9))], ref)


def _small_settings():
    return SweepSettings(
        sampler=SamplerConfig(n_iterations=300, burn_in=100),
        ensemble=EnsembleConfig(20),
        legendre=LegendreSetup(n_points=500),
        lorenz=LorenzSetup(extrapolation=0.0),
    )


def test_parameterization_sweep_shapes():
    sw = parameterization_sweep(2, seed=1, settings=_small_settings())
    assert sw.coefficients.shape == sw.bindy_inclusion.shape == (2, 10)
    assert np.all((sw.esindy_mean >= 0) & (sw.esindy_mean <= 1))
    again = parameterization_sweep(2, seed=1, settings=_small_settings())
    np.testing.assert_array_equal(sw.bindy_inclusion, again.bindy_inclusion)


def test_robustness_grid_in_unit_interval():
    grid = robustness_sweep([1.0, 10.0], [1.0, 2.0], seed=3, settings=_small_settings())
    assert grid.cell.shape == (2, 2)
    assert np.all((grid.cell >= 0) & (grid.cell <= 1))
    assert grid.inclusion.shape[:3] == (2, 2, 3)
