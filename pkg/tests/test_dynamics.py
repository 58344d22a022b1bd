import numpy as np
import pytest

from bindy.dynamics import (
    LORENZ,
    LORENZ_TRUE_TERMS,
    OdeSystem,
    SampledModelSystem,
    fit_lotka_volterra,
    integrate_models,
    lorenz_rhs,
    lotka_volterra_rhs,
    lotka_volterra_system,
    rk4_integrate,
    simulate_lorenz,
    simulate_posterior_fan,
)
from bindy.errors import InputError
from bindy.library import build_polynomial_library, polynomial_terms
from bindy.sampler import SamplerConfig, run_chain


def test_lorenz_rhs_values():
    np.testing.assert_allclose(lorenz_rhs([1.0, 2.0, 3.0]), [10.0, 23.0, 2.0 - 8.0])
    np.testing.assert_allclose(lorenz_rhs([0.0, 0.0, 0.0]), [0.0, 0.0, 0.0])


def test_lotka_volterra_rhs():
    np.testing.assert_allclose(lotka_volterra_rhs([2.0, 3.0], (1.0, -0.5, -2.0, 0.25)), [2 - 3, -6 + 1.5])


def test_exponential_decay():
    decay = OdeSystem(1, lambda x: -x)
    out = rk4_integrate(decay, [1.0], 0.01, 100)
    assert out.values[-1, 0] == pytest.approx(np.exp(-1.0), abs=1e-9)
    assert out.t[-1] == pytest.approx(1.0)
    assert not out.diverged


def test_rk4_order():
    osc = OdeSystem(2, lambda x: np.array([x[1], -x[0]]))
    errs = []
    for h in (0.2, 0.1, 0.05):
        n = int(round(2.0 / h))
        out = rk4_integrate(osc, [1.0, 0.0], h, n)
        errs.append(abs(out.values[-1, 0] - np.cos(2.0)))
    orders = np.log(np.array(errs[:-1]) / errs[1:]) / np.log(2)
    assert np.all(orders >= 3.7)


def test_divergence_flag():
    blowup = OdeSystem(1, lambda x: x**2)
    out = rk4_integrate(blowup, [1.0], 0.01, 200)
    assert out.diverged
    assert np.isnan(out.values[-1, 0])
    first_nan = np.argmax(np.isnan(out.values[:, 0]))
    assert np.all(np.isfinite(out.values[:first_nan]))
    assert np.all(np.abs(out.values[:first_nan]) <= 1e6)


def test_invalid_steps():
    with pytest.raises(InputError):
        rk4_integrate(LORENZ, [1, 1, 1], 0.0, 10)
    with pytest.raises(InputError):
        rk4_integrate(LORENZ, [1, 1, 1], 0.01, 0)


def _true_lorenz_coefs(terms):
    labels = [t.label for t in terms]
    c = np.zeros((3, len(terms)))
    for eq, row in LORENZ_TRUE_TERMS.items():
        for name, v in row.items():
            c[eq, labels.index(name)] = v
    return c


def test_library_model_reproduces_lorenz():
    terms = polynomial_terms(3, 3)
    coefs = _true_lorenz_coefs(terms)
    ref = simulate_lorenz(2.0)
    fan = integrate_models(terms, coefs[None], (-8.0, 7.0, 27.0), 0.01, len(ref) - 1)
    np.testing.assert_allclose(fan[0].values, ref.values, atol=1e-9)
    single = rk4_integrate(SampledModelSystem(terms, coefs), (-8.0, 7.0, 27.0), 0.01, len(ref) - 1)
    np.testing.assert_allclose(single.values, ref.values, atol=1e-9)


def test_sampled_model_shape_check():
    with pytest.raises(InputError):
        SampledModelSystem(polynomial_terms(2, 2), np.zeros((2, 3)))


def test_batch_marks_only_diverging_members():
    terms = polynomial_terms(1, 2)
    coefs = np.array([[[0.0, -1.0, 0.0]], [[0.0, 0.0, 1.0]]])  # x' = -x, x' = x^2
    out = integrate_models(terms, coefs, [1.0], 0.01, 300)
    assert not out[0].diverged and out[1].diverged
    assert out[0].values[100, 0] == pytest.approx(np.exp(-1.0), abs=1e-9)


def test_posterior_fan_from_chains(rng):
    ref = simulate_lorenz(2.0)
    lib = build_polynomial_library(ref.values, 2)
    derivs = np.array([lorenz_rhs(x) for x in ref.values])
    cfg = SamplerConfig(n_iterations=300, burn_in=100, seed=2)
    chains = [run_chain(lib, derivs[:, s], cfg, chain_id=s) for s in range(3)]
    fan = simulate_posterior_fan(chains, lib.terms, ref.values[0], 0.01, 1.0, 5, rng)
    assert len(fan) == 5 and len(fan[0]) == 101
    for f in fan:
        np.testing.assert_allclose(f.values, ref.values[:101], atol=1e-3)


def test_lotka_volterra_fit_recovers_coefficients():
    coeffs = (0.5, -0.02, -0.8, 0.01)
    sys = lotka_volterra_system(coeffs)
    traj = rk4_integrate(sys, [40.0, 30.0], 0.01, 2000)
    derivs = np.array([sys.rhs(x) for x in traj.values])
    np.testing.assert_allclose(fit_lotka_volterra(traj.values, derivs), coeffs, rtol=1e-10)
