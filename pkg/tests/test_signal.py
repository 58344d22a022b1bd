import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bindy.dynamics import lorenz_rhs, simulate_lorenz
from bindy.errors import ConfigError, InputError
from bindy.signal import (
    SmoothedFDConfig,
    TimeSeries,
    add_rms_noise,
    central_difference,
    local_fit_weights,
    noise_scale,
    rms,
    smoothed_finite_difference,
)

LOCAL = SmoothedFDConfig(method="local_fit")
SMOOTH = SmoothedFDConfig(method="smooth_then_difference")


def _grid(n=101, dt=0.01):
    return np.arange(n) * dt


def test_timeseries_validation():
    with pytest.raises(InputError):
        TimeSeries([0, 1, 1], np.zeros(3))
    with pytest.raises(InputError):
        TimeSeries([0, 1], np.zeros(3))
    with pytest.raises(InputError):
        TimeSeries([0, 1, 3], np.zeros(3)).dt
    assert TimeSeries(_grid(5), np.zeros(5)).values.shape == (5, 1)


@pytest.mark.parametrize("coeffs", [(2.0, -3.0), (0.5, 1.0, -2.0, 4.0)])
def test_local_fit_exact_on_polynomials(coeffs):
    t = _grid()
    x = np.polynomial.polynomial.polyval(t, coeffs)
    dx = np.polynomial.polynomial.polyval(t, np.polynomial.polynomial.polyder(coeffs))
    d, kept = smoothed_finite_difference(TimeSeries(t, x), LOCAL)
    np.testing.assert_allclose(d[:, 0], dx[kept], atol=1e-9, rtol=0)


def test_local_fit_weights_reproduce_known_stencil():
    # 5-point quadratic/cubic fit derivative at the centre
    w = local_fit_weights(5, 3)[2]
    np.testing.assert_allclose(w, np.array([1, -8, 0, 8, -1]) / 12.0, atol=1e-12)
    np.testing.assert_allclose(local_fit_weights(5, 3, deriv=0)[2], [-3 / 35, 12 / 35, 17 / 35, 12 / 35, -3 / 35], atol=1e-12)


@pytest.mark.parametrize("config", [LOCAL, SMOOTH])
def test_sine_derivative(config):
    t = _grid(400, 0.01)
    d, kept = smoothed_finite_difference(TimeSeries(t, np.sin(t)), config)
    np.testing.assert_allclose(d[:, 0], np.cos(t[kept]), atol=2e-4)


def test_default_trim():
    t = _grid(50)
    d, kept = smoothed_finite_difference(TimeSeries(t, t), SMOOTH)
    assert kept == slice(5, 45) and d.shape == (40, 1)
    d, kept = smoothed_finite_difference(TimeSeries(t, t), SmoothedFDConfig(trim=0))
    assert d.shape == (50, 1)


def test_too_short_and_bad_config():
    t = _grid(14)
    with pytest.raises(InputError):
        smoothed_finite_difference(TimeSeries(t, t))
    with pytest.raises(ConfigError):
        SmoothedFDConfig(window=4)
    with pytest.raises(ConfigError):
        SmoothedFDConfig(poly_order=5, window=5)
    with pytest.raises(ConfigError):
        SmoothedFDConfig(method="spline")
    with pytest.raises(ConfigError):
        SmoothedFDConfig(method="smooth_then_difference", difference_order=4)
    with pytest.raises(InputError):
        central_difference(TimeSeries(_grid(2), np.zeros(2)))


def test_central_difference_order():
    errs = []
    hs = [0.02, 0.01, 0.005]
    for h in hs:
        t = np.arange(0, 2.0 + h / 2, h)
        d = central_difference(TimeSeries(t, np.exp(t)))
        errs.append(np.max(np.abs(d[:, 0] - np.exp(t))))
    orders = np.log(np.array(errs[:-1]) / errs[1:]) / np.log(2)
    assert np.all(orders >= 1.9)


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-10, 10))
def test_linearity_and_constants(a, b, c):
    t = _grid(60)
    f, g = np.sin(3 * t), t**2
    df, _ = smoothed_finite_difference(TimeSeries(t, f), SMOOTH)
    dg, _ = smoothed_finite_difference(TimeSeries(t, g), SMOOTH)
    dh, _ = smoothed_finite_difference(TimeSeries(t, a * f + b * g + c), SMOOTH)
    np.testing.assert_allclose(dh, a * df + b * dg, atol=1e-6 * (1 + abs(a) + abs(b) + abs(c)))


def test_lorenz_alignment():
    clean = simulate_lorenz(5.0)
    d, kept = smoothed_finite_difference(clean, SMOOTH)
    exact = np.array([lorenz_rhs(x) for x in clean.values[kept]])
    rel = np.linalg.norm(d - exact, axis=0) / np.linalg.norm(exact, axis=0)
    assert np.all(rel < 0.01)


def test_noise_moments(rng):
    t = _grid(200_000, 1.0)
    base = np.column_stack([np.full(t.size, 3.0), 2 * np.sin(t)])
    noisy = add_rms_noise(TimeSeries(t, base), 10.0, rng)
    resid = noisy.values - base
    np.testing.assert_allclose(resid.std(axis=0), 0.1 * rms(base), rtol=0.01)
    assert np.all(np.abs(resid.mean(axis=0)) < 0.01)
    noisy = add_rms_noise(TimeSeries(t, base + 100), 10.0, rng, reference="std")
    np.testing.assert_allclose((noisy.values - base - 100).std(axis=0)[1], 0.1 * np.sqrt(2), rtol=0.01)


def test_noise_scale_and_zero_noise(rng):
    s = TimeSeries(_grid(4), np.array([1.0, -1.0, 1.0, -1.0]))
    assert add_rms_noise(s, 0.0, rng) is s
    assert noise_scale(s.values)[0] == pytest.approx(1.0)
    with pytest.raises(ConfigError):
        noise_scale(s.values, "peak")
    with pytest.raises(InputError):
        add_rms_noise(s, -1.0, rng)
