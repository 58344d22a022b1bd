"""Measurement noise and numerical differentiation of sampled states."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, InputError


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """States sampled on a time grid.  ``values`` is always N x S."""

    t: np.ndarray
    values: np.ndarray
    diverged: bool = False

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float).ravel()
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != t.shape[0]:
            raise InputError(f"{t.shape[0]} times but {values.shape[0]} rows of values")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise InputError("times must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.t.shape[0]

    @property
    def n_states(self) -> int:
        return self.values.shape[1]

    @property
    def dt(self) -> float:
        """The uniform sampling interval; raises if the grid is not uniform."""
        if len(self) < 2:
            raise InputError("need at least two samples for a sampling interval")
        steps = np.diff(self.t)
        dt = (self.t[-1] - self.t[0]) / (len(self) - 1)
        if np.max(np.abs(steps - dt)) > 1e-9 * abs(dt):
            raise InputError("time grid is not uniformly sampled")
        return float(dt)

    def slice(self, start, stop=None) -> TimeSeries:
        return TimeSeries(self.t[start:stop], self.values[start:stop], self.diverged)


def rms(values, axis=0):
    return np.sqrt(np.mean(np.square(values), axis=axis))


NOISE_REFERENCES = ("rms", "std")


def noise_scale(values, reference: str = "rms") -> np.ndarray:
    """Per-channel amplitude that noise percentages refer to.

    ``"rms"`` is the root-mean-square of each channel; ``"std"`` removes the
    channel mean first, which only matters for channels with a large offset.
    """
    if reference == "rms":
        return rms(values)
    if reference == "std":
        return np.std(values, axis=0)
    raise ConfigError(f"noise reference must be one of {NOISE_REFERENCES}")


def add_rms_noise(series: TimeSeries, percent_rms: float, rng, reference: str = "rms") -> TimeSeries:
    """Add white Gaussian noise with per-channel std ``percent_rms``% of that channel's RMS.

    ``reference="std"`` measures the channel about its mean instead.
    """
    if percent_rms < 0:
        raise InputError("percent_rms must be non-negative")
    if percent_rms == 0:
        return series
    std = percent_rms / 100.0 * noise_scale(series.values, reference)
    noisy = series.values + rng.standard_normal(series.values.shape) * std
    return TimeSeries(series.t, noisy, series.diverged)


FD_METHODS = ("local_fit", "smooth_then_difference")


@dataclass(frozen=True)
class SmoothedFDConfig:
    """Settings for :func:`smoothed_finite_difference`.

    ``method="local_fit"`` differentiates the local polynomial directly.
    ``method="smooth_then_difference"`` evaluates the local polynomial
    (smoothing) and then applies a ``difference_order`` finite difference;
    only order 2 is available for that route.
    """

    difference_order: int = 2
    window: int = 5
    poly_order: int = 3
    trim: int | None = None
    method: str = "local_fit"

    def __post_init__(self):
        if self.method not in FD_METHODS:
            raise ConfigError(f"method must be one of {FD_METHODS}")
        if self.method == "smooth_then_difference" and self.difference_order != 2:
            raise ConfigError("smooth_then_difference supports difference_order=2 only")
        if self.window < 1 or self.window % 2 == 0:
            raise ConfigError("window must be a positive odd integer")
        if not 1 <= self.poly_order < self.window:
            raise ConfigError("poly_order must satisfy 1 <= poly_order < window")
        if self.difference_order < 1:
            raise ConfigError("difference_order must be >= 1")
        if self.trim is not None and self.trim < 0:
            raise ConfigError("trim must be non-negative")

    @property
    def n_trim(self) -> int:
        """Points dropped from each end; 2n+1 for an n-th order scheme by default."""
        return 2 * self.difference_order + 1 if self.trim is None else self.trim


def local_fit_weights(window: int, poly_order: int, dt: float = 1.0, deriv: int = 1) -> np.ndarray:
    """Row ``j`` maps the ``window`` samples to the value (``deriv=0``) or first
    derivative (``deriv=1``) at window position ``j`` of their least-squares
    polynomial of degree ``poly_order``.
    """
    offsets = np.arange(window, dtype=float)
    vander = np.vander(offsets, poly_order + 1, increasing=True)
    coef_map = np.linalg.pinv(vander)  # samples -> polynomial coefficients
    if deriv == 0:
        return vander @ coef_map
    dvander = np.zeros((window, poly_order + 1))
    for k in range(1, poly_order + 1):
        dvander[:, k] = k * offsets ** (k - 1)
    return dvander @ coef_map / dt


def _apply_local_fit(x, weights):
    n, w = x.shape[0], weights.shape[0]
    h = w // 2
    out = np.empty_like(x)
    # windows[i] covers rows i .. i+w-1, shape (n-w+1, S, w)
    windows = sliding_window_view(x, w, axis=0)
    out[h:n - h] = windows @ weights[h]
    out[:h] = np.einsum("jw,sw->js", weights[:h], windows[0])
    out[n - h:] = np.einsum("jw,sw->js", weights[h + 1:], windows[-1])
    return out


def smoothed_finite_difference(series: TimeSeries, config: SmoothedFDConfig = SmoothedFDConfig()):
    """Sliding local-polynomial derivative, then trimming of both ends.

    Interior points use the window centred on them; the first and last
    ``window // 2`` points reuse the nearest full window, evaluated
    off-centre.  Returns ``(derivatives, kept)`` where ``kept`` is the slice
    of input rows the derivative rows correspond to.
    """
    n = len(series)
    w = config.window
    trim = config.n_trim
    if n < w + 2 * trim:
        raise InputError(f"series of length {n} is too short for window {w} with trim {trim}")
    dt = series.dt
    if config.method == "local_fit":
        deriv = _apply_local_fit(series.values, local_fit_weights(w, config.poly_order, dt))
    else:
        smooth = _apply_local_fit(series.values, local_fit_weights(w, config.poly_order, deriv=0))
        deriv = np.gradient(smooth, dt, axis=0, edge_order=2)
    kept = slice(trim, n - trim)
    return deriv[kept], kept


def central_difference(series: TimeSeries) -> np.ndarray:
    """Second-order central differences, one-sided second order at the ends."""
    if len(series) < 3:
        raise InputError("central differences need at least three samples")
    return np.gradient(series.values, series.dt, axis=0, edge_order=2)
