"""Benchmark systems, a fixed-step RK4 integrator and posterior trajectory fans."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InputError
from .library import evaluate_design
from .signal import TimeSeries

DIVERGENCE_LIMIT = 1e6

LORENZ_SIGMA = 10.0
LORENZ_RHO = 28.0
LORENZ_BETA = 8.0 / 3.0
LORENZ_X0 = (-8.0, 7.0, 27.0)


@dataclass(frozen=True)
class OdeSystem:
    dimension: int
    rhs: Callable[[np.ndarray], np.ndarray]
    label: str = ""


def lorenz_rhs(state):
    x1, x2, x3 = state
    return np.array([
        LORENZ_SIGMA * (x2 - x1),
        x1 * (LORENZ_RHO - x3) - x2,
        x1 * x2 - LORENZ_BETA * x3,
    ])


LORENZ = OdeSystem(3, lorenz_rhs, "Lorenz (standard)")

# (equation, term label) pairs of the standard Lorenz system
LORENZ_TRUE_TERMS = {
    0: {"x1": -LORENZ_SIGMA, "x2": LORENZ_SIGMA},
    1: {"x1": LORENZ_RHO, "x2": -1.0, "x1*x3": -1.0},
    2: {"x3": -LORENZ_BETA, "x1*x2": 1.0},
}


def lotka_volterra_rhs(state, coeffs):
    """State is (L, H); coefficients (c11, c12, c21, c22)."""
    L, H = state
    c11, c12, c21, c22 = coeffs
    return np.array([c11 * L + c12 * H * L, c21 * H + c22 * H * L])


def lotka_volterra_system(coeffs) -> OdeSystem:
    coeffs = tuple(float(c) for c in coeffs)
    return OdeSystem(2, lambda s: lotka_volterra_rhs(s, coeffs), "Lotka-Volterra")


def fit_lotka_volterra(states, derivatives) -> np.ndarray:
    """Least-squares (c11, c12, c21, c22) given (L, H) states and their derivatives."""
    states = np.asarray(states, dtype=float)
    derivatives = np.asarray(derivatives, dtype=float)
    L, H = states[:, 0], states[:, 1]
    c1, *_ = np.linalg.lstsq(np.column_stack([L, H * L]), derivatives[:, 0], rcond=None)
    c2, *_ = np.linalg.lstsq(np.column_stack([H, H * L]), derivatives[:, 1], rcond=None)
    return np.concatenate([c1, c2])


@dataclass(frozen=True, eq=False)
class SampledModelSystem:
    """A library model: ``coefficients[s]`` gives the raw-unit weights of equation ``s``."""

    terms: tuple
    coefficients: np.ndarray

    def __post_init__(self):
        coefs = np.atleast_2d(np.asarray(self.coefficients, dtype=float))
        if coefs.shape[1] != len(self.terms):
            raise InputError("coefficient rows must have one entry per library term")
        object.__setattr__(self, "coefficients", coefs)

    @property
    def dimension(self) -> int:
        return self.coefficients.shape[0]

    def rhs(self, state):
        return self.coefficients @ evaluate_design(self.terms, np.asarray(state, dtype=float))


def _rk4_batch(f, x0, dt, n_steps):
    """Integrate a batch of states (B, S) with a vectorized rhs ``f``."""
    x = np.array(x0, dtype=float)
    out = np.full((n_steps + 1,) + x.shape, np.nan)
    out[0] = x
    alive = np.ones(x.shape[0], dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(1, n_steps + 1):
            k1 = f(x)
            k2 = f(x + 0.5 * dt * k1)
            k3 = f(x + 0.5 * dt * k2)
            k4 = f(x + dt * k3)
            x = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            ok = np.all(np.isfinite(x), axis=1) & np.all(np.abs(x) <= DIVERGENCE_LIMIT, axis=1)
            alive &= ok
            # frozen rows keep integrating garbage; they are masked out below
            x = np.where(alive[:, None], x, 0.0)
            out[i, alive] = x[alive]
    return out, ~alive


def rk4_integrate(system, x0, dt: float, n_steps: int, t0: float = 0.0) -> TimeSeries:
    """Classical fourth-order Runge-Kutta with a fixed step.

    A trajectory whose state leaves ``|x| <= 1e6`` or becomes non-finite is
    stopped; remaining rows are NaN and the result is flagged ``diverged``.
    """
    if not dt > 0:
        raise InputError("dt must be positive")
    if n_steps < 1:
        raise InputError("n_steps must be >= 1")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))

    def f(batch):
        return np.asarray(system.rhs(batch[0]), dtype=float)[None, :]

    values, diverged = _rk4_batch(f, x0[None, :], dt, n_steps)
    t = t0 + dt * np.arange(n_steps + 1)
    return TimeSeries(t, values[:, 0, :], bool(diverged[0]))


def integrate_models(terms, coefficients, x0, dt: float, n_steps: int, t0: float = 0.0) -> list[TimeSeries]:
    """Integrate a batch of library models at once.

    ``coefficients`` has shape (B, S, D) in raw units; every model starts
    from ``x0``.
    """
    coefs = np.asarray(coefficients, dtype=float)
    B = coefs.shape[0]
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (B, coefs.shape[1]))

    def f(x):
        theta = evaluate_design(terms, x)  # (B, D)
        return np.einsum("bsd,bd->bs", coefs, theta)

    values, diverged = _rk4_batch(f, x0, dt, n_steps)
    t = t0 + dt * np.arange(n_steps + 1)
    return [TimeSeries(t, values[:, b, :], bool(diverged[b])) for b in range(B)]


def chain_coefficients(chains, raw: bool = True) -> np.ndarray:
    """Stack per-equation chains into (n_samples, S, D) coefficient draws."""
    mats = [c.coefficient_matrix(raw=raw) for c in chains]
    n = min(m.shape[0] for m in mats)
    return np.stack([m[:n] for m in mats], axis=1)


def simulate_posterior_fan(chains, library_terms, x0, dt: float, horizon: float, n_draws: int, rng) -> list[TimeSeries]:
    """Integrate ``n_draws`` uniformly selected joint posterior samples noise-free.

    ``chains`` holds one chain per state equation; a draw takes the same
    retained-sample index from each.  Coefficients are mapped to raw units
    using the chains' column scales.
    """
    if isinstance(chains, (list, tuple)):
        chains = list(chains)
    else:
        chains = [chains]
    coefs = chain_coefficients(chains)
    if coefs.shape[0] == 0:
        raise InputError("cannot simulate from an empty chain")
    pick = rng.integers(coefs.shape[0], size=n_draws)
    n_steps = int(round(horizon / dt))
    return integrate_models(library_terms, coefs[pick], x0, dt, n_steps)


def simulate_lorenz(duration: float, dt: float = 0.01, x0=LORENZ_X0) -> TimeSeries:
    return rk4_integrate(LORENZ, x0, dt, int(round(duration / dt)))
