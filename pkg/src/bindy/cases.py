"""Benchmark problem generators: static Legendre regression, Lorenz, lynx-hare."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import LORENZ_TRUE_TERMS, LORENZ_X0, simulate_lorenz
from .errors import ConfigError, IngestionError
from .library import TermLibrary, build_legendre_library, build_polynomial_library, normalize_columns
from .models import ModelIndex
from .signal import (
    SmoothedFDConfig,
    TimeSeries,
    central_difference,
    noise_scale,
    rms,
    smoothed_finite_difference,
)

LEGENDRE_COEFFS = (0.549, 0.0, 0.603, 0.545, 0.424, 0.006, 0.0, 0.0, 0.0, 0.004)
LEGENDRE_ZERO_TERMS = (1, 6, 7, 8)
LEGENDRE_SMALL_TERMS = (5, 9)

LYNX_HARE_YEARS = (1900, 1920)


@dataclass
class LegendreSetup:
    n_points: int = 50_000
    noise_pct: float = 5.0
    coefficients: tuple = LEGENDRE_COEFFS


@dataclass(frozen=True, eq=False)
class LegendreData:
    x: np.ndarray
    library: TermLibrary
    targets: np.ndarray
    clean: np.ndarray
    coefficients: np.ndarray


def legendre_data(setup: LegendreSetup, rng) -> LegendreData:
    """Equispaced x on [-1, 1]; targets = Theta(x) @ coefficients + noise at ``noise_pct``% RMS."""
    coefs = np.asarray(setup.coefficients, dtype=float)
    x = np.linspace(-1.0, 1.0, setup.n_points)
    lib = build_legendre_library(x, coefs.size)
    clean = lib.design @ coefs
    noise_std = setup.noise_pct / 100.0 * float(rms(clean))
    y = clean + noise_std * rng.standard_normal(clean.size)
    return LegendreData(x, lib, y, clean, coefs)


def random_legendre_coefficients(rng, n_terms: int = 10) -> np.ndarray:
    """Uniform [0, 1] draws with the case-study zero and small-valued positions, 3 decimals."""
    c = rng.uniform(0.0, 1.0, n_terms)
    c[list(LEGENDRE_ZERO_TERMS)] = 0.0
    c[list(LEGENDRE_SMALL_TERMS)] *= 0.01
    return np.round(c, 3)


@dataclass
class LorenzSetup:
    duration: float = 10.0
    extrapolation: float = 5.0
    dt: float = 0.01
    x0: tuple = LORENZ_X0
    noise_pct: float = 2.5
    noise_reference: str = "std"
    max_degree: int = 3
    include_constant: bool = True
    normalize: bool = False
    diff: SmoothedFDConfig = field(
        default_factory=lambda: SmoothedFDConfig(method="smooth_then_difference")
    )
    scheme: str = "smoothed_fd"


@dataclass(frozen=True, eq=False)
class LorenzData:
    clean: TimeSeries        # training + extrapolation, noise-free
    observed: TimeSeries     # training + extrapolation, with measurement noise
    n_train: int
    library: TermLibrary     # built on the trimmed noisy training states
    derivatives: np.ndarray  # aligned with library rows, one column per equation

    @property
    def train(self) -> TimeSeries:
        return self.observed.slice(0, self.n_train)


def lorenz_data(setup: LorenzSetup, rng) -> LorenzData:
    """Simulate, add noise, differentiate and build the library for one Lorenz run.

    Noise std per channel is ``noise_pct``% of the clean training window's
    amplitude (see :func:`~bindy.signal.noise_scale`) and is applied to the
    extrapolation window too.
    """
    n_train = int(round(setup.duration / setup.dt))
    n_total = n_train + int(round(setup.extrapolation / setup.dt))
    clean = simulate_lorenz((n_total - 1) * setup.dt, setup.dt, setup.x0)
    std = setup.noise_pct / 100.0 * noise_scale(clean.values[:n_train], setup.noise_reference)
    observed = TimeSeries(clean.t, clean.values + rng.standard_normal(clean.values.shape) * std)
    train = observed.slice(0, n_train)
    deriv, kept = differentiate(train, setup.scheme, setup.diff)
    lib = build_polynomial_library(train.values[kept], setup.max_degree, setup.include_constant)
    if setup.normalize:
        lib = normalize_columns(lib)
    return LorenzData(clean, observed, n_train, lib, deriv)


DIFF_SCHEMES = ("smoothed_fd", "central")


def differentiate(series: TimeSeries, scheme: str, config: SmoothedFDConfig):
    """(derivatives, kept rows) under the named scheme; ``central`` keeps every row."""
    if scheme == "smoothed_fd":
        return smoothed_finite_difference(series, config)
    if scheme == "central":
        return central_difference(series), slice(0, len(series))
    raise ConfigError(f"differentiation scheme must be one of {DIFF_SCHEMES}")


def lorenz_true_models(library: TermLibrary) -> list[ModelIndex]:
    labels = library.labels
    return [
        ModelIndex.from_indices([labels.index(name) for name in LORENZ_TRUE_TERMS[eq]], library.n_terms)
        for eq in range(3)
    ]


def ingest_lynx_hare(path) -> TimeSeries:
    """Read ``year,hare,lynx`` records for 1900-1920 into a TimeSeries (columns hare, lynx)."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["year", "hare", "lynx"]:
            raise IngestionError(f"{path}: expected header 'year,hare,lynx', got {header}")
        years, values = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                year = int(row[0])
                hare, lynx = float(row[1]), float(row[2])
            except (ValueError, IndexError) as exc:
                raise IngestionError(f"{path}: row {lineno} is malformed: {row}") from exc
            if not (np.isfinite(hare) and np.isfinite(lynx)) or hare < 0 or lynx < 0:
                raise IngestionError(f"{path}: row {lineno} has a negative or non-finite count")
            if years and year != years[-1] + 1:
                raise IngestionError(f"{path}: row {lineno} breaks the consecutive annual sequence")
            years.append(year)
            values.append((hare, lynx))
    first, last = LYNX_HARE_YEARS
    expected = last - first + 1
    if len(years) != expected:
        raise IngestionError(f"{path}: expected {expected} annual records, found {len(years)}")
    if years[0] != first:
        raise IngestionError(f"{path}: records must start in {first}, found {years[0]}")
    return TimeSeries(np.array(years, dtype=float), np.array(values))


@dataclass
class LynxHareSetup:
    max_degree: int = 3
    include_constant: bool = True
    normalize: bool = True
    extrapolation_years: int = 10
    scheme: str = "central"
    diff: SmoothedFDConfig = field(default_factory=SmoothedFDConfig)


@dataclass(frozen=True, eq=False)
class LynxHareData:
    series: TimeSeries       # columns (L, H)
    library: TermLibrary
    derivatives: np.ndarray  # columns (dL/dt, dH/dt)


def lynx_hare_data(series: TimeSeries, setup: LynxHareSetup) -> LynxHareData:
    """Reorder ingested (hare, lynx) columns to (L, H), differentiate and build the library."""
    lh = TimeSeries(series.t, series.values[:, [1, 0]])
    deriv, kept = differentiate(lh, setup.scheme, setup.diff)
    lh = lh.slice(kept.start, kept.stop)
    lib = build_polynomial_library(lh.values, setup.max_degree, setup.include_constant)
    if setup.normalize:
        lib = normalize_columns(lib)
    return LynxHareData(lh, lib, deriv)


LOTKA_VOLTERRA_TERMS = {0: ("x1", "x1*x2"), 1: ("x2", "x1*x2")}


def lynx_hare_true_models(library: TermLibrary) -> list[ModelIndex]:
    labels = library.labels
    return [
        ModelIndex.from_indices([labels.index(n) for n in LOTKA_VOLTERRA_TERMS[eq]], library.n_terms)
        for eq in range(2)
    ]


@dataclass(frozen=True, eq=False)
class OracleProblem:
    design: np.ndarray
    targets: np.ndarray
    coefficients: np.ndarray
    sigma2: float


ORACLE_COEFFS = (1.0, 0.5, 0.0, 0.25, 0.0, 0.0, -0.3, 0.0)


def oracle_problem(rng, n_points: int = 30, coefficients=ORACLE_COEFFS, noise_std: float = 0.8) -> OracleProblem:
    """A small Gaussian-design regression whose model posterior is spread over many subsets."""
    coefs = np.asarray(coefficients, dtype=float)
    X = rng.standard_normal((n_points, coefs.size))
    y = X @ coefs + noise_std * rng.standard_normal(n_points)
    return OracleProblem(X, y, coefs, noise_std**2)
