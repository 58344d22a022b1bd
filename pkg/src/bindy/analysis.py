"""Posterior summaries, exact enumeration, convergence checks and parameter studies."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from .bayes import ParamPrior
from .cases import (
    LegendreSetup,
    LorenzSetup,
    legendre_data,
    lorenz_data,
    lorenz_true_models,
    random_legendre_coefficients,
)
from .errors import InputError
from .esindy import EnsembleConfig, StlsqConfig, ensemble_inclusion_stats, ensemble_sindy
from .models import MAX_ENUMERATION_TERMS, ModelIndex, enumerate_models
from .sampler import Chain, LinearProblem, SamplerConfig, derive_seed, run_chain

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PosteriorSummary:
    """Per-term statistics of one chain.

    ``cond_*`` are taken over the samples that include the term (NaN when it
    never appears, see ``present``); ``marg_*`` over all samples with absent
    terms counted as zero.
    """

    labels: list
    inclusion_prob: np.ndarray
    cond_mean: np.ndarray
    cond_std: np.ndarray
    marg_mean: np.ndarray
    marg_std: np.ndarray
    mode: ModelIndex
    mode_prob: float
    sigma2_mean: float
    n_samples: int

    @property
    def present(self) -> np.ndarray:
        return self.inclusion_prob > 0

    def to_dict(self) -> dict:
        def clean(a):
            return [None if not np.isfinite(v) else float(v) for v in a]

        return {
            "labels": list(self.labels),
            "inclusion_prob": clean(self.inclusion_prob),
            "cond_mean": clean(self.cond_mean),
            "cond_std": clean(self.cond_std),
            "marg_mean": clean(self.marg_mean),
            "marg_std": clean(self.marg_std),
            "mode": self.mode.hex,
            "mode_terms": [self.labels[i] for i in self.mode.indices],
            "mode_prob": self.mode_prob,
            "sigma2_mean": self.sigma2_mean,
            "n_samples": self.n_samples,
        }


def summarize_chain(chain: Chain, labels=None, raw: bool = True) -> PosteriorSummary:
    if len(chain) == 0:
        raise InputError("cannot summarize an empty chain")
    D = chain.n_terms
    labels = list(labels) if labels is not None else [f"term_{i}" for i in range(D)]
    params = chain.raw_params() if raw else chain.params
    inc = chain.inclusion
    inclusion = inc.mean(axis=0)
    counts = inc.sum(axis=0)
    cond_mean = np.full(D, np.nan)
    cond_std = np.full(D, np.nan)
    for j in np.flatnonzero(counts):
        v = params[inc[:, j], j]
        cond_mean[j] = v.mean()
        cond_std[j] = v.std()
    marg = np.where(inc, params, 0.0)
    masks, freq = model_frequencies(chain)
    best = int(np.argmax(freq))
    return PosteriorSummary(
        labels, inclusion, cond_mean, cond_std, marg.mean(axis=0), marg.std(axis=0),
        ModelIndex(int(masks[best]), D), float(freq[best]), float(chain.sigma2.mean()), len(chain),
    )


def _mask_values(chain: Chain) -> list[int]:
    return [m.mask for m in chain.models()]


def model_frequencies(chain: Chain):
    """Distinct visited masks (ascending) and their empirical frequencies."""
    masks, counts = np.unique(np.array(_mask_values(chain), dtype=object), return_counts=True)
    return masks, counts / counts.sum()


def empirical_model_distribution(chain: Chain) -> np.ndarray:
    """Frequencies indexed by mask integer, length 2^D."""
    if chain.n_terms > MAX_ENUMERATION_TERMS:
        raise InputError("library too large for a dense model distribution")
    counts = np.bincount(np.array(_mask_values(chain), dtype=np.int64), minlength=1 << chain.n_terms)
    return counts / counts.sum()


def model_probability(chain: Chain, model: ModelIndex) -> float:
    return float(np.mean([m == model.mask for m in _mask_values(chain)]))


def exact_model_posterior(design, targets, param_prior: ParamPrior, model_prior, sigma2: float) -> np.ndarray:
    """p(m | data, sigma2) for every mask, by enumeration and log-sum-exp."""
    problem = LinearProblem(design, targets)
    D = problem.n_terms
    if D > MAX_ENUMERATION_TERMS:
        raise InputError(f"refusing to enumerate 2^{D} models (limit 2^{MAX_ENUMERATION_TERMS})")
    logp = np.array([
        problem.log_evidence(m, sigma2, param_prior, model_prior.log_prob(m))[0]
        for m in enumerate_models(D)
    ])
    return np.exp(logp - logsumexp(logp))


def inclusion_from_distribution(probs: np.ndarray, n_terms: int) -> np.ndarray:
    masks = np.arange(probs.size)
    return np.array([probs[(masks >> i) & 1 == 1].sum() for i in range(n_terms)])


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def batch_means_se(x, n_batches: int | None = None) -> float:
    """Monte-Carlo standard error of the mean of an autocorrelated series."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4:
        return float(x.std() / np.sqrt(max(n, 1)))
    b = n_batches or max(2, int(np.sqrt(n)))
    size = n // b
    means = x[: b * size].reshape(b, size).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(b))


def split_shift(x):
    """(second-half mean - first-half mean, combined MC standard error)."""
    half = len(x) // 2
    a, b = x[:half], x[half:]
    return float(b.mean() - a.mean()), float(np.hypot(batch_means_se(a), batch_means_se(b)))


@dataclass(frozen=True, eq=False)
class TraceReport:
    """``traces`` is (n_chains, n_iterations, D) with absent terms as 0."""

    traces: np.ndarray
    shift: np.ndarray
    converged: bool
    threshold: float


def trace_report(chains, threshold: float = 3.0, discard: int = 0, raw: bool = True) -> TraceReport:
    """Coefficient traces and a split-half stationarity statistic per term.

    The statistic is |mean(second half) - mean(first half)| averaged over
    chains, in units of its batch-means standard error; 0 when both the
    shift and its error vanish.
    """
    if len(chains) < 1:
        raise InputError("need at least one chain")
    n = min(len(c) for c in chains)
    traces = np.stack([c.coefficient_matrix(raw=raw)[:n] for c in chains])
    body = traces[:, discard:, :]
    D = traces.shape[2]
    shift = np.zeros(D)
    for j in range(D):
        deltas, ses = zip(*(split_shift(body[k, :, j]) for k in range(body.shape[0])))
        delta = abs(np.mean(deltas))
        se = np.sqrt(np.sum(np.square(ses))) / len(ses)
        if delta == 0.0:
            shift[j] = 0.0
        else:
            shift[j] = delta / se if se > 0 else np.inf
    return TraceReport(traces, shift, bool(np.all(shift < threshold)), threshold)


@dataclass(frozen=True, eq=False)
class MseStats:
    median: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    per_draw: np.ndarray
    n_diverged: int


def trajectory_mse_stats(fans, reference, window=None, cap: float | None = None) -> MseStats:
    """Per-draw, per-channel MSE against ``reference``; median/mean/std over draws.

    Squared errors are clipped at ``cap`` (default: (2 max|reference|)^2
    per channel) and rows after a divergence count as the cap, so diverged
    draws enter with a bounded error and are also counted separately.
    """
    ref_t = reference.t
    ref = reference.values
    if window is not None:
        ref_t, ref = ref_t[window], ref[window]
    if cap is None:
        cap_v = (2.0 * np.abs(ref).max(axis=0)) ** 2
    else:
        cap_v = np.full(ref.shape[1], float(cap))
    per_draw = []
    n_div = 0
    for fan in fans:
        t, v = fan.t, fan.values
        if window is not None:
            t, v = t[window], v[window]
        if t.shape != ref_t.shape or not np.allclose(t, ref_t, rtol=0, atol=1e-9):
            raise InputError("trajectory and reference time grids are not aligned")
        with np.errstate(invalid="ignore", over="ignore"):
            err = np.square(v - ref)
        err = np.where(np.isfinite(err), np.minimum(err, cap_v), cap_v)
        per_draw.append(err.mean(axis=0))
        n_div += bool(fan.diverged)
    per_draw = np.array(per_draw)
    return MseStats(
        np.median(per_draw, axis=0), per_draw.mean(axis=0), per_draw.std(axis=0), per_draw, n_div
    )


@dataclass
class SweepSettings:
    """Knobs shared by the parameter studies; defaults follow the case studies."""

    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    stlsq: StlsqConfig = field(default_factory=lambda: StlsqConfig(threshold=0.1))
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    legendre: LegendreSetup = field(default_factory=LegendreSetup)
    lorenz: LorenzSetup = field(default_factory=LorenzSetup)


def _map(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


@dataclass(frozen=True, eq=False)
class ParameterizationSweep:
    coefficients: np.ndarray       # (n_repeats, 10)
    bindy_inclusion: np.ndarray    # (n_repeats, 10)
    esindy_inclusion: np.ndarray   # (n_repeats, 10)

    @property
    def bindy_mean(self):
        return self.bindy_inclusion.mean(axis=0)

    @property
    def esindy_mean(self):
        return self.esindy_inclusion.mean(axis=0)


def _parameterization_repeat(task):
    seed, r, settings = task
    rng = np.random.default_rng(derive_seed(seed, 0, r))
    c = random_legendre_coefficients(rng)
    data = legendre_data(replace(settings.legendre, coefficients=tuple(c)), rng)
    chain = run_chain(data.library, data.targets, replace(settings.sampler, seed=derive_seed(seed, 1, r)))
    ens = ensemble_sindy(
        data.library.design, data.targets, settings.stlsq, settings.ensemble,
        np.random.default_rng(derive_seed(seed, 2, r)),
    )
    return c, chain.inclusion.mean(axis=0), ensemble_inclusion_stats(ens.coefs).frequency


def parameterization_sweep(n_repeats: int, seed: int, settings: SweepSettings | None = None, jobs: int = 1) -> ParameterizationSweep:
    """BINDy and E-SINDy inclusion over random Legendre coefficient vectors."""
    if n_repeats < 1:
        raise InputError("n_repeats must be >= 1")
    settings = settings or SweepSettings()
    out = _map(_parameterization_repeat, [(seed, r, settings) for r in range(n_repeats)], jobs)
    coefs, b_inc, e_inc = (np.array(v) for v in zip(*out))
    return ParameterizationSweep(coefs, b_inc, e_inc)


@dataclass(frozen=True, eq=False)
class RobustnessGrid:
    noise_levels: np.ndarray
    data_lengths: np.ndarray
    cell: np.ndarray                 # (n_noise, n_length) true-model probability
    inclusion: np.ndarray            # (n_noise, n_length, 3, D), NaN for failed cells
    failed: np.ndarray               # (n_noise, n_length) bool


def _robustness_cell(task):
    seed, i, j, noise, length, settings = task
    setup = replace(settings.lorenz, noise_pct=float(noise), duration=float(length))
    try:
        data = lorenz_data(setup, np.random.default_rng(derive_seed(seed, 0, i, j)))
        truth = lorenz_true_models(data.library)
        prob, incs = 1.0, []
        cfg = replace(settings.sampler, seed=derive_seed(seed, 1, i, j))
        for eq in range(3):
            chain = run_chain(data.library, data.derivatives[:, eq], cfg, chain_id=eq)
            prob *= model_probability(chain, truth[eq])
            incs.append(chain.inclusion.mean(axis=0))
    except (ArithmeticError, ValueError) as exc:
        log.warning("robustness cell (%g%%, %gs) failed: %s", noise, length, exc)
        return None
    return prob, np.array(incs)


def robustness_sweep(noise_levels, data_lengths, seed: int, settings: SweepSettings | None = None, jobs: int = 1) -> RobustnessGrid:
    """True-model posterior probability on Lorenz data over a noise x length grid.

    Each equation is sampled independently, so the probability of the whole
    true system is the product of the per-equation frequencies of the exact
    true mask.  Cells whose data generation or sampling fails get probability
    0 and a ``failed`` flag.
    """
    noise_levels = np.asarray(noise_levels, dtype=float)
    data_lengths = np.asarray(data_lengths, dtype=float)
    if noise_levels.size == 0 or data_lengths.size == 0:
        raise InputError("noise and length grids must be non-empty")
    settings = settings or SweepSettings()
    tasks = [
        (seed, i, j, noise, length, settings)
        for i, noise in enumerate(noise_levels)
        for j, length in enumerate(data_lengths)
    ]
    results = _map(_robustness_cell, tasks, jobs)
    shape = (noise_levels.size, data_lengths.size)
    cell = np.zeros(shape)
    failed = np.zeros(shape, dtype=bool)
    D = next((r[1].shape[1] for r in results if r is not None), 0)
    inclusion = np.full(shape + (3, D), np.nan)
    for (_, i, j, *_), res in zip(tasks, results):
        if res is None:
            failed[i, j] = True
        else:
            cell[i, j], inclusion[i, j] = res
    return RobustnessGrid(noise_levels, data_lengths, cell, inclusion, failed)
