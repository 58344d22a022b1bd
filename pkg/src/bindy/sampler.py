"""Reversible-jump Gibbs sampler over (model, coefficients, noise variance).

Each iteration proposes a single-term flip of the current model, accepts it
with the ratio of marginal model posteriors (the coefficients are integrated
out analytically, so they never enter the decision), draws coefficients
for whichever model is current afterwards, and finishes with an exact
inverse-gamma update of the noise variance.

Every chain owns three random streams spawned from one seed: jump
proposals, accept/reject uniforms, and coefficient/noise draws.  Holding
two fixed while varying the third is what the property tests rely on.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .bayes import (
    NoisePrior,
    ParamPrior,
    draw_noise_variance,
    evidence_from_posterior,
    posterior_from_gram,
    sample_parameters,
)
from .errors import ConfigError, InputError, NumericalError
from .library import TermLibrary
from .models import FlatPrior, ModelIndex, propose_bitflip

log = logging.getLogger(__name__)

INITIAL_MODELS = ("full", "empty", "prior")


@dataclass
class SamplerConfig:
    n_iterations: int = 6000
    burn_in: int = 1000
    seed: int = 0
    initial_model: str = "full"
    initial_sigma2: float = 1.0
    param_prior: float | ParamPrior = 1e3
    noise_prior: NoisePrior = field(default_factory=NoisePrior)
    model_prior: object = field(default_factory=FlatPrior)
    # False holds sigma2 at initial_sigma2 (known-noise setting)
    update_sigma2: bool = True
    keep_burn_in: bool = False

    def __post_init__(self):
        if self.n_iterations < 1:
            raise ConfigError("n_iterations must be >= 1")
        if not 0 <= self.burn_in < self.n_iterations:
            raise ConfigError("burn_in must satisfy 0 <= burn_in < n_iterations")
        if self.initial_model not in INITIAL_MODELS:
            raise ConfigError(f"initial_model must be one of {INITIAL_MODELS}")
        if not self.initial_sigma2 > 0:
            raise ConfigError("initial_sigma2 must be positive")

    def param_prior_for(self, n_terms: int) -> ParamPrior:
        if isinstance(self.param_prior, ParamPrior):
            if self.param_prior.var0_diag.size != n_terms:
                raise ConfigError("parameter prior length does not match the library")
            return self.param_prior
        return ParamPrior.isotropic(n_terms, self.param_prior)

    def to_dict(self) -> dict:
        out = asdict(self)
        if isinstance(self.param_prior, ParamPrior):
            out["param_prior"] = {
                "mean0": self.param_prior.mean0.tolist(),
                "var0_diag": self.param_prior.var0_diag.tolist(),
            }
        out["noise_prior"] = {"a0": self.noise_prior.a0, "b0": self.noise_prior.b0}
        out["model_prior"] = self.model_prior.to_config()
        return out


class Streams(NamedTuple):
    jump: np.random.Generator
    accept: np.random.Generator
    draw: np.random.Generator


def derive_seed(seed: int, *tags: int) -> int:
    """A 64-bit seed for the sub-task labelled ``tags`` under a master ``seed``."""
    return int(np.random.SeedSequence([seed, *tags]).generate_state(1, dtype=np.uint64)[0])


def chain_streams(seed: int, chain_id: int = 0) -> Streams:
    """The three independent generators of chain ``chain_id`` under ``seed``."""
    ss = np.random.SeedSequence(seed, spawn_key=(chain_id,))
    return Streams(*(np.random.default_rng(s) for s in ss.spawn(3)))


class LinearProblem:
    """Design matrix and targets with the sufficient statistics the sampler reuses."""

    def __init__(self, design, targets):
        design = np.asarray(design, dtype=float)
        targets = np.asarray(targets, dtype=float).ravel()
        if design.ndim != 2 or design.shape[1] < 1:
            raise InputError("the library must have at least one column")
        if design.shape[0] != targets.shape[0] or targets.size < 1:
            raise InputError(
                f"design has {design.shape[0]} rows but there are {targets.shape[0]} targets"
            )
        if not (np.all(np.isfinite(design)) and np.all(np.isfinite(targets))):
            raise InputError("design or targets contain non-finite values")
        self.design = design
        self.targets = targets
        self.gram = design.T @ design
        self.xty = design.T @ targets
        self.yty = float(targets @ targets)

    @property
    def n_samples(self) -> int:
        return self.design.shape[0]

    @property
    def n_terms(self) -> int:
        return self.design.shape[1]

    def posterior(self, m: ModelIndex, sigma2: float, prior: ParamPrior):
        idx = m.indices
        return posterior_from_gram(
            self.gram[np.ix_(idx, idx)], self.xty[idx], sigma2, prior.restrict(idx), model=m.hex
        )

    def log_evidence(self, m: ModelIndex, sigma2: float, prior: ParamPrior, log_prior_m: float = 0.0):
        post = self.posterior(m, sigma2, prior)
        return evidence_from_posterior(post, prior.restrict(m.indices), log_prior_m), post

    def rss(self, m: ModelIndex, xi) -> float:
        idx = m.indices
        if idx.size == 0:
            return self.yty
        rss = self.yty - 2.0 * float(xi @ self.xty[idx]) + float(xi @ self.gram[np.ix_(idx, idx)] @ xi)
        # the expanded form loses precision when the fit is nearly exact
        if rss < 1e-8 * self.yty:
            r = self.targets - self.design[:, idx] @ xi
            rss = float(r @ r)
        return rss


class StepResult(NamedTuple):
    model: ModelIndex
    params: np.ndarray
    sigma2: float
    accepted: bool
    log_alpha: float


def bindy_step(
    model: ModelIndex,
    sigma2: float,
    problem: LinearProblem,
    config: SamplerConfig,
    streams: Streams,
    *,
    param_prior: ParamPrior | None = None,
    proposal: ModelIndex | None = None,
    iteration: int | None = None,
) -> StepResult:
    """One jump move, coefficient draw and noise-variance Gibbs update.

    ``proposal`` bypasses the bit-flip kernel; it exists so tests can force
    a particular move.
    """
    prior = param_prior if param_prior is not None else config.param_prior_for(problem.n_terms)
    try:
        if proposal is None:
            proposal, log_jump = propose_bitflip(model, streams.jump)
        else:
            log_jump = 0.0
        ev_cur, post_cur = problem.log_evidence(model, sigma2, prior, config.model_prior.log_prob(model))
        ev_new, post_new = problem.log_evidence(
            proposal, sigma2, prior, config.model_prior.log_prob(proposal)
        )
        log_alpha = ev_new - ev_cur + log_jump
        accepted = bool(np.log(streams.accept.random()) < log_alpha)
        if accepted:
            model, post = proposal, post_new
        else:
            post = post_cur
        xi = sample_parameters(post, streams.draw)
        if config.update_sigma2:
            sigma2 = draw_noise_variance(
                problem.rss(model, xi), problem.n_samples, config.noise_prior, streams.draw
            )
    except NumericalError as exc:
        raise NumericalError(str(exc), model=model.hex, iteration=iteration) from exc
    return StepResult(model, xi, sigma2, accepted, log_alpha)


@dataclass(frozen=True)
class ChainSample:
    model: ModelIndex
    params: np.ndarray
    sigma2: float
    accepted: bool


@dataclass(frozen=True, eq=False)
class Chain:
    """Retained samples stored column-wise.

    ``params`` has one column per library term, NaN where the term is absent.
    Coefficients are in the units of the design the chain was run on;
    ``column_scales`` maps them back to raw units.
    """

    inclusion: np.ndarray
    params: np.ndarray
    sigma2: np.ndarray
    accepted: np.ndarray
    acceptance_rate: float
    config: SamplerConfig
    column_scales: np.ndarray
    first_iteration: int = 0
    chain_id: int = 0

    def __len__(self):
        return self.inclusion.shape[0]

    @property
    def n_terms(self) -> int:
        return self.inclusion.shape[1]

    @property
    def iterations(self) -> np.ndarray:
        return np.arange(self.first_iteration, self.first_iteration + len(self))

    def models(self) -> list[ModelIndex]:
        weights = [1 << i for i in range(self.n_terms)]
        return [
            ModelIndex(sum(w for w, b in zip(weights, row) if b), self.n_terms)
            for row in self.inclusion
        ]

    @property
    def samples(self) -> list[ChainSample]:
        return [
            ChainSample(m, p[m.indices], float(s), bool(a))
            for m, p, s, a in zip(self.models(), self.params, self.sigma2, self.accepted)
        ]

    def raw_params(self) -> np.ndarray:
        return self.params / self.column_scales

    def coefficient_matrix(self, raw: bool = True) -> np.ndarray:
        """Coefficients with absent terms as 0."""
        p = self.raw_params() if raw else self.params
        return np.where(self.inclusion, p, 0.0)


def _unpack(design):
    if isinstance(design, TermLibrary):
        return design.design, design.column_scales
    return design, None


def _initial_model(config: SamplerConfig, n_terms: int, streams: Streams) -> ModelIndex:
    if config.initial_model == "full":
        return ModelIndex.full(n_terms)
    if config.initial_model == "empty":
        return ModelIndex.empty(n_terms)
    return config.model_prior.sample(n_terms, streams.jump)


def run_chain(design, targets, config: SamplerConfig, *, column_scales=None, chain_id: int = 0) -> Chain:
    """Run ``config.n_iterations`` steps and return the retained samples.

    ``design`` may be a plain matrix or a :class:`TermLibrary`, in which case
    its column scales are carried onto the chain.
    """
    design, lib_scales = _unpack(design)
    problem = LinearProblem(design, targets)
    D = problem.n_terms
    if column_scales is None:
        column_scales = lib_scales if lib_scales is not None else np.ones(D)
    streams = chain_streams(config.seed, chain_id)
    prior = config.param_prior_for(D)

    model = _initial_model(config, D, streams)
    sigma2 = float(config.initial_sigma2)
    start = 0 if config.keep_burn_in else config.burn_in
    n_keep = config.n_iterations - start
    inclusion = np.zeros((n_keep, D), dtype=bool)
    params = np.full((n_keep, D), np.nan)
    sigma2s = np.empty(n_keep)
    accepted = np.zeros(n_keep, dtype=bool)
    n_accepted = 0

    for it in range(config.n_iterations):
        step = bindy_step(model, sigma2, problem, config, streams, param_prior=prior, iteration=it)
        model, sigma2 = step.model, step.sigma2
        n_accepted += step.accepted
        k = it - start
        if k >= 0:
            idx = model.indices
            inclusion[k, idx] = True
            params[k, idx] = step.params
            sigma2s[k] = sigma2
            accepted[k] = step.accepted

    rate = n_accepted / config.n_iterations
    log.debug("chain %d finished: acceptance rate %.3f", chain_id, rate)
    return Chain(
        inclusion, params, sigma2s, accepted, rate, config,
        np.asarray(column_scales, dtype=float), start, chain_id,
    )


def _run_one(args):
    design, targets, config, column_scales, chain_id = args
    return run_chain(design, targets, config, column_scales=column_scales, chain_id=chain_id)


def run_chains_parallel(design, targets, config: SamplerConfig, n_chains: int, jobs: int = 1, *, column_scales=None):
    """Independent chains 0..n_chains-1; output does not depend on ``jobs``."""
    if n_chains < 1:
        raise ConfigError("n_chains must be >= 1")
    design, lib_scales = _unpack(design)
    if column_scales is None:
        column_scales = lib_scales
    tasks = [(design, targets, config, column_scales, k) for k in range(n_chains)]
    if jobs <= 1:
        return [_run_one(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_one, tasks))
