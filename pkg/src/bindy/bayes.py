"""Conjugate Gaussian linear-model machinery.

Everything here works from the precision matrix
``P = Theta_m^T Theta_m / sigma2 + diag(1 / var0_m)`` and its Cholesky
factor; covariances are never formed explicitly on the hot path.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import ConfigError, DegeneratePosteriorError, InputError, NumericalError

JITTER_START = 1e-10
JITTER_STOP = 1e-4


@dataclass(frozen=True, eq=False)
class ParamPrior:
    """Independent Gaussian prior over the full-library coefficient vector."""

    mean0: np.ndarray
    var0_diag: np.ndarray

    def __post_init__(self):
        mean0 = np.asarray(self.mean0, dtype=float)
        var0 = np.asarray(self.var0_diag, dtype=float)
        if mean0.shape != var0.shape or mean0.ndim != 1:
            raise ConfigError("mean0 and var0_diag must be vectors of equal length")
        if not np.all(var0 > 0):
            raise ConfigError("prior variances must be strictly positive")
        object.__setattr__(self, "mean0", mean0)
        object.__setattr__(self, "var0_diag", var0)

    @classmethod
    def isotropic(cls, n_terms: int, var: float = 1e3) -> ParamPrior:
        return cls(np.zeros(n_terms), np.full(n_terms, float(var)))

    def restrict(self, idx) -> ParamPrior:
        return ParamPrior(self.mean0[idx], self.var0_diag[idx])

    @property
    def is_zero_mean(self) -> bool:
        return not np.any(self.mean0)


@dataclass(frozen=True)
class NoisePrior:
    """Inverse-gamma prior IG(a0, b0) on the noise variance; (0, 0) is improper."""

    a0: float = 0.0
    b0: float = 0.0

    def __post_init__(self):
        if self.a0 < 0 or self.b0 < 0:
            raise ConfigError("inverse-gamma prior parameters must be non-negative")

    @property
    def is_proper(self) -> bool:
        return self.a0 > 0 and self.b0 > 0

    def sample(self, rng) -> float:
        if not self.is_proper:
            raise DegeneratePosteriorError(
                f"cannot draw from the improper noise prior IG({self.a0}, {self.b0})"
            )
        return _inverse_gamma(self.a0, self.b0, rng)


@dataclass(frozen=True, eq=False)
class GaussianParamPosterior:
    """N(mean, Sigma) with Sigma^{-1} = prec_cholesky @ prec_cholesky.T."""

    mean: np.ndarray
    prec_cholesky: np.ndarray
    log_det_cov: float
    quad_form: float

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @cached_property
    def cov(self) -> np.ndarray:
        return cho_solve((self.prec_cholesky, True), np.eye(self.dim))

    @cached_property
    def cov_cholesky(self) -> np.ndarray:
        """Lower-triangular L with L @ L.T == cov."""
        return np.linalg.cholesky(self.cov)


_EMPTY_POSTERIOR = GaussianParamPosterior(np.zeros(0), np.zeros((0, 0)), 0.0, 0.0)


def _cholesky_with_jitter(prec, model=None):
    try:
        return np.linalg.cholesky(prec)
    except np.linalg.LinAlgError:
        pass
    scale = float(np.mean(np.diag(prec)))
    jitter = JITTER_START
    while jitter <= JITTER_STOP * (1 + 1e-9):
        try:
            return np.linalg.cholesky(prec + jitter * scale * np.eye(prec.shape[0]))
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise NumericalError("precision matrix is not positive definite after jitter", model=model)


def posterior_from_gram(gram_m, xty_m, sigma2, prior_m: ParamPrior, model=None):
    """Conjugate update from sufficient statistics ``Theta_m^T Theta_m`` and ``Theta_m^T y``."""
    d = xty_m.shape[0]
    if d == 0:
        return _EMPTY_POSTERIOR
    prec = gram_m / sigma2
    prec[np.diag_indices(d)] += 1.0 / prior_m.var0_diag
    chol = _cholesky_with_jitter(prec, model)
    rhs = xty_m / sigma2
    if not prior_m.is_zero_mean:
        rhs = rhs + prior_m.mean0 / prior_m.var0_diag
    # w = L^{-1} rhs  =>  mean = L^{-T} w,  mean^T P mean = |w|^2
    w = solve_triangular(chol, rhs, lower=True, check_finite=False)
    mean = solve_triangular(chol, w, lower=True, trans="T", check_finite=False)
    log_det_cov = -2.0 * float(np.sum(np.log(np.diag(chol))))
    return GaussianParamPosterior(mean, chol, log_det_cov, float(w @ w))


def conjugate_update(design_m, targets, sigma2: float, prior_m: ParamPrior) -> GaussianParamPosterior:
    """Exact Gaussian posterior of the coefficients of one model given sigma2."""
    design_m = np.asarray(design_m, dtype=float)
    targets = np.asarray(targets, dtype=float).ravel()
    if design_m.ndim != 2 or design_m.shape[0] != targets.shape[0] or targets.size < 1:
        raise InputError("design and targets must have matching, non-zero row counts")
    if not sigma2 > 0:
        raise InputError("sigma2 must be positive")
    if design_m.shape[1] != prior_m.var0_diag.shape[0]:
        raise InputError("prior restriction does not match the design columns")
    return posterior_from_gram(design_m.T @ design_m, design_m.T @ targets, sigma2, prior_m)


def evidence_from_posterior(post: GaussianParamPosterior, prior_m: ParamPrior, log_prior_m: float) -> float:
    return (
        log_prior_m
        - 0.5 * float(np.sum(np.log(prior_m.var0_diag)))
        + 0.5 * post.log_det_cov
        + 0.5 * post.quad_form
    )


def log_model_evidence(design_m, targets, sigma2, prior_m: ParamPrior, log_prior_m: float = 0.0) -> float:
    """Log of the model-dependent part of p(m | data, sigma2).

    Terms shared by every model (the Gaussian normalizer and y^T y / sigma2)
    are left out, so only differences between models are meaningful.
    """
    if not prior_m.is_zero_mean:
        raise ConfigError("model evidence is only implemented for zero-mean parameter priors")
    design_m = np.asarray(design_m, dtype=float)
    if design_m.ndim == 2 and design_m.shape[1] == 0:
        return float(log_prior_m)
    post = conjugate_update(design_m, targets, sigma2, prior_m)
    return evidence_from_posterior(post, prior_m, log_prior_m)


def sample_parameters(post: GaussianParamPosterior, rng) -> np.ndarray:
    if post.dim == 0:
        return np.zeros(0)
    z = rng.standard_normal(post.dim)
    return post.mean + solve_triangular(post.prec_cholesky, z, lower=True, trans="T", check_finite=False)


def noise_posterior(rss: float, n: int, noise_prior: NoisePrior) -> tuple[float, float]:
    """Shape and scale of the inverse-gamma conditional of sigma2."""
    return noise_prior.a0 + 0.5 * n, noise_prior.b0 + 0.5 * rss


def _inverse_gamma(a, b, rng):
    return b / rng.standard_gamma(a)


def draw_noise_variance(rss: float, n: int, noise_prior: NoisePrior, rng) -> float:
    a, b = noise_posterior(rss, n, noise_prior)
    if not (a > 0 and b > 0):
        raise DegeneratePosteriorError(f"inverse-gamma posterior IG({a}, {b}) is degenerate")
    return _inverse_gamma(a, b, rng)


def gibbs_noise_update(residuals, noise_prior: NoisePrior, rng) -> float:
    """One exact draw of sigma2 from IG(a0 + n/2, b0 + sum(r^2)/2)."""
    residuals = np.asarray(residuals, dtype=float).ravel()
    if residuals.size < 1:
        raise InputError("need at least one residual")
    if not np.all(np.isfinite(residuals)):
        raise InputError("residuals contain non-finite values")
    return draw_noise_variance(float(residuals @ residuals), residuals.size, noise_prior, rng)
