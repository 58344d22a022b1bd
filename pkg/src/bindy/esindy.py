"""Sequentially thresholded least squares and its bootstrap ensemble."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError, NumericalError


@dataclass(frozen=True)
class StlsqConfig:
    threshold: float = 0.1
    max_sweeps: int = 20
    ridge: float = 1e-5

    def __post_init__(self):
        if self.threshold < 0 or self.ridge < 0:
            raise ConfigError("threshold and ridge must be non-negative")
        if self.max_sweeps < 1:
            raise ConfigError("max_sweeps must be >= 1")


@dataclass(frozen=True)
class EnsembleConfig:
    n_models: int = 5000
    data_bagging: bool = True
    library_bagging: bool = True
    n_candidates_dropped: int = 1

    def __post_init__(self):
        if self.n_models < 1:
            raise ConfigError("n_models must be >= 1")
        if self.n_candidates_dropped < 0:
            raise ConfigError("n_candidates_dropped must be non-negative")


def _solve(gram, xty, ridge):
    if ridge > 0:
        return np.linalg.solve(gram + ridge * np.eye(gram.shape[0]), xty)
    try:
        cond = np.linalg.cond(gram)
    except np.linalg.LinAlgError:
        cond = np.inf
    if not np.isfinite(cond) or cond > 1e14:
        raise NumericalError("active-set normal equations are singular; use ridge > 0")
    return np.linalg.solve(gram, xty)


def stlsq_from_gram(gram, xty, config: StlsqConfig) -> np.ndarray:
    """STLSQ on the normal equations ``gram`` = X^T X, ``xty`` = X^T y."""
    D = xty.shape[0]
    active = np.ones(D, dtype=bool)
    coef = np.zeros(D)
    for _ in range(config.max_sweeps):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            return np.zeros(D)
        coef = np.zeros(D)
        coef[idx] = _solve(gram[np.ix_(idx, idx)], xty[idx], config.ridge)
        keep = active & (np.abs(coef) >= config.threshold)
        coef[~keep] = 0.0
        if np.array_equal(keep, active):
            return coef
        active = keep
    # sweep budget exhausted: refit on the last support
    idx = np.flatnonzero(active)
    coef = np.zeros(D)
    if idx.size:
        coef[idx] = _solve(gram[np.ix_(idx, idx)], xty[idx], config.ridge)
    return coef


def stlsq(design, targets, config: StlsqConfig = StlsqConfig()) -> np.ndarray:
    """Least squares on the active set, zero everything below the threshold, repeat.

    Stops when the support no longer changes or after ``max_sweeps`` fits.
    An all-zero result is legal.
    """
    design = np.asarray(design, dtype=float)
    targets = np.asarray(targets, dtype=float).ravel()
    if design.ndim != 2 or design.shape[0] < 1 or design.shape[1] < 1:
        raise InputError("design must be a non-empty matrix")
    if design.shape[0] != targets.shape[0]:
        raise InputError("design and targets row counts differ")
    return stlsq_from_gram(design.T @ design, design.T @ targets, config)


@dataclass(frozen=True, eq=False)
class Ensemble:
    """``coefs`` is (n_models, D) for one target, (n_models, S, D) for S targets."""

    coefs: np.ndarray
    failed: np.ndarray

    def for_target(self, s: int) -> np.ndarray:
        return self.coefs if self.coefs.ndim == 2 else self.coefs[:, s, :]


def ensemble_sindy(design, targets, stlsq_config: StlsqConfig, ensemble_config: EnsembleConfig, rng) -> Ensemble:
    """Bagged STLSQ: bootstrap rows and/or drop library columns per member.

    With several target columns each member shares its bootstrap rows and
    dropped columns across targets, so a member is a whole system model.
    """
    design = np.asarray(design, dtype=float)
    targets = np.asarray(targets, dtype=float)
    single = targets.ndim == 1
    Y = targets[:, None] if single else targets
    N, D = design.shape
    if Y.shape[0] != N:
        raise InputError("design and targets row counts differ")
    n_drop = ensemble_config.n_candidates_dropped if ensemble_config.library_bagging else 0
    if n_drop >= D:
        raise ConfigError("cannot drop every library column")
    S = Y.shape[1]
    coefs = np.zeros((ensemble_config.n_models, S, D))
    failed = np.zeros(ensemble_config.n_models, dtype=bool)

    for k in range(ensemble_config.n_models):
        if ensemble_config.data_bagging:
            counts = np.bincount(rng.integers(N, size=N), minlength=N).astype(float)
        else:
            counts = None
        keep = np.ones(D, dtype=bool)
        if n_drop:
            keep[rng.choice(D, size=n_drop, replace=False)] = False
        X = design[:, keep]
        Xw = X if counts is None else X * counts[:, None]
        gram = Xw.T @ X
        xty = Xw.T @ Y
        try:
            for s in range(S):
                coefs[k, s, keep] = stlsq_from_gram(gram, xty[:, s], stlsq_config)
        except (NumericalError, np.linalg.LinAlgError):
            coefs[k] = 0.0
            failed[k] = True

    return Ensemble(coefs[:, 0, :] if single else coefs, failed)


@dataclass(frozen=True, eq=False)
class InclusionStats:
    frequency: np.ndarray
    mean: np.ndarray
    std: np.ndarray


def ensemble_inclusion_stats(members) -> InclusionStats:
    """Per-term inclusion frequency and mean/std over all members, zeros included."""
    members = np.asarray(members, dtype=float)
    if members.ndim != 2 or members.shape[0] < 1:
        raise InputError("need a non-empty (n_members, D) array")
    return InclusionStats(
        (members != 0).mean(axis=0), members.mean(axis=0), members.std(axis=0)
    )
