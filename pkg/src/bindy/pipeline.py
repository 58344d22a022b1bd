"""End-to-end case-study runs, kept in memory so callers choose what to persist.

Every random choice is derived from one master seed:

====================  ============================
tag                   used for
====================  ============================
``DATA``              noise on generated data
``CHAIN``             sampler streams (chain id = equation)
``BASELINE``          E-SINDy bootstrap and bagging
``FAN_BINDY``         posterior draws for trajectories
``FAN_ESINDY``        ensemble members for trajectories
====================  ============================
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import PosteriorSummary, model_probability, summarize_chain, trajectory_mse_stats
from .cases import (
    differentiate,
    ingest_lynx_hare,
    legendre_data,
    lorenz_data,
    lorenz_true_models,
    lynx_hare_data,
    lynx_hare_true_models,
)
from .config import RunConfig
from .dynamics import integrate_models, simulate_posterior_fan
from .errors import BindyError, IngestionError
from .esindy import Ensemble, ensemble_inclusion_stats, ensemble_sindy, stlsq
from .library import build_polynomial_library, normalize_columns
from .models import ModelIndex
from .sampler import Chain, derive_seed, run_chain
from .signal import TimeSeries

DATA, CHAIN, BASELINE, FAN_BINDY, FAN_ESINDY = range(5)

LYNX_HARE_STEPS_PER_YEAR = 10


class StageError(BindyError):
    """An error raised inside a named pipeline stage."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@contextmanager
def stage(name: str):
    try:
        yield
    except StageError:
        raise
    except (BindyError, ArithmeticError, ValueError, OSError, np.linalg.LinAlgError) as exc:
        raise StageError(name, exc) from exc


@dataclass
class CaseResult:
    case: str
    labels: list
    chains: list
    summaries: list
    seeds: dict
    true_models: list | None = None
    ensemble: Ensemble | None = None
    stlsq_coefs: np.ndarray | None = None
    fans: dict = field(default_factory=dict)
    reference: TimeSeries | None = None
    mse: dict = field(default_factory=dict)
    mse_window: slice | None = None
    extras: dict = field(default_factory=dict)

    @property
    def n_equations(self) -> int:
        return len(self.chains)

    def true_model_probabilities(self):
        if self.true_models is None:
            return None
        return [model_probability(c, m) for c, m in zip(self.chains, self.true_models)]


def _chain_task(args):
    library, target, config, chain_id = args
    return run_chain(library, target, config, chain_id=chain_id)


def run_equations(library, targets, config, jobs: int = 1) -> list[Chain]:
    """One independent chain per target column, chain id = column index."""
    targets = np.asarray(targets, dtype=float)
    if targets.ndim == 1:
        targets = targets[:, None]
    tasks = [(library, targets[:, s], config, s) for s in range(targets.shape[1])]
    if jobs <= 1 or len(tasks) == 1:
        return [_chain_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(_chain_task, tasks))


def _seeds(seed: int) -> dict:
    return {
        "master": seed,
        "data": derive_seed(seed, DATA),
        "chain": derive_seed(seed, CHAIN),
        "baseline": derive_seed(seed, BASELINE),
        "fan_bindy": derive_seed(seed, FAN_BINDY),
        "fan_esindy": derive_seed(seed, FAN_ESINDY),
    }


def _sample(cfg: RunConfig, library, targets, seeds, jobs):
    with stage("sample"):
        chains = run_equations(library, targets, cfg.sampler_config(seed=seeds["chain"]), jobs)
    with stage("analysis"):
        summaries = [summarize_chain(c, library.labels) for c in chains]
    return chains, summaries


def _baseline(cfg: RunConfig, library, targets, seeds):
    if not cfg.baseline_enabled:
        return None, None
    with stage("baseline"):
        targets = np.asarray(targets, dtype=float)
        Y = targets[:, None] if targets.ndim == 1 else targets
        point = np.array([stlsq(library.design, Y[:, s], cfg.stlsq_config()) for s in range(Y.shape[1])])
        ens = ensemble_sindy(
            library.design, Y, cfg.stlsq_config(), cfg.ensemble_config(),
            np.random.default_rng(seeds["baseline"]),
        )
    scales = library.column_scales
    return Ensemble(ens.coefs / scales, ens.failed), point / scales


def _fans(cfg, result, library, x0, dt, n_steps, seeds):
    n_draws = int(cfg.raw["fan"]["n_draws"])
    with stage("simulate"):
        horizon = n_steps * dt
        result.fans["bindy"] = simulate_posterior_fan(
            result.chains, library.terms, x0, dt, horizon, n_draws,
            np.random.default_rng(seeds["fan_bindy"]),
        )
        if result.ensemble is not None:
            rng = np.random.default_rng(seeds["fan_esindy"])
            pick = rng.integers(result.ensemble.coefs.shape[0], size=n_draws)
            result.fans["esindy"] = integrate_models(library.terms, result.ensemble.coefs[pick], x0, dt, n_steps)


def run_legendre(cfg: RunConfig, jobs: int = 1) -> CaseResult:
    seeds = _seeds(cfg.seed)
    with stage("generate"):
        data = legendre_data(cfg.legendre_setup(), np.random.default_rng(seeds["data"]))
    chains, summaries = _sample(cfg, data.library, data.targets, seeds, jobs)
    ens, point = _baseline(cfg, data.library, data.targets, seeds)
    if ens is not None:
        ens = Ensemble(ens.coefs[:, 0, :], ens.failed)
    truth = [ModelIndex.from_bools(data.coefficients != 0)]
    return CaseResult(
        "legendre", data.library.labels, chains, summaries, seeds, truth, ens, point,
        extras={"coefficients": data.coefficients, "n_points": data.x.size},
    )


def run_lorenz(cfg: RunConfig, jobs: int = 1) -> CaseResult:
    seeds = _seeds(cfg.seed)
    setup = cfg.lorenz_setup()
    with stage("generate"):
        data = lorenz_data(setup, np.random.default_rng(seeds["data"]))
    chains, summaries = _sample(cfg, data.library, data.derivatives, seeds, jobs)
    ens, point = _baseline(cfg, data.library, data.derivatives, seeds)
    result = CaseResult(
        "lorenz", data.library.labels, chains, summaries, seeds,
        lorenz_true_models(data.library), ens, point,
    )
    _fans(cfg, result, data.library, setup.x0, setup.dt, len(data.observed) - 1, seeds)
    with stage("analysis"):
        result.reference = data.observed
        result.mse_window = slice(0, data.n_train)
        result.mse = {k: trajectory_mse_stats(v, data.observed, result.mse_window) for k, v in result.fans.items()}
    result.extras["n_train"] = data.n_train
    return result


def run_lynx_hare(cfg: RunConfig, jobs: int = 1) -> CaseResult:
    seeds = _seeds(cfg.seed)
    setup = cfg.lynx_hare_setup()
    with stage("ingest"):
        data = lynx_hare_data(ingest_lynx_hare(cfg.data_path), setup)
    chains, summaries = _sample(cfg, data.library, data.derivatives, seeds, jobs)
    ens, point = _baseline(cfg, data.library, data.derivatives, seeds)
    result = CaseResult(
        "lynxhare", data.library.labels, chains, summaries, seeds,
        lynx_hare_true_models(data.library), ens, point,
    )
    years = len(data.series) - 1 + setup.extrapolation_years
    dt = 1.0 / LYNX_HARE_STEPS_PER_YEAR
    _fans(cfg, result, data.library, data.series.values[0], dt, years * LYNX_HARE_STEPS_PER_YEAR, seeds)
    with stage("analysis"):
        t0 = data.series.t[0]
        for fan in result.fans.values():
            for k, f in enumerate(fan):
                fan[k] = TimeSeries(f.t + t0, f.values, f.diverged)
        # compare on the annual grid of the record
        annual = slice(0, len(data.series) * LYNX_HARE_STEPS_PER_YEAR, LYNX_HARE_STEPS_PER_YEAR)
        result.reference = data.series
        result.mse = {
            k: trajectory_mse_stats([TimeSeries(f.t[annual], f.values[annual], f.diverged) for f in v], data.series)
            for k, v in result.fans.items()
        }
    return result


def ingest_states_csv(path) -> TimeSeries:
    """Read a ``t,x_0,...,x_{S-1}`` CSV of uniformly sampled states."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip() != "t" or len(header) < 2:
            raise IngestionError(f"{path}: expected header 't,x_0,...'")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise IngestionError(f"{path}: row {lineno} is malformed: {row}") from exc
            if len(rows[-1]) != len(header):
                raise IngestionError(f"{path}: row {lineno} has {len(row)} fields")
    if len(rows) < 3:
        raise IngestionError(f"{path}: need at least three samples")
    a = np.array(rows)
    try:
        return TimeSeries(a[:, 0], a[:, 1:])
    except BindyError as exc:
        raise IngestionError(f"{path}: {exc}") from exc


def run_custom(cfg: RunConfig, jobs: int = 1) -> CaseResult:
    seeds = _seeds(cfg.seed)
    with stage("ingest"):
        series = ingest_states_csv(cfg.data_path)
    with stage("differentiate"):
        deriv, kept = differentiate(series, cfg.scheme, cfg.diff_config())
    with stage("library"):
        lib_cfg = cfg.raw["library"]
        library = build_polynomial_library(series.values[kept], int(lib_cfg["max_degree"]), bool(lib_cfg["include_constant"]))
        if cfg.normalize:
            library = normalize_columns(library)
    chains, summaries = _sample(cfg, library, deriv, seeds, jobs)
    ens, point = _baseline(cfg, library, deriv, seeds)
    result = CaseResult("custom", library.labels, chains, summaries, seeds, None, ens, point)
    _fans(cfg, result, library, series.values[0], series.dt, len(series) - 1, seeds)
    with stage("analysis"):
        for fan in result.fans.values():
            for k, f in enumerate(fan):
                fan[k] = TimeSeries(f.t + series.t[0], f.values, f.diverged)
        result.reference = series
        result.mse = {k: trajectory_mse_stats(v, series) for k, v in result.fans.items()}
    return result


RUNNERS = {"legendre": run_legendre, "lorenz": run_lorenz, "lynxhare": run_lynx_hare, "custom": run_custom}


def run_case(cfg: RunConfig, jobs: int = 1) -> CaseResult:
    return RUNNERS[cfg.case](cfg, jobs)


def summary_document(result: CaseResult) -> dict:
    doc = {
        "case": result.case,
        "labels": result.labels,
        "seeds": result.seeds,
        "equations": [],
    }
    probs = result.true_model_probabilities()
    for eq, (chain, summ) in enumerate(zip(result.chains, result.summaries)):
        entry = {"equation": eq, "acceptance_rate": chain.acceptance_rate, "bindy": summ.to_dict()}
        if probs is not None:
            entry["true_model"] = result.true_models[eq].hex
            entry["true_model_prob"] = probs[eq]
        if result.ensemble is not None:
            st = ensemble_inclusion_stats(result.ensemble.for_target(eq))
            entry["esindy"] = {
                "frequency": st.frequency.tolist(), "mean": st.mean.tolist(), "std": st.std.tolist(),
                "median": np.median(result.ensemble.for_target(eq), axis=0).tolist(),
                "n_failed": int(result.ensemble.failed.sum()),
            }
            entry["stlsq"] = result.stlsq_coefs[eq].tolist()
        doc["equations"].append(entry)
    if result.mse:
        doc["mse"] = {
            k: {"median": v.median.tolist(), "mean": v.mean.tolist(), "std": v.std.tolist(), "n_diverged": v.n_diverged}
            for k, v in result.mse.items()
        }
    for k, v in result.extras.items():
        doc[k] = v.tolist() if isinstance(v, np.ndarray) else v
    return doc


def inclusion_table(result: CaseResult):
    header = ["equation", "term", "label", "bindy_inclusion", "bindy_cond_mean", "bindy_cond_std",
              "bindy_marg_mean", "bindy_marg_std"]
    if result.ensemble is not None:
        header += ["esindy_frequency", "esindy_mean", "esindy_std"]
    rows = []
    for eq, summ in enumerate(result.summaries):
        st = ensemble_inclusion_stats(result.ensemble.for_target(eq)) if result.ensemble is not None else None
        for j, label in enumerate(result.labels):
            row = [eq, j, label, float(summ.inclusion_prob[j]), float(summ.cond_mean[j]), float(summ.cond_std[j]),
                   float(summ.marg_mean[j]), float(summ.marg_std[j])]
            if st is not None:
                row += [float(st.frequency[j]), float(st.mean[j]), float(st.std[j])]
            rows.append(row)
    return header, rows


__all__ = [
    "CaseResult", "PosteriorSummary", "StageError", "RUNNERS", "inclusion_table", "ingest_states_csv",
    "run_case", "run_custom", "run_equations", "run_legendre", "run_lorenz", "run_lynx_hare",
    "summary_document",
]
