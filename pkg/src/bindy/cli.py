"""Command-line entry point: ``bindy run|appendix|oracle|baseline``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .analysis import (
    SweepSettings,
    empirical_model_distribution,
    exact_model_posterior,
    inclusion_from_distribution,
    parameterization_sweep,
    robustness_sweep,
    summarize_chain,
    total_variation,
    trace_report,
)
from .cases import legendre_data, oracle_problem
from .config import CASES, RunConfig
from .errors import BindyError, ConfigError
from .esindy import ensemble_inclusion_stats
from .models import FlatPrior
from .pipeline import (
    BASELINE,
    CHAIN,
    DATA,
    StageError,
    _baseline,
    inclusion_table,
    run_case,
    stage,
    summary_document,
)
from .sampler import SamplerConfig, derive_seed, run_chain, run_chains_parallel

log = logging.getLogger("bindy")

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


def _chain_echo(chain, labels, equation) -> dict:
    return {
        "equation": equation,
        "chain_id": chain.chain_id,
        "labels": list(labels),
        "column_scales": chain.column_scales.tolist(),
        "first_iteration": chain.first_iteration,
        "acceptance_rate": chain.acceptance_rate,
        "sampler": chain.config.to_dict(),
        "params_units": "raw",
    }


def write_case_artifacts(result, manifest: io.Manifest, cfg: RunConfig):
    with stage("write"):
        for eq, chain in enumerate(result.chains):
            manifest.add(io.write_chain_csv(manifest.path(f"chain_eq{eq}.csv"), chain))
            manifest.add(io.write_json(manifest.path(f"chain_eq{eq}.config.json"), _chain_echo(chain, result.labels, eq)))
            if result.ensemble is not None:
                manifest.add(io.write_ensemble_csv(manifest.path(f"ensemble_eq{eq}.csv"), result.ensemble.for_target(eq)))
        manifest.add(io.write_json(manifest.path("summary.json"), summary_document(result)))
        header, rows = inclusion_table(result)
        manifest.add(io.write_table_csv(manifest.path("inclusion.csv"), header, rows))
        traces = np.stack([c.coefficient_matrix() for c in result.chains])
        manifest.add(io.write_trace_csv(manifest.path("trace.csv"), traces, index_name="equation"))
        for name, fans in result.fans.items():
            manifest.add(io.write_trajectories_csv(manifest.path(f"trajectories_{name}.csv"), fans))
        if result.mse:
            manifest.add(io.write_mse_csv(manifest.path("mse_stats.csv"), result.mse))
        manifest.add(io.write_json(manifest.path("config.json"), cfg.to_dict()))


def _prepare_output(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    return path


def _finish(manifest: io.Manifest, exc: BaseException | None) -> int:
    if exc is None:
        manifest.status = "ok"
        manifest.write()
        return EXIT_OK
    manifest.status = "failed"
    manifest.error = str(exc)
    manifest.write()
    print(f"error: {exc}", file=sys.stderr)
    return EXIT_FAILED


def run_case_study(cfg: RunConfig, jobs: int = 1):
    """Run one case study and write its artifacts; returns (exit status, manifest)."""
    out = _prepare_output(cfg.output_dir)
    inputs = [cfg.data_path] if cfg.data_path and cfg.data_path.exists() else []
    manifest = io.Manifest(out, f"run --case {cfg.case}", {"master": cfg.seed}, inputs)
    try:
        t0 = time.perf_counter()
        result = run_case(cfg, jobs)
        manifest.seeds = result.seeds
        log.info("case %s sampled in %.1f s", cfg.case, time.perf_counter() - t0)
        write_case_artifacts(result, manifest, cfg)
    except StageError as exc:
        return _finish(manifest, exc), manifest
    return _finish(manifest, None), manifest


def _sweep_settings(cfg: RunConfig, **sampler_changes) -> SweepSettings:
    return SweepSettings(
        sampler=cfg.sampler_config(**sampler_changes),
        stlsq=cfg.stlsq_config(),
        ensemble=cfg.ensemble_config(),
        legendre=cfg.legendre_setup(),
        lorenz=cfg.lorenz_setup(),
    )


def run_appendix(which: str, cfg: RunConfig, jobs: int = 1):
    """Appendix studies: A parameterization sweep, B multi-chain traces, C robustness grid."""
    which = which.upper()
    out = _prepare_output(cfg.output_dir)
    manifest = io.Manifest(out, f"appendix {which}", {"master": cfg.seed})
    app = cfg.raw["appendix"]
    try:
        if which == "A":
            cfg = cfg.with_overrides(case="legendre")
            with stage("sweep"):
                sweep = parameterization_sweep(int(app["A"]["n_repeats"]), cfg.seed, _sweep_settings(cfg), jobs)
            with stage("write"):
                labels = [f"P{j}" for j in range(sweep.coefficients.shape[1])]
                manifest.add(io.write_inclusion_csv(manifest.path("inclusion.csv"), labels, {
                    "bindy_mean_inclusion": sweep.bindy_mean,
                    "esindy_mean_inclusion": sweep.esindy_mean,
                }))
                rows = [
                    [r, j, float(sweep.coefficients[r, j]), float(sweep.bindy_inclusion[r, j]), float(sweep.esindy_inclusion[r, j])]
                    for r in range(sweep.coefficients.shape[0]) for j in range(sweep.coefficients.shape[1])
                ]
                manifest.add(io.write_table_csv(
                    manifest.path("repeats.csv"),
                    ["repeat", "term", "coefficient", "bindy_inclusion", "esindy_inclusion"], rows,
                ))
        elif which == "B":
            cfg = cfg.with_overrides(case="legendre")
            b = app["B"]
            sampler = cfg.sampler_config(
                seed=derive_seed(cfg.seed, CHAIN), n_iterations=int(b["n_iterations"]), burn_in=0,
                initial_model="prior", keep_burn_in=True,
            )
            with stage("generate"):
                data = legendre_data(cfg.legendre_setup(), np.random.default_rng(derive_seed(cfg.seed, DATA)))
            with stage("sample"):
                chains = run_chains_parallel(data.library, data.targets, sampler, int(b["n_chains"]), jobs)
            with stage("analysis"):
                rep = trace_report(chains, discard=min(100, sampler.n_iterations // 2))
                incl = np.array([c.inclusion.mean(axis=0) for c in chains])
            with stage("write"):
                manifest.add(io.write_trace_csv(manifest.path("trace.csv"), rep.traces))
                manifest.add(io.write_inclusion_csv(manifest.path("inclusion.csv"), data.library.labels, {
                    "mean_inclusion": incl.mean(axis=0),
                    "inclusion_spread": incl.max(axis=0) - incl.min(axis=0),
                    "true_value": data.coefficients,
                    "shift_statistic": rep.shift,
                }))
                manifest.add(io.write_json(manifest.path("summary.json"), {
                    "converged": rep.converged, "threshold": rep.threshold,
                    "shift": rep.shift.tolist(), "n_chains": len(chains),
                    "n_iterations": sampler.n_iterations, "sampler": sampler.to_dict(),
                }))
        elif which == "C":
            c = app["C"]
            with stage("sweep"):
                grid = robustness_sweep(c["noise_levels"], c["data_lengths"], cfg.seed, _sweep_settings(cfg), jobs)
            with stage("write"):
                manifest.add(io.write_robustness_csv(manifest.path("robustness_grid.csv"), grid))
                rows = []
                for i, noise in enumerate(grid.noise_levels):
                    for j, length in enumerate(grid.data_lengths):
                        for eq in range(grid.inclusion.shape[2]):
                            rows.append([float(noise), float(length), eq] + [float(v) for v in grid.inclusion[i, j, eq]])
                D = grid.inclusion.shape[3]
                manifest.add(io.write_table_csv(
                    manifest.path("robustness_inclusion.csv"),
                    ["noise_pct", "duration_s", "equation"] + [f"term_{k}" for k in range(D)], rows,
                ))
        else:
            raise StageError("config", ConfigError(f"unknown appendix {which!r}; choose A, B or C"))
    except StageError as exc:
        return _finish(manifest, exc), manifest
    return _finish(manifest, None), manifest


def run_oracle(cfg: RunConfig, n_samples: int = 50_000):
    """Chain-vs-enumeration check on a small synthetic problem with known noise."""
    out = _prepare_output(cfg.output_dir)
    manifest = io.Manifest(out, "oracle", {"master": cfg.seed})
    try:
        with stage("generate"):
            prob = oracle_problem(np.random.default_rng(derive_seed(cfg.seed, DATA)))
        sampler = SamplerConfig(
            n_iterations=n_samples + 1000, burn_in=1000, seed=derive_seed(cfg.seed, CHAIN),
            initial_sigma2=prob.sigma2, update_sigma2=False, model_prior=FlatPrior(),
        )
        with stage("sample"):
            chain = run_chain(prob.design, prob.targets, sampler)
        with stage("analysis"):
            exact = exact_model_posterior(prob.design, prob.targets, sampler.param_prior_for(prob.design.shape[1]),
                                          FlatPrior(), prob.sigma2)
            emp = empirical_model_distribution(chain)
            tv = total_variation(exact, emp)
        with stage("write"):
            D = prob.design.shape[1]
            manifest.add(io.write_json(manifest.path("oracle.json"), {
                "n_terms": D, "n_samples": len(chain), "sigma2": prob.sigma2,
                "total_variation": tv, "passed": tv < 0.05,
                "exact_inclusion": inclusion_from_distribution(exact, D).tolist(),
                "chain_inclusion": summarize_chain(chain).inclusion_prob.tolist(),
            }))
            rows = [[f"{m:x}", float(exact[m]), float(emp[m])] for m in range(exact.size)]
            manifest.add(io.write_table_csv(manifest.path("model_distribution.csv"),
                                            ["model_mask_hex", "exact", "empirical"], rows))
    except StageError as exc:
        return _finish(manifest, exc), manifest
    print(f"total variation {tv:.4f} ({'PASS' if tv < 0.05 else 'FAIL'})")
    return _finish(manifest, None), manifest


def run_baseline(cfg: RunConfig):
    """STLSQ and E-SINDy only, for the configured case."""
    from .cases import ingest_lynx_hare, lorenz_data, lynx_hare_data

    out = _prepare_output(cfg.output_dir)
    inputs = [cfg.data_path] if cfg.data_path and cfg.data_path.exists() else []
    seeds = {"master": cfg.seed, "data": derive_seed(cfg.seed, DATA), "baseline": derive_seed(cfg.seed, BASELINE)}
    manifest = io.Manifest(out, f"baseline --case {cfg.case}", seeds, inputs)
    cfg = cfg.with_overrides(baseline={**cfg.raw["baseline"], "enabled": True})
    try:
        with stage("generate"):
            rng = np.random.default_rng(seeds["data"])
            if cfg.case == "legendre":
                d = legendre_data(cfg.legendre_setup(), rng)
                library, targets = d.library, d.targets
            elif cfg.case == "lorenz":
                d = lorenz_data(cfg.lorenz_setup(), rng)
                library, targets = d.library, d.derivatives
            elif cfg.case == "lynxhare":
                d = lynx_hare_data(ingest_lynx_hare(cfg.data_path), cfg.lynx_hare_setup())
                library, targets = d.library, d.derivatives
            else:
                raise ConfigError("the baseline subcommand supports legendre, lorenz and lynxhare")
        ens, point = _baseline(cfg, library, targets, seeds)
        with stage("write"):
            S = point.shape[0]
            rows = []
            for eq in range(S):
                members = ens.for_target(eq) if ens.coefs.ndim == 3 else ens.coefs[:, 0, :]
                manifest.add(io.write_ensemble_csv(manifest.path(f"ensemble_eq{eq}.csv"), members))
                st = ensemble_inclusion_stats(members)
                for j, label in enumerate(library.labels):
                    rows.append([eq, j, label, float(point[eq, j]), float(st.frequency[j]), float(st.mean[j]), float(st.std[j])])
            manifest.add(io.write_table_csv(
                manifest.path("inclusion.csv"),
                ["equation", "term", "label", "stlsq", "esindy_frequency", "esindy_mean", "esindy_std"], rows,
            ))
    except (StageError, ConfigError) as exc:
        if not isinstance(exc, StageError):
            exc = StageError("config", exc)
        return _finish(manifest, exc), manifest
    return _finish(manifest, None), manifest


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--case", choices=CASES, help="case study (overrides the config)")
    common.add_argument("--seed", type=int, help="master seed, unsigned 64-bit")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for chains and sweep cells")
    common.add_argument("--output", type=Path, help="output directory (overrides the config)")
    common.add_argument("--data", type=Path, help="input data file (overrides the config)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="bindy", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run a case study")
    app = sub.add_parser("appendix", parents=[common], help="run an appendix study")
    app.add_argument("which", choices=["A", "B", "C", "a", "b", "c"])
    orc = sub.add_parser("oracle", parents=[common], help="chain vs exact enumeration check")
    orc.add_argument("--samples", type=int, default=50_000)
    sub.add_parser("baseline", parents=[common], help="STLSQ / E-SINDy only")
    return parser


def load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig.from_dict()
    over = {}
    if args.case:
        over["case"] = args.case
    if args.seed is not None:
        over["seed"] = args.seed
    if args.output:
        over["output_dir"] = str(args.output)
    if args.data:
        over["data_path"] = str(args.data)
    return RunConfig.from_dict({**cfg.raw, **over}) if over else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args)
    except (BindyError, ValueError) as exc:
        print(f"error: [config] {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.command == "run":
        status, manifest = run_case_study(cfg, args.jobs)
    elif args.command == "appendix":
        status, manifest = run_appendix(args.which, cfg, args.jobs)
    elif args.command == "oracle":
        status, manifest = run_oracle(cfg, args.samples)
    else:
        status, manifest = run_baseline(cfg)
    if status == EXIT_OK:
        print(json.dumps({"status": "ok", "output": str(manifest.output_dir),
                          "artifacts": sorted(manifest.artifacts)}, indent=2))
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
