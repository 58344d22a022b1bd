"""Flat-file artifacts: chain and trajectory CSVs, summaries, manifests."""

from __future__ import annotations

import csv
import hashlib
import json
import platform
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import InputError
from .models import ModelIndex


def _num(x) -> str:
    return "" if x is None or (isinstance(x, float) and np.isnan(x)) else repr(float(x))


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def chain_rows(chain, include_accepted: bool = True, raw: bool = True):
    params = chain.raw_params() if raw else chain.params
    for k, (it, m) in enumerate(zip(chain.iterations, chain.models())):
        row = [str(int(it))]
        if include_accepted:
            row.append(str(int(chain.accepted[k])))
        row += [_num(chain.sigma2[k]), m.hex]
        row += ["" if not chain.inclusion[k, j] else _num(params[k, j]) for j in range(chain.n_terms)]
        yield row


def write_chain_csv(path, chain, raw: bool = True) -> Path:
    """One row per retained sample; absent terms are empty fields."""
    path = Path(path)
    header = ["iteration", "accepted", "sigma2", "model_mask_hex"]
    header += [f"param_{j}" for j in range(chain.n_terms)]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(chain_rows(chain, raw=raw))
    return path


def write_ensemble_csv(path, members) -> Path:
    """Ensemble members in the chain layout, without the ``accepted`` column.

    ``sigma2`` is not defined for an ensemble member and is left empty.
    """
    members = np.asarray(members, dtype=float)
    D = members.shape[1]
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "sigma2", "model_mask_hex"] + [f"param_{j}" for j in range(D)])
        for k, row in enumerate(members):
            m = ModelIndex.from_bools(row != 0)
            w.writerow([str(k), "", m.hex] + [_num(v) if v != 0 else "" for v in row])
    return path


def read_chain_csv(path):
    """Parse a chain or ensemble CSV into (masks, params with NaN for absent, sigma2)."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        p0 = header.index("param_0") if "param_0" in header else len(header)
        D = len(header) - p0
        s_col = header.index("sigma2")
        h_col = header.index("model_mask_hex")
        masks, params, sigma2 = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise InputError(f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}")
            masks.append(ModelIndex.from_hex(row[h_col], D))
            params.append([float(v) if v else np.nan for v in row[p0:]])
            sigma2.append(float(row[s_col]) if row[s_col] else np.nan)
    return masks, np.array(params, dtype=float).reshape(len(masks), D), np.array(sigma2)


def write_trajectories_csv(path, fans) -> Path:
    path = Path(path)
    S = fans[0].n_states if fans else 0
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["draw_id", "t"] + [f"x_{s}" for s in range(S)] + ["diverged"])
        for d, fan in enumerate(fans):
            flag = str(int(fan.diverged))
            for t, x in zip(fan.t, fan.values):
                w.writerow([str(d), _num(t)] + [_num(v) for v in x] + [flag])
    return path


def write_table_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_num(v) if isinstance(v, (float, np.floating)) else str(v) for v in row])
    return path


def write_inclusion_csv(path, labels, columns: dict) -> Path:
    """``columns`` maps a column name to a per-term vector."""
    names = list(columns)
    rows = ([j, labels[j]] + [float(columns[n][j]) for n in names] for j in range(len(labels)))
    return write_table_csv(path, ["term", "label"] + names, rows)


def write_trace_csv(path, traces, index_name: str = "chain") -> Path:
    """``traces`` is (n_chains, n_iterations, D); one row per (chain, iteration)."""
    traces = np.asarray(traces)
    C, n, D = traces.shape
    rows = (
        [c, i] + [float(v) for v in traces[c, i]]
        for c in range(C) for i in range(n)
    )
    return write_table_csv(path, [index_name, "iteration"] + [f"param_{j}" for j in range(D)], rows)


def write_mse_csv(path, stats_by_method: dict) -> Path:
    rows = []
    for method, st in stats_by_method.items():
        for eq in range(st.median.size):
            rows.append([method, eq, float(st.median[eq]), float(st.mean[eq]), float(st.std[eq]), st.n_diverged])
    return write_table_csv(path, ["method", "equation", "median", "mean", "std", "n_diverged"], rows)


def write_robustness_csv(path, grid) -> Path:
    rows = (
        [float(noise), float(length), float(grid.cell[i, j]), int(grid.failed[i, j])]
        for i, noise in enumerate(grid.noise_levels)
        for j, length in enumerate(grid.data_lengths)
    )
    return write_table_csv(path, ["noise_pct", "duration_s", "true_model_prob", "failed"], rows)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


class Manifest:
    """Records every file written under an output directory.

    Artifacts are registered as they are written so a failed run still
    leaves a manifest describing the partial output.
    """

    NAME = "run_manifest.json"

    def __init__(self, output_dir, command: str, seeds: dict | None = None, inputs=None):
        self.output_dir = Path(output_dir)
        self.command = command
        self.seeds = dict(seeds or {})
        self.inputs = {str(p): sha256_file(p) for p in (inputs or [])}
        self.artifacts: dict[str, str] = {}
        self.status = "running"
        self.error = None

    def path(self, name: str) -> Path:
        return self.output_dir / name

    def add(self, path) -> Path:
        path = Path(path)
        self.artifacts[str(path.relative_to(self.output_dir))] = sha256_file(path)
        return path

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "status": self.status,
            "error": self.error,
            "seeds": self.seeds,
            "inputs": self.inputs,
            "artifacts": dict(sorted(self.artifacts.items())),
            "environment": {"python": platform.python_version(), "numpy": np.__version__},
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }

    def write(self) -> Path:
        return write_json(self.path(self.NAME), self.to_dict())
