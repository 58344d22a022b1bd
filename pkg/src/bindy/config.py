"""JSON run configuration with the case-study defaults.

A config file only needs the keys it changes; everything else falls back to
:data:`DEFAULTS`.  Unknown keys are rejected so typos do not pass silently.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

from .bayes import NoisePrior
from .cases import DIFF_SCHEMES, LEGENDRE_COEFFS, LegendreSetup, LorenzSetup, LynxHareSetup
from .dynamics import LORENZ_X0
from .errors import ConfigError
from .esindy import EnsembleConfig, StlsqConfig
from .models import model_prior_from_config
from .sampler import SamplerConfig
from .signal import SmoothedFDConfig

CASES = ("legendre", "lynxhare", "lorenz", "custom")

DEFAULTS = {
    "case": "lorenz",
    "seed": 0,
    "data_path": None,
    "output_dir": "bindy-output",
    "sampler": {
        "n_iterations": 6000,
        "burn_in": 1000,
        "initial_model": "full",
        "initial_sigma2": 1.0,
        "update_sigma2": True,
    },
    "param_prior_var": 1e3,
    "noise_prior": {"a0": 0.0, "b0": 0.0},
    "model_prior": "flat",
    "baseline": {
        "enabled": True,
        # None picks the case default: 0.1 legendre, 0.19 lynx-hare, 0.2 lorenz
        "threshold": None,
        "max_sweeps": 20,
        "ridge": 1e-5,
        "n_models": 5000,
        "data_bagging": True,
        "library_bagging": True,
        "n_candidates_dropped": 1,
    },
    # None entries take the per-case value from CASE_DEFAULTS
    "library": {"basis": None, "max_degree": 3, "include_constant": True, "normalize": None},
    "diff": {
        "scheme": None,
        "method": "smooth_then_difference",
        "difference_order": 2,
        "window": 5,
        "poly_order": 3,
        "trim": None,
    },
    "legendre": {"n_points": 50_000, "noise_pct": 5.0, "coefficients": list(LEGENDRE_COEFFS)},
    "lorenz": {
        "duration": 10.0,
        "extrapolation": 5.0,
        "dt": 0.01,
        "x0": list(LORENZ_X0),
        "noise_pct": 2.5,
        "noise_reference": "std",
    },
    "lynxhare": {"extrapolation_years": 10},
    "fan": {"n_draws": 200},
    "appendix": {
        "A": {"n_repeats": 100},
        "B": {"n_chains": 100, "n_iterations": 1000},
        "C": {
            "noise_levels": [1.0, 2.5, 5.0, 7.5, 10.0, 12.5, 15.0],
            "data_lengths": [1.0, 2.5, 5.0, 7.5, 10.0],
        },
    },
}

CASE_DEFAULTS = {
    "legendre": {"threshold": 0.1, "normalize": False, "basis": "legendre", "scheme": None},
    "lynxhare": {"threshold": 0.19, "normalize": True, "basis": "polynomial", "scheme": "central"},
    "lorenz": {"threshold": 0.2, "normalize": False, "basis": "polynomial", "scheme": "smoothed_fd"},
    "custom": {"threshold": 0.1, "normalize": False, "basis": "polynomial", "scheme": "smoothed_fd"},
}


def _merge(base: dict, override: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key '{where}{key}'")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key '{where}{key}' must be an object")
            out[key] = _merge(base[key], value, f"{where}{key}.")
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass
class RunConfig:
    raw: dict

    @classmethod
    def from_dict(cls, overrides: dict | None = None) -> RunConfig:
        raw = _merge(DEFAULTS, overrides or {})
        cfg = cls(raw)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> RunConfig:
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def with_overrides(self, **top) -> RunConfig:
        return RunConfig.from_dict({**self.raw, **{k: v for k, v in top.items() if v is not None}})

    def validate(self):
        if self.case not in CASES:
            raise ConfigError(f"case must be one of {CASES}, got {self.case!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.case in ("lynxhare", "custom") and not self.raw["data_path"]:
            raise ConfigError(f"the {self.case} case needs data_path")
        # building each section surfaces range errors early
        self.sampler_config()
        self.stlsq_config()
        self.ensemble_config()
        self.diff_config()
        basis = self.raw["library"]["basis"]
        if basis is not None and basis != CASE_DEFAULTS[self.case]["basis"]:
            raise ConfigError(f"the {self.case} case uses the {CASE_DEFAULTS[self.case]['basis']} basis")
        if self.case != "legendre" and self.scheme not in DIFF_SCHEMES:
            raise ConfigError(f"diff.scheme must be one of {DIFF_SCHEMES}")

    @property
    def case(self) -> str:
        return str(self.raw["case"]).lower()

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    @property
    def output_dir(self) -> Path:
        return Path(self.raw["output_dir"])

    @property
    def data_path(self) -> Path | None:
        p = self.raw["data_path"]
        return Path(p) if p else None

    def sampler_config(self, seed: int | None = None, **changes) -> SamplerConfig:
        s = self.raw["sampler"]
        np_ = self.raw["noise_prior"]
        kw = dict(
            n_iterations=int(s["n_iterations"]),
            burn_in=int(s["burn_in"]),
            seed=self.seed if seed is None else seed,
            initial_model=s["initial_model"],
            initial_sigma2=float(s["initial_sigma2"]),
            param_prior=float(self.raw["param_prior_var"]),
            noise_prior=NoisePrior(float(np_["a0"]), float(np_["b0"])),
            model_prior=model_prior_from_config(self.raw["model_prior"]),
            update_sigma2=bool(s["update_sigma2"]),
        )
        kw.update(changes)
        return SamplerConfig(**kw)

    @property
    def baseline_enabled(self) -> bool:
        return bool(self.raw["baseline"]["enabled"])

    def stlsq_config(self) -> StlsqConfig:
        b = self.raw["baseline"]
        thr = b["threshold"] if b["threshold"] is not None else CASE_DEFAULTS[self.case]["threshold"]
        return StlsqConfig(float(thr), int(b["max_sweeps"]), float(b["ridge"]))

    def ensemble_config(self) -> EnsembleConfig:
        b = self.raw["baseline"]
        return EnsembleConfig(
            int(b["n_models"]), bool(b["data_bagging"]), bool(b["library_bagging"]),
            int(b["n_candidates_dropped"]),
        )

    def diff_config(self) -> SmoothedFDConfig:
        d = self.raw["diff"]
        return SmoothedFDConfig(
            int(d["difference_order"]), int(d["window"]), int(d["poly_order"]),
            None if d["trim"] is None else int(d["trim"]), d["method"],
        )

    @property
    def normalize(self) -> bool:
        n = self.raw["library"]["normalize"]
        return CASE_DEFAULTS[self.case]["normalize"] if n is None else bool(n)

    @property
    def scheme(self) -> str:
        s = self.raw["diff"]["scheme"]
        return CASE_DEFAULTS[self.case]["scheme"] if s is None else s

    def legendre_setup(self) -> LegendreSetup:
        c = self.raw["legendre"]
        return LegendreSetup(int(c["n_points"]), float(c["noise_pct"]), tuple(float(v) for v in c["coefficients"]))

    def lorenz_setup(self) -> LorenzSetup:
        c = self.raw["lorenz"]
        lib = self.raw["library"]
        return LorenzSetup(
            float(c["duration"]), float(c["extrapolation"]), float(c["dt"]), tuple(c["x0"]),
            float(c["noise_pct"]), c["noise_reference"], int(lib["max_degree"]),
            bool(lib["include_constant"]), self.normalize, self.diff_config(), self.scheme,
        )

    def lynx_hare_setup(self) -> LynxHareSetup:
        lib = self.raw["library"]
        return LynxHareSetup(
            int(lib["max_degree"]), bool(lib["include_constant"]), self.normalize,
            int(self.raw["lynxhare"]["extrapolation_years"]), self.scheme, self.diff_config(),
        )

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)
