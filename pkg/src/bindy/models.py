"""Model structures as column bitmasks, model-space priors and the jump kernel."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError, InputError

MAX_ENUMERATION_TERMS = 20


@dataclass(frozen=True)
class ModelIndex:
    """A subset of library columns: bit ``i`` of ``mask`` set means term ``i`` is in."""

    mask: int
    n_terms: int

    def __post_init__(self):
        if self.n_terms < 0 or self.mask < 0 or self.mask >> self.n_terms:
            raise InputError(f"mask {self.mask:#x} does not fit in {self.n_terms} terms")

    @classmethod
    def full(cls, n_terms: int) -> ModelIndex:
        return cls((1 << n_terms) - 1, n_terms)

    @classmethod
    def empty(cls, n_terms: int) -> ModelIndex:
        return cls(0, n_terms)

    @classmethod
    def from_indices(cls, indices, n_terms: int) -> ModelIndex:
        mask = 0
        for i in indices:
            mask |= 1 << int(i)
        return cls(mask, n_terms)

    @classmethod
    def from_bools(cls, bits) -> ModelIndex:
        bits = np.asarray(bits, dtype=bool)
        return cls.from_indices(np.flatnonzero(bits), bits.size)

    @classmethod
    def from_hex(cls, text: str, n_terms: int) -> ModelIndex:
        return cls(int(text, 16), n_terms)

    @property
    def d(self) -> int:
        return bin(self.mask).count("1")

    @cached_property
    def indices(self) -> np.ndarray:
        return np.array([i for i in range(self.n_terms) if self.mask >> i & 1], dtype=np.intp)

    def bools(self) -> np.ndarray:
        out = np.zeros(self.n_terms, dtype=bool)
        out[self.indices] = True
        return out

    def __contains__(self, i) -> bool:
        return bool(self.mask >> int(i) & 1)

    def flip(self, i: int) -> ModelIndex:
        return ModelIndex(self.mask ^ (1 << int(i)), self.n_terms)

    @property
    def hex(self) -> str:
        return format(self.mask, "x")


class FlatPrior:
    """p(m) proportional to 1 over every subset, the empty model included."""

    def log_prob(self, m: ModelIndex) -> float:
        return 0.0

    def sample(self, n_terms, rng) -> ModelIndex:
        return ModelIndex.from_bools(rng.random(n_terms) < 0.5)

    def to_config(self):
        return "flat"


class GeometricPrior:
    """p(m) = (1 - theta)^d * theta, d being the number of included terms."""

    def __init__(self, theta: float):
        if not 0.0 < theta < 1.0:
            raise ConfigError(f"geometric prior needs theta in (0, 1), got {theta}")
        self.theta = float(theta)
        self._log_keep = np.log1p(-self.theta)
        self._log_theta = np.log(self.theta)

    def log_prob(self, m: ModelIndex) -> float:
        return m.d * self._log_keep + self._log_theta

    def sample(self, n_terms, rng) -> ModelIndex:
        # weight (1-theta)^d per mask factorizes into independent bits
        p = (1.0 - self.theta) / (2.0 - self.theta)
        return ModelIndex.from_bools(rng.random(n_terms) < p)

    def to_config(self):
        return {"geometric": self.theta}


class PerTermPrior:
    """Independent inclusion probability for every library term."""

    def __init__(self, p):
        p = np.asarray(p, dtype=float)
        if p.ndim != 1 or not np.all((p > 0.0) & (p < 1.0)):
            raise ConfigError("per-term inclusion probabilities must lie in (0, 1)")
        self.p = p
        self._log_in = np.log(p)
        self._log_out = np.log1p(-p)
        self._base = float(self._log_out.sum())

    def log_prob(self, m: ModelIndex) -> float:
        if m.n_terms != self.p.size:
            raise ConfigError(f"per-term prior has {self.p.size} entries, model has {m.n_terms} terms")
        idx = m.indices
        return self._base + float(np.sum(self._log_in[idx] - self._log_out[idx]))

    def sample(self, n_terms, rng) -> ModelIndex:
        return ModelIndex.from_bools(rng.random(n_terms) < self.p)

    def to_config(self):
        return {"per_term": self.p.tolist()}


def model_prior_from_config(spec):
    """``"flat"``, ``{"geometric": theta}`` or ``{"per_term": [...]}``."""
    if spec is None or spec == "flat":
        return FlatPrior()
    if isinstance(spec, dict) and len(spec) == 1:
        (kind, value), = spec.items()
        if kind == "geometric":
            return GeometricPrior(value)
        if kind == "per_term":
            return PerTermPrior(value)
    raise ConfigError(f"unrecognised model prior {spec!r}")


def log_model_prior(prior, m: ModelIndex) -> float:
    return prior.log_prob(m)


def propose_bitflip(m: ModelIndex, rng) -> tuple[ModelIndex, float]:
    """Toggle one uniformly chosen term; the kernel is symmetric so the log jump ratio is 0."""
    if m.n_terms < 1:
        raise InputError("cannot propose a move in an empty library")
    return m.flip(rng.integers(m.n_terms)), 0.0


def enumerate_models(n_terms: int):
    """Yield every subset of ``n_terms`` columns in mask-integer order."""
    if n_terms > MAX_ENUMERATION_TERMS:
        raise InputError(f"refusing to enumerate 2^{n_terms} models (limit 2^{MAX_ENUMERATION_TERMS})")
    for mask in range(1 << n_terms):
        yield ModelIndex(mask, n_terms)
