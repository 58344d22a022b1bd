"""Candidate-term dictionaries and their design matrices.

A library is an ordered list of :class:`TermDescriptor` plus the matrix of
those terms evaluated over the measured states.  Ordering is graded: the
constant first, then terms of increasing total degree, and within a degree
the order produced by ``itertools.combinations_with_replacement`` (x1^2,
x1*x2, ..., x2^2, ...).  Model bitmasks index into this ordering, so it
must never change.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from math import comb

import numpy as np

from .errors import DegenerateColumnError, InputError

MONOMIAL = "monomial"
LEGENDRE = "legendre"


@dataclass(frozen=True)
class TermDescriptor:
    """One column of a library.

    For monomials ``exponents`` holds one power per state variable.  For
    Legendre terms it holds a single entry, the polynomial degree.
    """

    exponents: tuple[int, ...]
    basis_kind: str = MONOMIAL

    @property
    def degree(self) -> int:
        return sum(self.exponents)

    @property
    def is_constant(self) -> bool:
        return self.degree == 0

    @property
    def label(self) -> str:
        if self.basis_kind == LEGENDRE:
            return f"P{self.exponents[0]}"
        factors = []
        for i, p in enumerate(self.exponents):
            if p == 1:
                factors.append(f"x{i + 1}")
            elif p > 1:
                factors.append(f"x{i + 1}^{p}")
        return "*".join(factors) if factors else "1"


@dataclass(frozen=True, eq=False)
class TermLibrary:
    terms: tuple[TermDescriptor, ...]
    design: np.ndarray
    normalized: bool = False
    column_scales: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.design.ndim != 2 or self.design.shape[1] != len(self.terms):
            raise InputError(
                f"design has shape {self.design.shape} but there are {len(self.terms)} terms"
            )
        if self.column_scales is None:
            object.__setattr__(self, "column_scales", np.ones(len(self.terms)))

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    @property
    def labels(self) -> list[str]:
        return [t.label for t in self.terms]

    def to_raw_coefficients(self, coefs):
        """Map coefficients fitted against the stored columns back to raw units."""
        return np.asarray(coefs, dtype=float) / self.column_scales


def _check_finite(a, what):
    if not np.all(np.isfinite(a)):
        raise InputError(f"{what} contains non-finite values")


def polynomial_terms(n_states: int, max_degree: int, include_constant: bool = True):
    """All monomial descriptors of total degree <= ``max_degree``, in library order."""
    if max_degree < 1:
        raise InputError("max_degree must be >= 1")
    if n_states < 1:
        raise InputError("need at least one state variable")
    terms = []
    start = 0 if include_constant else 1
    for degree in range(start, max_degree + 1):
        for combo in itertools.combinations_with_replacement(range(n_states), degree):
            exps = [0] * n_states
            for i in combo:
                exps[i] += 1
            terms.append(TermDescriptor(tuple(exps)))
    return tuple(terms)


def n_polynomial_terms(n_states: int, max_degree: int, include_constant: bool = True) -> int:
    return comb(n_states + max_degree, max_degree) - (0 if include_constant else 1)


def build_polynomial_library(states, max_degree: int, include_constant: bool = True) -> TermLibrary:
    """Evaluate every monomial up to ``max_degree`` over the rows of ``states``.

    Parameters
    ----------
    states : array_like, shape (N, S)
        Measured states, one row per time sample.  A 1-D input is treated
        as a single state variable.
    max_degree : int
        Largest total degree of any term.
    include_constant : bool
        Whether the constant column leads the library.
    """
    states = np.asarray(states, dtype=float)
    if states.ndim == 1:
        states = states[:, None]
    if states.ndim != 2 or states.shape[0] < 1 or states.shape[1] < 1:
        raise InputError("states must be a non-empty N x S matrix")
    _check_finite(states, "states")
    terms = polynomial_terms(states.shape[1], max_degree, include_constant)
    return TermLibrary(terms, evaluate_design(terms, states))


def legendre_columns(x, n_terms: int) -> np.ndarray:
    """P_0..P_{n_terms-1} at ``x`` via the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (n_terms,))
    out[..., 0] = 1.0
    if n_terms > 1:
        out[..., 1] = x
    for k in range(1, n_terms - 1):
        out[..., k + 1] = ((2 * k + 1) * x * out[..., k] - k * out[..., k - 1]) / (k + 1)
    return out


def build_legendre_library(x, n_terms: int) -> TermLibrary:
    x = np.asarray(x, dtype=float).ravel()
    if n_terms < 1:
        raise InputError("n_terms must be >= 1")
    if x.size < 1:
        raise InputError("x must be non-empty")
    _check_finite(x, "x")
    if np.any(np.abs(x) > 1.0):
        raise InputError("Legendre abscissae must lie in [-1, 1]")
    terms = tuple(TermDescriptor((k,), LEGENDRE) for k in range(n_terms))
    return TermLibrary(terms, legendre_columns(x, n_terms))


def normalize_columns(lib: TermLibrary) -> TermLibrary:
    """Rescale every non-constant column to unit sample standard deviation.

    Scales accumulate, so normalizing an already normalized library is a
    no-op and ``column_scales`` still maps back to the original units.
    """
    if lib.design.shape[0] < 2:
        raise InputError("normalization needs at least two samples")
    std = lib.design.std(axis=0, ddof=1)
    scales = np.ones(lib.n_terms)
    for j, term in enumerate(lib.terms):
        if term.is_constant:
            continue
        if not std[j] > 0.0:
            raise DegenerateColumnError(term.label)
        scales[j] = std[j]
    return replace(
        lib,
        design=lib.design / scales,
        normalized=True,
        column_scales=lib.column_scales * scales,
    )


def _exponent_matrix(terms) -> np.ndarray:
    return np.array([t.exponents for t in terms], dtype=int)


def evaluate_design(terms, states) -> np.ndarray:
    """Evaluate ``terms`` at every row of ``states`` (shape (..., S)) -> (..., D)."""
    states = np.asarray(states, dtype=float)
    if not terms:
        return np.empty(states.shape[:-1] + (0,))
    kinds = {t.basis_kind for t in terms}
    if kinds == {LEGENDRE}:
        degrees = [t.exponents[0] for t in terms]
        cols = legendre_columns(states[..., 0], max(degrees) + 1)
        return cols[..., degrees]
    if kinds != {MONOMIAL}:
        raise InputError("mixed basis kinds in one library are not supported")
    exps = _exponent_matrix(terms)
    max_pow = int(exps.max())
    # powers[..., s, p] = x_s ** p, built by repeated multiplication
    powers = np.ones(states.shape + (max_pow + 1,))
    for p in range(1, max_pow + 1):
        powers[..., p] = powers[..., p - 1] * states
    out = np.ones(states.shape[:-1] + (len(terms),))
    for s in range(exps.shape[1]):
        out *= powers[..., s, :][..., exps[:, s]]
    return out


def evaluate_terms(terms, state) -> np.ndarray:
    """Evaluate ``terms`` at a single state vector."""
    state = np.atleast_1d(np.asarray(state, dtype=float))
    _check_finite(state, "state")
    return evaluate_design(terms, state)
