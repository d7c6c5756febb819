"""Polynomial regressor set: all monomials of the features up to a given degree."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np

Monomial = tuple[int, ...]  # sorted 0-based feature indices; () is the constant

# full N x N_r materialization below this many cells, lazy column products above
MATERIALIZE_LIMIT = 50_000_000


@dataclass(frozen=True)
class RegressorSet:
    monomials: tuple[Monomial, ...]
    n_features: int
    max_degree: int

    def __len__(self) -> int:
        return len(self.monomials)

    def render(self, j: int, names=None) -> str:
        return render(self.monomials[j], names)

    def features_used(self, selected) -> set[int]:
        return {p for j in selected for p in self.monomials[j]}

    def to_list(self) -> list[list[int]]:
        return [list(m) for m in self.monomials]

    @classmethod
    def from_list(cls, monomials, n_features: int, max_degree: int) -> "RegressorSet":
        return cls(tuple(tuple(int(p) for p in m) for m in monomials), n_features, max_degree)


def enumerate_regressors(n_features: int, max_degree: int, keep=None) -> RegressorSet:
    """Monomials ordered by degree, then lexicographically on factor indices.

    ``keep`` restricts the factors to a subset of features (e.g. after
    distance-correlation filtering); monomials still refer to the original
    feature indices so evaluation works on full sample rows.
    """
    if n_features < 1 or max_degree < 0:
        raise ValueError("need n_features >= 1 and max_degree >= 0")
    pool = range(n_features) if keep is None else sorted(set(int(p) for p in keep))
    if any(not 0 <= p < n_features for p in pool):
        raise IndexError("kept feature index out of range")
    monomials = tuple(
        m
        for degree in range(max_degree + 1)
        for m in itertools.combinations_with_replacement(pool, degree)
    )
    assert len(monomials) == comb(len(pool) + max_degree, max_degree)
    return RegressorSet(monomials, n_features, max_degree)


def render(monomial: Monomial, names=None) -> str:
    if not monomial:
        return "1"
    if names is None:
        return "*".join(f"u{p + 1}" for p in monomial)
    return "*".join(names[p] for p in monomial)


def _columns(monomials, u: np.ndarray) -> np.ndarray:
    out = np.ones((u.shape[0], len(monomials)))
    for c, m in enumerate(monomials):
        for p in m:
            out[:, c] *= u[:, p]
    return out


def evaluate(rs: RegressorSet, u) -> np.ndarray:
    """Regressor values for one sample (1-d input) or many (2-d input)."""
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != rs.n_features:
        raise ValueError(f"expected {rs.n_features} features, got {u.shape[-1]}")
    if u.ndim == 1:
        return _columns(rs.monomials, u[None, :])[0]
    return _columns(rs.monomials, u)


def evaluate_subset(rs: RegressorSet, selected, u) -> np.ndarray:
    """Design matrix with one column per selected regressor, in the given order."""
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape[1] != rs.n_features:
        raise ValueError(f"expected an (N, {rs.n_features}) feature matrix")
    selected = list(selected)
    if any(not 0 <= j < len(rs) for j in selected):
        raise IndexError("regressor index out of range")
    return _columns([rs.monomials[j] for j in selected], u)


class DesignSource:
    """Column provider for repeated subset fits on one fixed sample matrix."""

    def __init__(self, rs: RegressorSet, u, materialize_limit: int = MATERIALIZE_LIMIT):
        self.rs = rs
        self.u = np.asarray(u, dtype=float)
        self.full = None
        if self.u.shape[0] * len(rs) <= materialize_limit:
            self.full = np.asfortranarray(evaluate(rs, self.u))

    def __call__(self, selected) -> np.ndarray:
        if self.full is not None:
            return self.full[:, list(selected)]
        return evaluate_subset(self.rs, selected, self.u)
