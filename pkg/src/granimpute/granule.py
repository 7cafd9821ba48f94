"""Reliable row selection around a missing cell and granule assembly."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_model import MaskMatrix, Table
from .semantics import SemanticFeatureSet

DEFAULT_DELTA = 5
DEFAULT_ETA = 7
DEFAULT_CELL_BUDGET = 64


class GranuleUnderfull(Exception):
    """Fewer than eta complete rows exist for the requested feature set."""

    def __init__(self, needed: int, found: int):
        super().__init__(f"needed {needed} complete rows, found {found}")
        self.needed = needed
        self.found = found


@dataclass(frozen=True)
class GranuleSpec:
    alpha: int
    beta: int
    features: SemanticFeatureSet
    rows: tuple[int, ...]

    @property
    def columns(self) -> tuple[int, ...]:
        return self.features.members + (self.beta,)

    def to_record(self) -> dict:
        return {"seed": [self.alpha, self.beta], "rows": list(self.rows),
                "features": list(self.features.members)}


@dataclass(frozen=True)
class Granule:
    spec: GranuleSpec
    block: np.ndarray

    @property
    def X(self) -> np.ndarray:
        return self.block[:, :-1]

    @property
    def y(self) -> np.ndarray:
        return self.block[:, -1]


def complete_rows(observed: np.ndarray, cols) -> np.ndarray:
    """Sorted indices of rows observed on every column in ``cols``."""
    return np.flatnonzero(observed[:, list(cols)].all(axis=1))


def nearest_rows(candidates: np.ndarray, alpha: int, eta: int) -> list[int]:
    """Take ``eta`` entries of sorted ``candidates`` closest to ``alpha``.

    Scans outward from alpha; at equal distance the earlier row wins.
    ``alpha`` itself is never returned.
    """
    pos = int(np.searchsorted(candidates, alpha))
    hi = pos + 1 if pos < len(candidates) and candidates[pos] == alpha else pos
    lo = pos - 1
    out: list[int] = []
    n = len(candidates)
    while len(out) < eta and (lo >= 0 or hi < n):
        if hi >= n or (lo >= 0 and alpha - candidates[lo] <= candidates[hi] - alpha):
            out.append(int(candidates[lo]))
            lo -= 1
        else:
            out.append(int(candidates[hi]))
            hi += 1
    return out


def select_rows(t: Table, mask: MaskMatrix, alpha: int,
                features: SemanticFeatureSet, eta: int) -> list[int]:
    """The eta rows nearest to ``alpha`` that are complete on features and target."""
    if eta < 2:
        raise ValueError("eta must be >= 2")
    cols = features.members + (features.target,)
    cand = complete_rows(mask.observed, cols)
    rows = nearest_rows(cand, alpha, eta)
    if len(rows) < eta:
        raise GranuleUnderfull(eta, len(rows))
    return rows


def form_granule(t: Table, spec: GranuleSpec) -> Granule:
    return granule_from_matrix(t.to_matrix(), spec)


def granule_from_matrix(X: np.ndarray, spec: GranuleSpec) -> Granule:
    rows = np.asarray(spec.rows, dtype=np.intp)
    block = X[np.ix_(rows, np.asarray(spec.columns, dtype=np.intp))].copy()
    if spec.alpha in spec.rows or len(set(spec.rows)) != len(spec.rows):
        raise AssertionError(f"granule rows invalid for seed row {spec.alpha}")
    if np.isnan(block).any():
        raise AssertionError("granule block contains missing cells")
    block.setflags(write=False)
    return Granule(spec, block)
