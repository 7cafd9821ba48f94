"""Synthetic minority oversampling."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .classifiers import nearest_indices

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SmoteDraw:
    rows: np.ndarray
    base: np.ndarray
    neighbor: np.ndarray
    gap: np.ndarray


def smote_draw(rows: np.ndarray, k_neighbors: int, n_needed: int, seed: int) -> SmoteDraw:
    """SMOTE with the base row, neighbour and interpolation gap of every draw.

    ``base`` and ``neighbor`` index into ``rows``.
    """
    rows = np.asarray(rows, dtype=np.float64)
    n = len(rows)
    rng = np.random.default_rng(seed)
    if n_needed <= 0:
        empty = np.zeros(0, dtype=np.intp)
        return SmoteDraw(np.zeros((0, rows.shape[1])), empty, empty, np.zeros(0))
    if n < 2:
        log.warning("smote: %d minority row(s); duplicating instead of interpolating", n)
        if n == 0:
            raise ValueError("smote needs at least one minority row")
        base = np.zeros(n_needed, dtype=np.intp)
        return SmoteDraw(np.repeat(rows, n_needed, axis=0), base, base.copy(), np.zeros(n_needed))
    k = max(1, min(k_neighbors, n - 1))
    nb = nearest_indices(rows, rows, k, exclude_self=True)
    base = rng.integers(0, n, size=n_needed)
    pick = rng.integers(0, k, size=n_needed)
    gap = rng.random(n_needed)
    neighbor = nb[base, pick]
    synth = rows[base] + gap[:, None] * (rows[neighbor] - rows[base])
    return SmoteDraw(synth, base, neighbor, gap)


def smote(rows: np.ndarray, k_neighbors: int = 5, n_needed: int = 0, seed: int = 0) -> np.ndarray:
    return smote_draw(rows, k_neighbors, n_needed, seed).rows


@dataclass(frozen=True)
class BalancedDataset:
    X: np.ndarray
    y: np.ndarray
    origin: np.ndarray  # source row index for originals, -1 for synthetic rows
    parents: np.ndarray  # (n_synthetic, 2) source rows interpolated between

    @property
    def class_counts(self) -> dict[int, int]:
        vals, cnt = np.unique(self.y, return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, cnt)}


def balance(X: np.ndarray, y: np.ndarray, k_neighbors: int = 5, seed: int = 0) -> BalancedDataset:
    """Oversample the minority class until both classes have equal counts."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    vals, cnt = np.unique(y, return_counts=True)
    if len(vals) != 2:
        raise ValueError("balance expects exactly two classes")
    minority = int(vals[np.argmin(cnt)])
    need = int(cnt.max() - cnt.min())
    src = np.flatnonzero(y == minority)
    draw = smote_draw(X[src], k_neighbors, need, seed)
    parents = np.column_stack([src[draw.base], src[draw.neighbor]]) if need else np.zeros((0, 2), int)
    return BalancedDataset(
        np.vstack([X, draw.rows]),
        np.concatenate([y, np.full(need, minority)]),
        np.concatenate([np.arange(len(X)), np.full(need, -1)]),
        parents,
    )
