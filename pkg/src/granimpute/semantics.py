"""Pairwise-complete Pearson correlation and semantic feature ranking."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .data_model import MaskMatrix, Table

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CorrelationMatrix:
    """Correlation over the non-label feature columns.

    ``columns[k]`` is the table column index behind row/column ``k`` of
    ``rho``. ``degenerate[x, y]`` is set where the pair had fewer than two
    complete rows or a zero standard deviation; such entries hold 0.
    """

    columns: tuple[int, ...]
    rho: np.ndarray
    support: np.ndarray
    degenerate: np.ndarray

    def position(self, col: int) -> int:
        return self.columns.index(col)

    def row(self, col: int) -> np.ndarray:
        return self.rho[self.position(col)]

    def to_csv(self, names, stream) -> None:
        labels = [names[c] for c in self.columns]
        stream.write("," + ",".join(labels) + "\n")
        for k, lab in enumerate(labels):
            stream.write(lab + "," + ",".join(repr(float(v)) for v in self.rho[k]) + "\n")


@dataclass(frozen=True)
class SemanticFeatureSet:
    target: int
    members: tuple[int, ...]
    scores: tuple[float, ...]


def pearson(x: np.ndarray, y: np.ndarray) -> float | None:
    """Two-pass Pearson correlation with population moments; None if undefined."""
    n = len(x)
    if n < 2:
        return None
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx <= 0.0 or syy <= 0.0:
        return None
    r = float(dx @ dy) / np.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def correlation_matrix(t: Table, mask: MaskMatrix) -> CorrelationMatrix:
    X = t.to_matrix()
    obs = mask.observed
    cols = tuple(t.feature_cols)
    d = len(cols)
    rho = np.zeros((d, d))
    support = np.zeros((d, d), dtype=np.int64)
    degenerate = np.zeros((d, d), dtype=bool)
    for a in range(d):
        ca = cols[a]
        for b in range(a, d):
            cb = cols[b]
            both = obs[:, ca] & obs[:, cb]
            n = int(both.sum())
            r = pearson(X[both, ca], X[both, cb])
            support[a, b] = support[b, a] = n
            if r is None:
                degenerate[a, b] = degenerate[b, a] = True
            else:
                rho[a, b] = rho[b, a] = 1.0 if a == b else r
    n_bad = int(np.triu(degenerate, 1).sum())
    if n_bad:
        log.info("correlation: %d degenerate column pairs scored 0", n_bad)
    return CorrelationMatrix(cols, rho, support, degenerate)


def ranked_candidates(corr: CorrelationMatrix, beta: int) -> list[tuple[int, float]]:
    """All other columns by |rho| descending, lower column index first on ties.

    Pairs flagged degenerate are left out.
    """
    k = corr.position(beta)
    scores = np.abs(corr.rho[k])
    order = sorted((c for i, c in enumerate(corr.columns)
                    if i != k and not corr.degenerate[k, i]),
                   key=lambda c: (-scores[corr.position(c)], c))
    return [(c, float(scores[corr.position(c)])) for c in order]


def semantic_features(corr: CorrelationMatrix, beta: int, delta: int) -> SemanticFeatureSet:
    """The ``delta`` columns most correlated (in absolute value) with ``beta``."""
    if delta < 1:
        raise ValueError("delta must be >= 1")
    k = corr.position(beta)
    avail = len(corr.columns) - 1
    if delta > avail:
        log.warning("delta=%d exceeds %d available features; clamping", delta, avail)
        delta = avail
    scores = np.abs(corr.rho[k])
    others = [c for i, c in enumerate(corr.columns) if i != k]
    others.sort(key=lambda c: (-scores[corr.position(c)], c))
    members = tuple(others[:delta])
    return SemanticFeatureSet(beta, members,
                              tuple(float(scores[corr.position(c)]) for c in members))
