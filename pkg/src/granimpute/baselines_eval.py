"""Baseline imputers, MCAR masking and the normalized-error benchmark."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .data_model import Table, build_mask
from .granular_imputer import (FALLBACK_MEAN, FALLBACK_NONE, FALLBACK_ZERO, ImputedTable,
                               Provenance, impute_table)
from .granule import DEFAULT_DELTA, DEFAULT_ETA

log = logging.getLogger(__name__)

IMPUTERS = ("gs", "mean", "knn", "mice")


@dataclass(frozen=True)
class MaskingPlan:
    rate: float
    rng_seed: int
    cells: tuple[tuple[int, int], ...]


@dataclass
class ImputationErrorReport:
    rate: float
    imputer: str
    cells: list[tuple[int, int]]
    errors: np.ndarray
    n_degenerate: int = 0

    @property
    def n_cells(self) -> int:
        return len(self.errors)

    @property
    def mean_err(self) -> float:
        return float(np.mean(self.errors)) if len(self.errors) else 0.0

    @property
    def median_err(self) -> float:
        return float(np.median(self.errors)) if len(self.errors) else 0.0

    @property
    def p90_err(self) -> float:
        return float(np.percentile(self.errors, 90)) if len(self.errors) else 0.0

    def to_record(self) -> dict:
        return {"rate": self.rate, "imputer": self.imputer, "n_cells": self.n_cells,
                "mean_err": self.mean_err, "median_err": self.median_err,
                "p90_err": self.p90_err}


def _check_rate(rate: float) -> None:
    if not 0.0 < rate < 1.0:
        raise ValueError(f"masking rate must lie in (0, 1), got {rate}")


def make_plan(t: Table, rate: float, seed: int) -> MaskingPlan:
    """Choose round(rate * eligible) observed feature cells uniformly at random."""
    _check_rate(rate)
    obs = build_mask(t).observed.copy()
    if t.label_col is not None:
        obs[:, t.label_col] = False
    rows, cols = np.nonzero(obs)
    n = int(round(rate * len(rows)))
    rng = np.random.default_rng(seed)
    pick = np.sort(rng.choice(len(rows), size=n, replace=False))
    cells = tuple((int(rows[i]), int(cols[i])) for i in pick)
    return MaskingPlan(rate, seed, cells)


def apply_mask(t: Table, plan: MaskingPlan) -> tuple[Table, np.ndarray]:
    """Blank out the planned cells; returns the masked table and the original values."""
    _check_rate(plan.rate)
    X = t.to_matrix()
    if not plan.cells:
        return t, np.zeros(0)
    r = np.array([c[0] for c in plan.cells])
    c = np.array([c[1] for c in plan.cells])
    if t.label_col is not None and np.any(c == t.label_col):
        raise ValueError("masking plan touches the label column")
    truth = X[r, c].copy()
    if np.isnan(truth).any():
        raise ValueError("masking plan includes cells that are already missing")
    X[r, c] = np.nan
    return t.with_matrix(X), truth


def column_range(col: np.ndarray) -> float:
    present = col[~np.isnan(col)]
    if present.size == 0:
        return 0.0
    return float(present.max() - present.min())


def error_metric(truth: float, pred: float, col: np.ndarray) -> float:
    """|truth - pred| normalized by the observed range of the column.

    A constant column scores 0 for an exact prediction and 1 otherwise.
    """
    rng = column_range(np.asarray(col, dtype=np.float64))
    if rng == 0.0:
        return 0.0 if pred == truth else 1.0
    return abs(truth - pred) / rng


def normalized_errors(truth: np.ndarray, pred: np.ndarray,
                      ranges: np.ndarray) -> tuple[np.ndarray, int]:
    """Vectorized :func:`error_metric`; also returns the count of constant-column cells."""
    truth = np.asarray(truth, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    ranges = np.asarray(ranges, dtype=np.float64)
    flat = ranges == 0.0
    safe = np.where(flat, 1.0, ranges)
    err = np.abs(truth - pred) / safe
    err = np.where(flat, (pred != truth).astype(np.float64), err)
    return err, int(flat.sum())


# -- baseline imputers ------------------------------------------------------------

def _missing_cells(t: Table, obs: np.ndarray):
    return [(int(a), int(b)) for a, b in zip(*np.nonzero(~obs)) if b != t.label_col]


def _column_means(X: np.ndarray, obs: np.ndarray) -> np.ndarray:
    counts = obs.sum(axis=0)
    sums = np.where(obs, X, 0.0).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)


def mean_imputer(t: Table) -> ImputedTable:
    X = t.to_matrix()
    obs = ~np.isnan(X)
    means = _column_means(X, obs)
    prov = []
    for a, b in _missing_cells(t, obs):
        if np.isnan(means[b]):
            X[a, b] = 0.0
            prov.append(Provenance(a, b, 0.0, fallback=FALLBACK_ZERO,
                                   reason="column has no observed values"))
        else:
            X[a, b] = means[b]
            prov.append(Provenance(a, b, float(means[b]), fallback=FALLBACK_MEAN))
    return ImputedTable(t.with_matrix(X), prov)


def knn_distances(Z: np.ndarray, M: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Mean squared difference over mutually observed features, rows vs all rows.

    ``Z`` holds range-scaled values with zeros at missing cells and ``M`` the
    0/1 observed indicator. Pairs with no shared feature get +inf.
    """
    Zr, Mr = Z[rows], M[rows]
    MZ, MZ2 = M * Z, M * Z * Z
    sq = (Mr * Zr * Zr) @ M.T + Mr @ MZ2.T - 2.0 * (Mr * Zr) @ MZ.T
    np.maximum(sq, 0.0, out=sq)
    cnt = Mr @ M.T
    with np.errstate(invalid="ignore", divide="ignore"):
        d = np.where(cnt > 0, sq / np.maximum(cnt, 1.0), np.inf)
    d[np.arange(len(rows)), rows] = np.inf
    return d


def knn_imputer(t: Table, k: int = 5, chunk: int = 256) -> ImputedTable:
    """Fill each missing cell with the mean of its k nearest donor rows.

    Distance is Euclidean over the features both rows observe, with every
    feature scaled by its observed range and the squared sum divided by the
    number of shared features. Ties go to the lower row index.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    X = t.to_matrix()
    obs = ~np.isnan(X)
    feats = np.array(t.feature_cols)
    Xf, Of = X[:, feats], obs[:, feats]
    lo = np.where(Of, Xf, np.inf).min(axis=0)
    hi = np.where(Of, Xf, -np.inf).max(axis=0)
    span = np.where(np.isfinite(hi - lo) & (hi > lo), hi - lo, 1.0)
    lo = np.where(np.isfinite(lo), lo, 0.0)
    Z = np.where(Of, (Xf - lo) / span, 0.0)
    M = Of.astype(np.float64)
    means = _column_means(X, obs)

    out = X.copy()
    prov = []
    recipients = np.flatnonzero(~Of.all(axis=1))
    for start in range(0, len(recipients), chunk):
        rows = recipients[start:start + chunk]
        dist = knn_distances(Z, M, rows)
        for i, r in enumerate(rows):
            order = np.argsort(dist[i], kind="stable")
            finite = np.isfinite(dist[i][order])
            for jj in np.flatnonzero(~Of[r]):
                c = int(feats[jj])
                donors = order[finite & Of[order, jj]][:k]
                if len(donors):
                    v = float(X[donors, c].mean())
                    prov.append(Provenance(int(r), c, v, rows=tuple(int(x) for x in donors)))
                elif not np.isnan(means[c]):
                    v = float(means[c])
                    prov.append(Provenance(int(r), c, v, fallback=FALLBACK_MEAN,
                                           reason="no donor shares a feature"))
                else:
                    v = 0.0
                    prov.append(Provenance(int(r), c, v, fallback=FALLBACK_ZERO,
                                           reason="column has no observed values"))
                out[r, c] = v
    prov.sort(key=lambda p: (p.alpha, p.beta))
    return ImputedTable(t.with_matrix(out), prov)


def _ridge_fit(A: np.ndarray, y: np.ndarray, lam_scale: float = 1e-6):
    mu = A.mean(axis=0)
    sd = A.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    Z = (A - mu) / sd
    ym = y.mean()
    G = Z.T @ Z
    lam = lam_scale * max(float(np.trace(G)) / max(G.shape[0], 1), 1.0)
    w = np.linalg.solve(G + lam * np.eye(G.shape[0]), Z.T @ (y - ym))
    coef = w / sd
    return coef, float(ym - mu @ coef)


def mice_lite_imputer(t: Table, sweeps: int = 5) -> ImputedTable:
    """Chained-equation imputation with one global ridge regression per column."""
    X = t.to_matrix()
    obs = ~np.isnan(X)
    feats = t.feature_cols
    means = _column_means(X, obs)
    cur = X.copy()
    for c in feats:
        miss = ~obs[:, c]
        cur[miss, c] = 0.0 if np.isnan(means[c]) else means[c]
    incomplete = [c for c in feats if not obs[:, c].all() and obs[:, c].any()]
    for _ in range(sweeps):
        for c in incomplete:
            others = [o for o in feats if o != c]
            if not others:
                break
            fit_rows = obs[:, c]
            coef, b = _ridge_fit(cur[np.ix_(fit_rows, others)], X[fit_rows, c])
            miss = ~fit_rows
            pred = cur[np.ix_(miss, others)] @ coef + b
            cur[miss, c] = np.where(np.isfinite(pred), pred, means[c])
    prov = []
    for a, c in _missing_cells(t, obs):
        kind = FALLBACK_NONE if c in incomplete else FALLBACK_ZERO
        prov.append(Provenance(a, c, float(cur[a, c]), fallback=kind))
    return ImputedTable(t.with_matrix(cur), prov)


def imputer_registry(delta: int = DEFAULT_DELTA, eta: int = DEFAULT_ETA,
                     k: int = 5, sweeps: int = 5) -> dict[str, Callable[[Table], ImputedTable]]:
    return {
        "gs": lambda t: impute_table(t, delta, eta),
        "mean": mean_imputer,
        "knn": lambda t: knn_imputer(t, k),
        "mice": lambda t: mice_lite_imputer(t, sweeps),
    }


def impurity_sweep(t: Table, rates: Sequence[float], imputers: Iterable[str], seed: int,
                   delta: int = DEFAULT_DELTA, eta: int = DEFAULT_ETA,
                   k: int = 5) -> list[ImputationErrorReport]:
    """Mask, impute and score for every (rate, imputer) combination.

    The mask for the i-th rate is drawn with seed ``seed + i`` and shared by
    all imputers, so they are compared on identical cells.
    """
    registry = imputer_registry(delta, eta, k)
    names = list(imputers)
    unknown = [n for n in names if n not in registry]
    if unknown:
        raise ValueError(f"unknown imputer(s): {', '.join(unknown)}")
    X0 = t.to_matrix()
    ranges = np.array([column_range(X0[:, j]) for j in range(X0.shape[1])])
    reports = []
    for i, rate in enumerate(rates):
        plan = make_plan(t, rate, seed + i)
        masked, truth = apply_mask(t, plan)
        r = np.array([c[0] for c in plan.cells], dtype=np.intp)
        c = np.array([c[1] for c in plan.cells], dtype=np.intp)
        for name in names:
            filled = registry[name](masked).table.to_matrix()
            err, n_flat = normalized_errors(truth, filled[r, c], ranges[c])
            rep = ImputationErrorReport(rate, name, list(plan.cells), err, n_flat)
            log.info("sweep rate=%.3f imputer=%s n=%d mean_err=%.6g",
                     rate, name, rep.n_cells, rep.mean_err)
            reports.append(rep)
    return reports
