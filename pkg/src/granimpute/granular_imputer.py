"""Granular semantic imputation: local least squares inside each granule."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data_model import MaskMatrix, Table, build_mask
from .granule import (DEFAULT_CELL_BUDGET, DEFAULT_DELTA, DEFAULT_ETA, Granule,
                      GranuleSpec, complete_rows, granule_from_matrix, nearest_rows)
from .semantics import (CorrelationMatrix, SemanticFeatureSet, correlation_matrix,
                        ranked_candidates)

log = logging.getLogger(__name__)

OK = "ok"
REGULARIZED = "regularized"

# fallback kinds recorded in provenance
FALLBACK_NONE = "none"
FALLBACK_MEAN = "column_mean"
FALLBACK_ZERO = "zero"

RIDGE_SCALE = 1e-8
UNDERDETERMINED_RIDGE_SCALE = 1e-6
COND_LIMIT = 1e10


@dataclass(frozen=True)
class LocalModel:
    coefficients: np.ndarray
    intercept: float
    condition_flag: str = OK

    def predict(self, x: np.ndarray) -> float:
        return float(self.intercept + np.dot(self.coefficients, x))


@dataclass(frozen=True)
class Provenance:
    alpha: int
    beta: int
    value: float
    features: tuple[int, ...] = ()
    rows: tuple[int, ...] = ()
    delta_requested: int = 0
    condition_flag: str | None = None
    fallback: str = FALLBACK_NONE
    reason: str | None = None

    def to_record(self) -> dict:
        return {
            "row": self.alpha, "col": self.beta, "value": self.value,
            "features": list(self.features), "rows": list(self.rows),
            "delta_requested": self.delta_requested, "delta_used": len(self.features),
            "condition": self.condition_flag, "fallback": self.fallback,
            "reason": self.reason,
        }


@dataclass(frozen=True)
class ImputedTable:
    table: Table
    provenance: list[Provenance] = field(default_factory=list)

    def fallback_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for p in self.provenance:
            counts[p.fallback] = counts.get(p.fallback, 0) + 1
        return counts


def fit_local(g: Granule) -> LocalModel:
    """Least-squares fit of the target column on the predictors, with intercept.

    Predictors are centred and scaled to unit norm before forming the normal
    equations. A Tikhonov ridge of ``1e-8 * trace(G) / delta`` on that Gram
    matrix ``G`` is added when it is numerically singular, and a stronger
    one when there are fewer than ``delta + 2`` rows.
    """
    return _fit(g.X, g.y)


def _fit(X: np.ndarray, y: np.ndarray) -> LocalModel:
    n, d = X.shape
    x_mean = X.mean(axis=0)
    y_mean = float(y.mean())
    Xc = X - x_mean
    yc = y - y_mean
    norms = np.sqrt(np.einsum("ij,ij->j", Xc, Xc))
    raw_norms = np.sqrt(np.einsum("ij,ij->j", X, X))
    live = norms > 1e-12 * raw_norms
    scale = np.where(live, norms, 1.0)
    Z = Xc / scale
    Z[:, ~live] = 0.0
    G = Z.T @ Z
    rhs = Z.T @ yc

    flag = OK
    lam = 0.0
    if n < d + 2:
        flag = REGULARIZED
        lam = UNDERDETERMINED_RIDGE_SCALE
    elif not live.all():
        flag = REGULARIZED
        lam = RIDGE_SCALE
    else:
        eig = np.linalg.eigvalsh(G)
        if eig[0] <= eig[-1] / COND_LIMIT:
            flag = REGULARIZED
            lam = RIDGE_SCALE
    if flag == REGULARIZED:
        tr = float(np.trace(G))
        lam *= tr / d if tr > 0 else 1.0
        G = G + lam * np.eye(d)
    coef_z = np.linalg.solve(G, rhs) if d else np.zeros(0)
    coef = np.where(live, coef_z / scale, 0.0)
    intercept = y_mean - float(x_mean @ coef)
    if not (np.all(np.isfinite(coef)) and np.isfinite(intercept)):
        coef = np.zeros(d)
        intercept = y_mean
        flag = REGULARIZED
    coef.setflags(write=False)
    return LocalModel(coef, intercept, flag)


def estimate_cell(t: Table, spec: GranuleSpec, model: LocalModel) -> float:
    x = np.array([t.columns[c][spec.alpha] for c in spec.features.members], dtype=np.float64)
    return model.predict(x)


class _Context:
    """Shared, read-only state for imputing many cells of one table."""

    def __init__(self, t: Table, mask: MaskMatrix, corr: CorrelationMatrix):
        self.X = t.to_matrix()
        self.observed = mask.observed
        self.corr = corr
        self._ranked: dict[int, list[tuple[int, float]]] = {}
        self._means: dict[int, float | None] = {}

    def ranked(self, beta: int) -> list[tuple[int, float]]:
        if beta not in self._ranked:
            self._ranked[beta] = ranked_candidates(self.corr, beta)
        return self._ranked[beta]

    def column_mean(self, beta: int) -> float | None:
        if beta not in self._means:
            col = self.X[self.observed[:, beta], beta]
            self._means[beta] = float(col.mean()) if col.size else None
        return self._means[beta]

    def fallback(self, alpha, beta, delta, reason, features=(), rows=()):
        m = self.column_mean(beta)
        if m is None:
            return Provenance(alpha, beta, 0.0, features, rows, delta, None, FALLBACK_ZERO,
                              reason + "; column has no observed values")
        return Provenance(alpha, beta, m, features, rows, delta, None, FALLBACK_MEAN, reason)

    def impute(self, alpha: int, beta: int, delta: int, eta: int) -> tuple[Provenance, Granule | None]:
        picked, scores = [], []
        for c, s in self.ranked(beta):
            if self.observed[alpha, c]:
                picked.append(c)
                scores.append(s)
                if len(picked) == delta:
                    break
        if not picked:
            return self.fallback(alpha, beta, delta, "no observed predictors at seed row"), None
        cand = complete_rows(self.observed, picked + [beta])
        rows = nearest_rows(cand, alpha, eta)
        if len(rows) < eta:
            return self.fallback(alpha, beta, delta,
                                 f"granule underfull: {len(rows)} of {eta} rows",
                                 tuple(picked)), None
        feats = SemanticFeatureSet(beta, tuple(picked), tuple(scores))
        spec = GranuleSpec(alpha, beta, feats, tuple(rows))
        g = granule_from_matrix(self.X, spec)
        model = fit_local(g)
        value = model.predict(self.X[alpha, picked])
        if not np.isfinite(value):
            return self.fallback(alpha, beta, delta, "non-finite estimate",
                                 tuple(picked), tuple(rows)), g
        reason = None if len(picked) == delta else f"delta reduced to {len(picked)}"
        return Provenance(alpha, beta, value, tuple(picked), tuple(rows), delta,
                          model.condition_flag, FALLBACK_NONE, reason), g


def _check_params(delta: int, eta: int, cell_budget: int) -> None:
    if delta < 1:
        raise ValueError("delta must be >= 1")
    if eta < 2:
        raise ValueError("eta must be >= 2")
    if delta * eta > cell_budget:
        raise ValueError(f"granule of {eta}x{delta} exceeds the cell budget {cell_budget}")


def impute_cell(t: Table, mask: MaskMatrix, corr: CorrelationMatrix, alpha: int, beta: int,
                delta: int = DEFAULT_DELTA, eta: int = DEFAULT_ETA) -> tuple[float, Provenance]:
    """Impute one missing cell; degradations are recorded, never raised."""
    if mask.entries[alpha, beta]:
        raise ValueError(f"cell ({alpha}, {beta}) is not missing")
    prov, _ = _Context(t, mask, corr).impute(alpha, beta, delta, eta)
    return prov.value, prov


def impute_table(t: Table, delta: int = DEFAULT_DELTA, eta: int = DEFAULT_ETA, *,
                 reverse: bool = False, cell_budget: int = DEFAULT_CELL_BUDGET,
                 granule_sink=None) -> ImputedTable:
    """Fill every missing feature cell of an all-numeric table.

    All granules are built against the original mask, so imputed values
    never feed later estimates and the processing order does not matter.
    ``granule_sink``, if given, is called with each granule built.
    """
    _check_params(delta, eta, cell_budget)
    mask = build_mask(t)
    feats = t.feature_cols
    if mask.n_missing(feats) == 0:
        return ImputedTable(t, [])
    corr = correlation_matrix(t, mask)
    ctx = _Context(t, mask, corr)
    out = ctx.X.copy()
    obs = ctx.observed
    cells = [(a, b) for a, b in zip(*np.nonzero(~obs)) if b != t.label_col]
    if reverse:
        cells.reverse()
    provenance = []
    for a, b in cells:
        prov, g = ctx.impute(int(a), int(b), delta, eta)
        out[a, b] = prov.value
        provenance.append(prov)
        if granule_sink is not None and g is not None:
            granule_sink(g)
    provenance.sort(key=lambda p: (p.alpha, p.beta))
    counts: dict[str, int] = {}
    for p in provenance:
        counts[p.fallback] = counts.get(p.fallback, 0) + 1
    log.info("imputed %d cells (delta=%d, eta=%d): %s", len(provenance), delta, eta, counts)
    return ImputedTable(t.with_matrix(out), provenance)
