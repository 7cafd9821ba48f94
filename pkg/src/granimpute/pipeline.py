"""End-to-end prediction pipeline: impute, scale, select, split, balance, classify."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .classifiers import KINDS, RandomForest, train
from .data_model import Table, encode_categoricals, standardize
from .granular_imputer import impute_table
from .granule import DEFAULT_DELTA, DEFAULT_ETA
from .metrics import EvalReport, evaluate
from .smote import balance

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FeatureImportance:
    importances: np.ndarray
    selected: tuple[int, ...]


def rf_feature_select(X: np.ndarray, labels: np.ndarray, n_trees: int = 200, k: int = 16,
                      seed: int = 0) -> FeatureImportance:
    """Rank features by mean Gini decrease in a random forest; keep the top k."""
    X = np.asarray(X, dtype=np.float64)
    d = X.shape[1]
    if k > d:
        log.warning("k=%d exceeds %d features; clamping", k, d)
        k = d
    rf = RandomForest(n_trees=n_trees, seed=seed).fit(X, labels)
    imp = rf.feature_importances_
    order = sorted(range(d), key=lambda j: (-imp[j], j))
    return FeatureImportance(imp, tuple(order[:k]))


def stratified_split(y: np.ndarray, test_fraction: float = 0.2, seed: int = 0):
    """Per-class shuffled split; returns sorted (train_idx, test_idx)."""
    rng = np.random.default_rng(seed)
    y = np.asarray(y)
    train_idx, test_idx = [], []
    for c in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == c))
        n_test = int(round(test_fraction * len(idx)))
        test_idx.append(idx[:n_test])
        train_idx.append(idx[n_test:])
    return np.sort(np.concatenate(train_idx)), np.sort(np.concatenate(test_idx))


@dataclass
class PipelineConfig:
    classifiers: tuple[str, ...] = KINDS
    k_features: int = 16
    seed: int = 42
    delta: int = DEFAULT_DELTA
    eta: int = DEFAULT_ETA
    test_fraction: float = 0.2
    select_trees: int = 200
    smote_k: int = 5
    hyperparams: dict[str, dict] = field(default_factory=dict)


@dataclass
class PipelineResult:
    reports: list[EvalReport]
    selected_features: tuple[str, ...] = ()
    n_imputed: int = 0
    train_counts: dict[int, int] = field(default_factory=dict)
    test_size: int = 0


def run_pipeline(raw: Table, config: PipelineConfig | None = None) -> PipelineResult:
    cfg = config or PipelineConfig()
    unknown = [c for c in cfg.classifiers if c not in KINDS]
    if unknown:
        raise ValueError(f"unknown classifier(s): {', '.join(unknown)}")
    if not cfg.classifiers:
        return PipelineResult([])

    encoded, _ = encode_categoricals(raw)
    imputed = impute_table(encoded, cfg.delta, cfg.eta)
    scaled, _ = standardize(imputed.table)
    feats = scaled.feature_cols
    X = scaled.to_matrix()[:, feats]
    y = scaled.labels()
    log.info("pipeline: %d rows, %d features, %d cells imputed",
             len(y), len(feats), len(imputed.provenance))

    fi = rf_feature_select(X, y, n_trees=cfg.select_trees, k=cfg.k_features, seed=cfg.seed)
    X = X[:, list(fi.selected)]
    names = tuple(scaled.feature_names[feats[j]] for j in fi.selected)
    log.info("pipeline: selected features %s", ",".join(names))

    tr, te = stratified_split(y, cfg.test_fraction, cfg.seed)
    bal = balance(X[tr], y[tr], cfg.smote_k, cfg.seed)
    reports = []
    for kind in sorted(cfg.classifiers):
        model = train(kind, bal.X, bal.y, cfg.hyperparams.get(kind), cfg.seed)
        rep = evaluate(model, X[te], y[te])
        log.info("pipeline: %s accuracy=%.4f auc=%.4f", kind, rep.accuracy, rep.auc)
        reports.append(rep)
    return PipelineResult(reports, names, len(imputed.provenance), bal.class_counts, len(te))
