"""Confusion matrix, ROC curve and trapezoidal AUC."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class EvalReport:
    classifier: str
    accuracy: float
    auc: float
    tp: int
    fp: int
    tn: int
    fn: int
    roc: list[tuple[float, float]] = field(default_factory=list)
    recall: dict[int, float] = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "classifier": self.classifier,
            "accuracy": self.accuracy,
            "auc": self.auc,
            "confusion": {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn},
            "recall": {str(k): v for k, v in sorted(self.recall.items())},
            "roc": [[f, t] for f, t in self.roc],
        }


def confusion(y: np.ndarray, scores: np.ndarray, threshold: float = 0.5) -> tuple[int, int, int, int]:
    """(tp, fp, tn, fn) predicting positive when score >= threshold."""
    y = np.asarray(y).astype(bool)
    pred = np.asarray(scores) >= threshold
    tp = int(np.sum(pred & y))
    fp = int(np.sum(pred & ~y))
    tn = int(np.sum(~pred & ~y))
    fn = int(np.sum(~pred & y))
    return tp, fp, tn, fn


def roc_curve(y: np.ndarray, scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """ROC points from (0, 0) to (1, 1), one per distinct score threshold.

    Tied scores move both rates in one step, so the trapezoid over a tie
    group counts those pairs as half.
    """
    y = np.asarray(y).astype(bool)
    s = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    last = np.r_[np.flatnonzero(np.diff(s)), len(s) - 1]
    tps = np.cumsum(y)[last]
    fps = np.cumsum(~y)[last]
    P, N = int(y.sum()), int((~y).sum())
    tpr = np.r_[0.0, tps / P] if P else np.r_[0.0, np.zeros(len(tps))]
    fpr = np.r_[0.0, fps / N] if N else np.r_[0.0, np.zeros(len(fps))]
    return fpr, tpr


def auc(fpr: np.ndarray, tpr: np.ndarray) -> float:
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def roc_auc(y: np.ndarray, scores: np.ndarray) -> float:
    y = np.asarray(y).astype(bool)
    if y.all() or (~y).all():
        return 0.5
    return auc(*roc_curve(y, scores))


def evaluate_scores(name: str, y: np.ndarray, scores: np.ndarray) -> EvalReport:
    y = np.asarray(y).astype(np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    tp, fp, tn, fn = confusion(y, scores)
    fpr, tpr = roc_curve(y, scores)
    recall = {}
    if tp + fn:
        recall[1] = tp / (tp + fn)
    if tn + fp:
        recall[0] = tn / (tn + fp)
    return EvalReport(name, (tp + tn) / len(y), roc_auc(y, scores), tp, fp, tn, fn,
                      [(float(a), float(b)) for a, b in zip(fpr, tpr)], recall)


def evaluate(model, X: np.ndarray, y: np.ndarray) -> EvalReport:
    return evaluate_scores(model.kind, y, model.predict_score(X))
