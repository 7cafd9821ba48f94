"""Classifier zoo: logistic regression, kNN, CART, random forest, boosting, MLP.

Every model exposes ``fit(X, y)`` and ``predict_score(X)``, the latter
returning the positive-class score in [0, 1].
"""

from __future__ import annotations

import logging
import os

import numpy as np

from .trees import Tree, grow_classifier, grow_newton_regressor

log = logging.getLogger(__name__)

KINDS = ("logreg", "knn", "dtree", "rforest", "gboost", "nnet")


def n_workers() -> int:
    """Worker cap from GRANIMPUTE_THREADS; 0 or unset means all CPUs."""
    raw = os.environ.get("GRANIMPUTE_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _check_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be 2-D with one label per row")
    if not np.all(np.isfinite(X)):
        raise ValueError("training features contain non-finite values")
    if len(np.unique(y)) < 2:
        raise ValueError("training set contains a single class")
    if not set(np.unique(y)) <= {0, 1}:
        raise ValueError("labels must be 0/1")
    return X, y


def _bce(p, y):
    eps = 1e-15
    p = np.clip(p, eps, 1 - eps)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


# -- logistic regression ------------------------------------------------------

def logreg_loss_grad(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float):
    """Mean log-loss plus (l2/2)|w|^2, and its gradient w.r.t. (w, b)."""
    z = X @ w + b
    # log(1 + e^z) - y z, written stably
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w))
    r = sigmoid(z) - y
    gw = X.T @ r / len(y) + l2 * w
    gb = float(r.mean())
    return loss, gw, gb


class LogisticRegression:
    kind = "logreg"

    def __init__(self, l2=1e-4, max_epochs=500, tol=1e-6, **_):
        self.l2, self.max_epochs, self.tol = l2, max_epochs, tol

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        n, d = X.shape
        # step 1/L, L = Lipschitz constant of the gradient (including bias column)
        A = np.hstack([X, np.ones((n, 1))])
        L = 0.25 * float(np.linalg.eigvalsh(A.T @ A / n)[-1]) + self.l2
        step = 1.0 / L
        w, b = np.zeros(d), 0.0
        self.n_epochs_ = self.max_epochs
        for epoch in range(self.max_epochs):
            _, gw, gb = logreg_loss_grad(w, b, X, y, self.l2)
            if np.sqrt(gw @ gw + gb * gb) < self.tol:
                self.n_epochs_ = epoch
                break
            w -= step * gw
            b -= step * gb
        self.coef_, self.intercept_ = w, b
        return self

    def predict_score(self, X):
        return sigmoid(np.asarray(X, dtype=np.float64) @ self.coef_ + self.intercept_)


# -- k nearest neighbours ------------------------------------------------------------

def nearest_indices(train: np.ndarray, query: np.ndarray, k: int, chunk: int = 512,
                    exclude_self: bool = False) -> np.ndarray:
    """Indices of the k nearest train rows (Euclidean) per query row, ties by index."""
    k = min(k, len(train) - (1 if exclude_self else 0))
    out = np.empty((len(query), k), dtype=np.intp)
    tn = np.einsum("ij,ij->i", train, train)
    for s in range(0, len(query), chunk):
        q = query[s:s + chunk]
        d2 = np.einsum("ij,ij->i", q, q)[:, None] + tn[None, :] - 2.0 * q @ train.T
        np.maximum(d2, 0.0, out=d2)
        if exclude_self:
            d2[np.arange(len(q)), np.arange(s, s + len(q))] = np.inf
        if k < len(train):
            part = np.argpartition(d2, k - 1, axis=1)[:, :k]
            kth = d2[np.arange(len(q))[:, None], part].max(axis=1)
        for i in range(len(q)):
            row = d2[i]
            if k < len(train):
                cand = np.flatnonzero(row <= kth[i])
            else:
                cand = np.arange(len(train))
            order = np.lexsort((cand, row[cand]))
            out[s + i] = cand[order[:k]]
    return out


class KNNClassifier:
    kind = "knn"

    def __init__(self, k=5, **_):
        self.k = k

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        self.X_, self.y_ = X, y
        return self

    def predict_score(self, X):
        nb = nearest_indices(self.X_, np.asarray(X, dtype=np.float64), self.k)
        return self.y_[nb].mean(axis=1)


# -- trees --------------------------------------------------------------------------

class DecisionTree:
    kind = "dtree"

    def __init__(self, max_depth=12, min_samples_leaf=5, seed=0, **_):
        self.max_depth, self.min_samples_leaf, self.seed = max_depth, min_samples_leaf, seed

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        self.tree_ = grow_classifier(X, y, max_depth=self.max_depth,
                                     min_samples_leaf=self.min_samples_leaf)
        return self

    def predict_score(self, X):
        return self.tree_.predict(np.asarray(X, dtype=np.float64))


def _grow_forest_member(X, y, seed_seq, max_features, max_depth, min_samples_leaf):
    rng = np.random.default_rng(seed_seq)
    n = len(X)
    sample = rng.integers(0, n, size=n)
    tree = grow_classifier(X, y, max_depth=max_depth, min_samples_leaf=min_samples_leaf,
                           max_features=max_features, rng=rng, sample=sample)
    return tree, sample


class RandomForest:
    """Bagged Gini trees with sqrt(d) candidate features per split."""

    kind = "rforest"

    def __init__(self, n_trees=200, max_features="sqrt", max_depth=None,
                 min_samples_leaf=1, seed=0, **_):
        self.n_trees, self.max_features = n_trees, max_features
        self.max_depth, self.min_samples_leaf, self.seed = max_depth, min_samples_leaf, seed

    def _mf(self, d):
        if self.max_features == "sqrt":
            return max(1, int(np.sqrt(d)))
        return d if self.max_features is None else int(self.max_features)

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        mf = self._mf(X.shape[1])
        seqs = np.random.SeedSequence(self.seed).spawn(self.n_trees)
        args = (mf, self.max_depth, self.min_samples_leaf)
        workers = min(n_workers(), self.n_trees)
        if workers > 1:
            from joblib import Parallel, delayed
            results = Parallel(n_jobs=workers)(
                delayed(_grow_forest_member)(X, y, s, *args) for s in seqs)
        else:
            results = [_grow_forest_member(X, y, s, *args) for s in seqs]
        self.trees_: list[Tree] = [r[0] for r in results]
        raw = np.mean([t.importances for t in self.trees_], axis=0)
        total = raw.sum()
        self.feature_importances_ = raw / total if total > 0 else raw
        self.oob_score_ = self._oob(X, y, [r[1] for r in results])
        log.info("random forest: %d trees, oob accuracy %.4f", self.n_trees, self.oob_score_)
        return self

    def _oob(self, X, y, samples):
        votes = np.zeros(len(X))
        counts = np.zeros(len(X))
        for tree, sample in zip(self.trees_, samples):
            out = np.ones(len(X), dtype=bool)
            out[sample] = False
            if out.any():
                votes[out] += tree.predict(X[out])
                counts[out] += 1
        seen = counts > 0
        if not seen.any():
            return float("nan")
        pred = (votes[seen] / counts[seen] >= 0.5).astype(int)
        return float(np.mean(pred == y[seen]))

    def predict_score(self, X):
        X = np.asarray(X, dtype=np.float64)
        return np.mean([t.predict(X) for t in self.trees_], axis=0)


class GradientBoosting:
    """Log-loss boosting of depth-limited regression trees with Newton leaves."""

    kind = "gboost"

    def __init__(self, n_trees=200, max_depth=3, learning_rate=0.1, **_):
        self.n_trees, self.max_depth, self.learning_rate = n_trees, max_depth, learning_rate

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        p0 = y.mean()
        self.init_ = float(np.log(p0 / (1 - p0)))
        F = np.full(len(y), self.init_)
        self.trees_ = []
        for _ in range(self.n_trees):
            p = sigmoid(F)
            tree = grow_newton_regressor(X, y - p, p * (1 - p), max_depth=self.max_depth)
            F += self.learning_rate * tree.predict(X)
            self.trees_.append(tree)
        self.train_loss_ = _bce(sigmoid(F), y)
        return self

    def decision_function(self, X):
        X = np.asarray(X, dtype=np.float64)
        F = np.full(len(X), self.init_)
        for tree in self.trees_:
            F += self.learning_rate * tree.predict(X)
        return F

    def predict_score(self, X):
        return sigmoid(self.decision_function(X))


# -- one-hidden-layer network ----------------------------------------------------------

def nnet_forward(params, X):
    W1, b1, W2, b2 = params
    a = X @ W1 + b1
    h = np.maximum(a, 0.0)
    z = h @ W2 + b2
    return a, h, z


def nnet_loss_grad(params, X, y):
    """Mean log-loss of the network and its gradient for every parameter."""
    W1, b1, W2, b2 = params
    a, h, z = nnet_forward(params, X)
    n = len(y)
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    dz = (sigmoid(z) - y) / n
    gW2 = h.T @ dz
    gb2 = dz.sum()
    dh = np.outer(dz, W2)
    da = dh * (a > 0)
    gW1 = X.T @ da
    gb1 = da.sum(axis=0)
    return loss, (gW1, gb1, gW2, float(gb2))


class NeuralNet:
    """32 ReLU hidden units, sigmoid output, minibatch SGD on log-loss."""

    kind = "nnet"

    def __init__(self, hidden=32, lr=0.01, epochs=100, batch_size=32, seed=0, **_):
        self.hidden, self.lr, self.epochs = hidden, lr, epochs
        self.batch_size, self.seed = batch_size, seed

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        rng = np.random.default_rng(self.seed)
        n, d = X.shape
        W1 = rng.normal(0.0, np.sqrt(2.0 / d), size=(d, self.hidden))
        b1 = np.zeros(self.hidden)
        W2 = rng.normal(0.0, np.sqrt(1.0 / self.hidden), size=self.hidden)
        b2 = 0.0
        yf = y.astype(np.float64)
        for _ in range(self.epochs):
            perm = rng.permutation(n)
            for s in range(0, n, self.batch_size):
                bi = perm[s:s + self.batch_size]
                _, (gW1, gb1, gW2, gb2) = nnet_loss_grad((W1, b1, W2, b2), X[bi], yf[bi])
                W1 -= self.lr * gW1
                b1 -= self.lr * gb1
                W2 -= self.lr * gW2
                b2 -= self.lr * gb2
        self.params_ = (W1, b1, W2, b2)
        return self

    def predict_score(self, X):
        _, _, z = nnet_forward(self.params_, np.asarray(X, dtype=np.float64))
        return sigmoid(z)


_REGISTRY = {
    "logreg": LogisticRegression,
    "knn": KNNClassifier,
    "dtree": DecisionTree,
    "rforest": RandomForest,
    "gboost": GradientBoosting,
    "nnet": NeuralNet,
}


def train(kind: str, X, y, hyperparams: dict | None = None, seed: int = 0):
    """Fit a classifier of the given kind and return it."""
    if kind not in _REGISTRY:
        raise ValueError(f"unknown classifier {kind!r}; choose from {', '.join(KINDS)}")
    model = _REGISTRY[kind](seed=seed, **(hyperparams or {}))
    return model.fit(X, y)
