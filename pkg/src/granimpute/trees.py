"""CART trees stored as flat arrays: Gini classification and squared-error regression."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LEAF = -1


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    impurity: np.ndarray
    importances: np.ndarray

    @property
    def node_count(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of X."""
        node = np.zeros(len(X), dtype=np.intp)
        active = np.flatnonzero(self.feature[node] != LEAF)
        while active.size:
            nd = node[active]
            go_left = X[active, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.feature[node[active]] != LEAF]
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


def gini(pos: float, n: float) -> float:
    if n <= 0:
        return 0.0
    p = pos / n
    return 2.0 * p * (1.0 - p)


def best_gini_split(x: np.ndarray, y: np.ndarray, min_leaf: int):
    """Lowest weighted child Gini (n_l*G_l + n_r*G_r) over thresholds on one feature.

    Returns (weighted_impurity, threshold) or None when no admissible
    threshold exists.
    """
    n = len(x)
    order = np.argsort(x, kind="stable")
    xs = x[order]
    cum = np.cumsum(y[order], dtype=np.float64)
    total = cum[-1]
    nl = np.arange(1, n, dtype=np.float64)
    nr = n - nl
    pl = cum[:-1]
    pr = total - pl
    valid = xs[:-1] < xs[1:]
    if min_leaf > 1:
        valid &= (nl >= min_leaf) & (nr >= min_leaf)
    if not valid.any():
        return None
    w = 2.0 * pl * (nl - pl) / nl + 2.0 * pr * (nr - pr) / nr
    w = np.where(valid, w, np.inf)
    i = int(np.argmin(w))
    return float(w[i]), _midpoint(xs[i], xs[i + 1])


def best_sse_split(x: np.ndarray, g: np.ndarray, min_leaf: int):
    """Lowest child sum of squared errors of ``g`` over thresholds on one feature.

    Returns (sse_children - sum(g^2), threshold) or None; only differences
    between candidates matter.
    """
    n = len(x)
    order = np.argsort(x, kind="stable")
    xs = x[order]
    cum = np.cumsum(g[order])
    total = cum[-1]
    nl = np.arange(1, n, dtype=np.float64)
    nr = n - nl
    sl = cum[:-1]
    sr = total - sl
    valid = xs[:-1] < xs[1:]
    if min_leaf > 1:
        valid &= (nl >= min_leaf) & (nr >= min_leaf)
    if not valid.any():
        return None
    score = -(sl * sl / nl + sr * sr / nr)
    score = np.where(valid, score, np.inf)
    i = int(np.argmin(score))
    return float(score[i]), _midpoint(xs[i], xs[i + 1])


def _midpoint(a: float, b: float) -> float:
    m = a + (b - a) / 2.0
    return float(a) if m >= b else float(m)


class _Builder:
    def __init__(self):
        self.feature, self.threshold, self.left, self.right = [], [], [], []
        self.value, self.n, self.imp = [], [], []

    def add(self, value, n, impurity) -> int:
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(value)
        self.n.append(n)
        self.imp.append(impurity)
        return len(self.feature) - 1

    def finish(self, importances) -> Tree:
        return Tree(np.array(self.feature, dtype=np.intp), np.array(self.threshold),
                    np.array(self.left, dtype=np.intp), np.array(self.right, dtype=np.intp),
                    np.array(self.value), np.array(self.n, dtype=np.int64),
                    np.array(self.imp), importances)


def _feature_order(d: int, max_features: int | None, rng):
    if max_features is None or max_features >= d or rng is None:
        return list(range(d)), []
    perm = rng.permutation(d)
    return list(perm[:max_features]), list(perm[max_features:])


def grow_classifier(X: np.ndarray, y: np.ndarray, *, max_depth: int | None = None,
                    min_samples_leaf: int = 1, max_features: int | None = None,
                    rng: np.random.Generator | None = None,
                    sample: np.ndarray | None = None) -> Tree:
    """Grow a binary Gini CART tree; leaf value = fraction of positives.

    ``sample`` lists the training row indices (repeats allowed, as in a
    bootstrap draw). Splits are taken whenever a node is impure, even if the
    best split does not lower the impurity; importances hold the weighted
    impurity decrease per feature, as fractions of the root sample size.
    """
    y = np.asarray(y, dtype=np.float64)
    idx_root = np.arange(len(X)) if sample is None else np.asarray(sample, dtype=np.intp)
    n_root = float(len(idx_root))
    d = X.shape[1]
    imps = np.zeros(d)
    b = _Builder()
    root_pos = float(y[idx_root].sum())
    stack = [(b.add(root_pos / n_root, len(idx_root), gini(root_pos, n_root)), idx_root, 0)]
    while stack:
        node, idx, depth = stack.pop()
        n = len(idx)
        parent = b.imp[node]
        if parent <= 0.0 or (max_depth is not None and depth >= max_depth) \
                or n < 2 * min_samples_leaf:
            continue
        yi = y[idx]
        first, rest = _feature_order(d, max_features, rng)
        best = None
        for f in first:
            res = best_gini_split(X[idx, f], yi, min_samples_leaf)
            if res is not None and (best is None or res[0] < best[0]):
                best = (res[0], res[1], f)
        for f in rest:
            if best is not None:
                break
            res = best_gini_split(X[idx, f], yi, min_samples_leaf)
            if res is not None:
                best = (res[0], res[1], f)
        if best is None:
            continue
        w, thr, f = best
        imps[f] += (n * parent - w) / n_root
        go_left = X[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        lp, rp = float(y[li].sum()), float(y[ri].sum())
        ln = b.add(lp / len(li), len(li), gini(lp, len(li)))
        rn = b.add(rp / len(ri), len(ri), gini(rp, len(ri)))
        b.feature[node], b.threshold[node] = int(f), thr
        b.left[node], b.right[node] = ln, rn
        stack.append((rn, ri, depth + 1))
        stack.append((ln, li, depth + 1))
    return b.finish(np.maximum(imps, 0.0))


def grow_newton_regressor(X: np.ndarray, grad: np.ndarray, hess: np.ndarray, *,
                          max_depth: int = 3, min_samples_leaf: int = 1,
                          min_hessian: float = 1e-12) -> Tree:
    """Squared-error regression tree on ``grad`` with Newton leaf values sum(g)/sum(h)."""
    d = X.shape[1]
    imps = np.zeros(d)
    n_root = float(len(X))
    b = _Builder()

    def leaf_value(idx):
        return float(grad[idx].sum() / max(hess[idx].sum(), min_hessian))

    def sse(idx):
        gi = grad[idx]
        return float(((gi - gi.mean()) ** 2).sum())

    root = np.arange(len(X))
    stack = [(b.add(leaf_value(root), len(root), sse(root)), root, 0)]
    while stack:
        node, idx, depth = stack.pop()
        if depth >= max_depth or len(idx) < 2 * min_samples_leaf or b.imp[node] <= 0.0:
            continue
        gi = grad[idx]
        base = float(gi.sum() ** 2 / len(idx))
        best = None
        for f in range(d):
            res = best_sse_split(X[idx, f], gi, min_samples_leaf)
            if res is not None and (best is None or res[0] < best[0]):
                best = (res[0], res[1], f)
        if best is None:
            continue
        score, thr, f = best
        imps[f] += max(-score - base, 0.0) / n_root
        go_left = X[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        ln = b.add(leaf_value(li), len(li), sse(li))
        rn = b.add(leaf_value(ri), len(ri), sse(ri))
        b.feature[node], b.threshold[node] = int(f), thr
        b.left[node], b.right[node] = ln, rn
        stack.append((rn, ri, depth + 1))
        stack.append((ln, li, depth + 1))
    return b.finish(imps)
