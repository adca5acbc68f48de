"""Second-order gradient-boosted regression trees on one feature.

With squared loss the gradient is ``p - y`` and the hessian is 1, so a leaf's
optimal output reduces to ``sum(residuals) / (count + lambda)``. Because the
feature is one-dimensional, every tree node covers a contiguous run of the
time-sorted training samples, and all candidate splits of a node are scored at
once from prefix sums of the residuals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..datasets import TimeSeriesDataset
from ..errors import TrainingError


def leaf_output(residuals, lam: float) -> float:
    """Shrunk leaf weight: sum of residuals / (number of residuals + lambda)."""
    r = np.asarray(residuals, dtype=float)
    if r.size == 0:
        raise ValueError("leaf_output needs at least one residual")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    return float(r.sum() / (r.size + lam))


def _gain(g_left, n_left, g_right, n_right, lam):
    return 0.5 * (g_left ** 2 / (n_left + lam) + g_right ** 2 / (n_right + lam)
                  - (g_left + g_right) ** 2 / (n_left + n_right + lam))


def split_gain(left_residuals, right_residuals, lam: float) -> float:
    left = np.asarray(left_residuals, dtype=float)
    right = np.asarray(right_residuals, dtype=float)
    if left.size == 0 or right.size == 0:
        raise ValueError("both sides of a split must be nonempty")
    return float(_gain(left.sum(), left.size, right.sum(), right.size, lam))


@dataclass(frozen=True, eq=False)
class RegressionTree:
    """Flat binary tree. Node ``k`` is a leaf iff ``left[k] == -1``."""

    threshold: np.ndarray  # NaN at leaves
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # leaf output, 0 at internal nodes

    @property
    def n_nodes(self) -> int:
        return len(self.left)

    def depth(self) -> int:
        def walk(k):
            if self.left[k] < 0:
                return 0
            return 1 + max(walk(self.left[k]), walk(self.right[k]))
        return walk(0)

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        node = np.zeros(x.shape, dtype=int)
        while True:
            internal = self.left[node] >= 0
            if not internal.any():
                return self.value[node]
            go_left = x <= self.threshold[node]
            nxt = np.where(go_left, self.left[node], self.right[node])
            node = np.where(internal, nxt, node)


@dataclass(frozen=True, eq=False)
class GbtModel:
    base_score: float
    trees: tuple
    learning_rate: float = 0.3
    lam: float = 1.0
    max_depth: int = 6
    min_child_count: int = 1
    min_split_gain: float = 0.0
    train_rmse: tuple = field(default=(), repr=False)

    kind = "gbt"

    def predict(self, time_s):
        return predict_gbt(self, time_s)


def predict_gbt(model: GbtModel, time_s):
    x = np.asarray(time_s, dtype=float)
    out = np.full(np.atleast_1d(x).shape, model.base_score, dtype=float)
    for tree in model.trees:
        out += model.learning_rate * tree.predict(np.atleast_1d(x))
    return float(out[0]) if x.ndim == 0 else out


def _build_tree(x: np.ndarray, residual: np.ndarray, lam: float, max_depth: int,
                min_child: int, min_gain: float) -> RegressionTree:
    """Exact greedy tree over time-sorted ``x``."""
    csum = np.concatenate(([0.0], np.cumsum(residual)))
    distinct = np.concatenate(([False], x[1:] > x[:-1]))  # split allowed before index k
    threshold, left, right, value = [], [], [], []

    def new_node():
        threshold.append(math.nan)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(left) - 1

    stack = [(new_node(), 0, len(x), 0)]
    while stack:
        node, start, end, depth = stack.pop()
        n = end - start
        g_total = csum[end] - csum[start]
        best = None
        if depth < max_depth and n >= 2 * min_child:
            ks = np.arange(start + min_child, end - min_child + 1)
            ks = ks[distinct[ks]]
            if ks.size:
                g_left = csum[ks] - csum[start]
                n_left = ks - start
                gains = _gain(g_left, n_left, g_total - g_left, n - n_left, lam)
                b = int(np.argmax(gains))  # first max = lowest threshold
                if gains[b] > min_gain:
                    best = int(ks[b])
        if best is None:
            value[node] = float(g_total / (n + lam))
            continue
        threshold[node] = 0.5 * (x[best - 1] + x[best])
        lnode, rnode = new_node(), new_node()
        left[node], right[node] = lnode, rnode
        stack.append((rnode, best, end, depth + 1))
        stack.append((lnode, start, best, depth + 1))

    return RegressionTree(np.array(threshold), np.array(left, dtype=int),
                          np.array(right, dtype=int), np.array(value))


def fit_gbt(train: TimeSeriesDataset, rounds: int = 100, learning_rate: float = 0.3,
            lam: float = 1.0, max_depth: int = 6, min_child_count: int = 1,
            min_split_gain: float = 0.0) -> GbtModel:
    if rounds < 1:
        raise TrainingError("rounds must be >= 1")
    if not 0 < learning_rate <= 1:
        raise TrainingError(f"learning_rate must lie in (0, 1], got {learning_rate}")
    if lam < 0 or max_depth < 0 or min_child_count < 1 or min_split_gain < 0:
        raise TrainingError("lambda, max_depth, min_split_gain must be >= 0 and min_child_count >= 1")
    if len(train) < 1:
        raise TrainingError("boosting needs at least one sample")

    order = np.argsort(train.time, kind="stable")
    x = train.time[order]
    y = train.temperature[order]
    base = float(y.mean())
    pred = np.full_like(y, base)
    history = [float(np.sqrt(np.mean((y - pred) ** 2)))]
    trees = []
    for _ in range(rounds):
        tree = _build_tree(x, y - pred, lam, max_depth, min_child_count, min_split_gain)
        pred = pred + learning_rate * tree.predict(x)
        trees.append(tree)
        history.append(float(np.sqrt(np.mean((y - pred) ** 2))))
    return GbtModel(base, tuple(trees), learning_rate, lam, max_depth, min_child_count,
                    min_split_gain, tuple(history))
