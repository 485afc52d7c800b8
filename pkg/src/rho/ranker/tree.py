from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels


@dataclass
class RegressionTree:
    """Flat binary tree; ``feature[i] == -1`` marks a leaf holding ``value[i]``.

    Rows go left when ``x[feature] < threshold``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        def walk(i):
            if self.feature[i] < 0:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))
        return walk(0)

    def predict(self, X, traverse=None) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return (traverse or _kernels.traverse)(X, self.feature, self.threshold, self.left, self.right, self.value)

    def to_nodes(self) -> list[dict]:
        nodes = []
        for i in range(self.n_nodes):
            if self.feature[i] < 0:
                nodes.append({"v": float(self.value[i])})
            else:
                nodes.append({"f": int(self.feature[i]), "t": float(self.threshold[i]),
                              "l": int(self.left[i]), "r": int(self.right[i])})
        return nodes

    @classmethod
    def from_nodes(cls, nodes: list[dict]) -> "RegressionTree":
        n = len(nodes)
        feature = np.full(n, -1, dtype=np.int64)
        threshold = np.zeros(n)
        left = np.full(n, -1, dtype=np.int64)
        right = np.full(n, -1, dtype=np.int64)
        value = np.zeros(n)
        for i, nd in enumerate(nodes):
            if "v" in nd:
                value[i] = float(nd["v"])
            else:
                feature[i] = int(nd["f"])
                threshold[i] = float(nd["t"])
                left[i] = int(nd["l"])
                right[i] = int(nd["r"])
        return cls(feature, threshold, left, right, value)


def grow_tree(X, grad, hess, max_depth, min_samples_leaf=1, reg_lambda=0.0,
              min_gain=1e-12, split=None) -> RegressionTree:
    """Level-wise exact greedy tree on Newton statistics.

    Leaves take the Newton step ``-sum(grad) / (sum(hess) + reg_lambda)``.
    """
    split = split or _kernels.best_split
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        for arr, v in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1), (value, 0.0)):
            arr.append(v)
        return len(feature) - 1

    root = new_node()
    frontier = [(root, np.arange(X.shape[0], dtype=np.int64))]
    for depth in range(max_depth + 1):
        nxt = []
        for node, idx in frontier:
            g_sum = float(np.cumsum(grad[idx])[-1])
            h_sum = float(np.cumsum(hess[idx])[-1])
            f = -1
            if depth < max_depth and len(idx) >= 2 * min_samples_leaf:
                f, t, _ = split(X, grad, hess, idx, g_sum, h_sum, min_samples_leaf, reg_lambda, min_gain)
            if f < 0:
                value[node] = -g_sum / (h_sum + reg_lambda)
                continue
            go_left = X[idx, f] < t
            lnode, rnode = new_node(), new_node()
            feature[node], threshold[node], left[node], right[node] = f, t, lnode, rnode
            nxt.append((lnode, idx[go_left]))
            nxt.append((rnode, idx[~go_left]))
        frontier = nxt
        if not frontier:
            break
    return RegressionTree(np.array(feature, dtype=np.int64), np.array(threshold),
                          np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                          np.array(value))
