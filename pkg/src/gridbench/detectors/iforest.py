"""Isolation forest with single-feature trees.

Each tree draws one feature uniformly at random and isolates a subsample
along that axis with uniform random split points, up to the standard
height cap ceil(log2(subsample)). Scores follow the usual path-length
normalization 2^(-E[h]/c(n)); c uses exact harmonic numbers so small-leaf
adjustments are exact (c(2) = 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base import IforestConfig
from ..rng import Rng


def average_path_length(n: int) -> float:
    """c(n) = 2*H(n-1) - 2*(n-1)/n with exact harmonic numbers; c(<=1) = 0."""
    if n <= 1:
        return 0.0
    h = float(np.sum(1.0 / np.arange(1, n)))
    return 2.0 * h - 2.0 * (n - 1) / n


@dataclass
class _Node:
    split: float | None   # None marks a leaf
    size: int             # leaf size (0 for internal nodes)
    left: int = -1
    right: int = -1


@dataclass
class IsolationTree:
    feature: int
    nodes: list[_Node]

    def path_length(self, value: float) -> float:
        idx = 0
        depth = 0
        while True:
            node = self.nodes[idx]
            if node.split is None:
                return depth + average_path_length(node.size)
            idx = node.left if value < node.split else node.right
            depth += 1


@dataclass
class IsolationForestModel:
    trees: list[IsolationTree]
    subsample: int

    def expected_path_length(self, x: np.ndarray) -> float:
        return float(np.mean([t.path_length(float(x[t.feature])) for t in self.trees]))


def _grow(values: np.ndarray, depth: int, cap: int, rng: Rng,
          nodes: list[_Node]) -> int:
    idx = len(nodes)
    lo, hi = float(values.min()), float(values.max())
    if depth >= cap or len(values) <= 1 or hi - lo <= 0.0:
        nodes.append(_Node(split=None, size=len(values)))
        return idx
    split = rng.uniform(lo, hi)
    nodes.append(_Node(split=split, size=0))
    left = _grow(values[values < split], depth + 1, cap, rng, nodes)
    right = _grow(values[values >= split], depth + 1, cap, rng, nodes)
    nodes[idx].left = left
    nodes[idx].right = right
    return idx


def iforest_fit(train: np.ndarray, cfg: IforestConfig, seed: int) -> IsolationForestModel:
    train = np.atleast_2d(np.asarray(train, dtype=float))
    n, d = train.shape
    if n < 8:
        raise ValueError("need at least 8 training points")
    psi = min(cfg.subsample, n)
    cap = max(1, math.ceil(math.log2(psi)))
    rng = Rng(seed)
    trees = []
    for t in range(cfg.trees):
        tree_rng = rng.spawn(t)
        feature = tree_rng.randrange(d)
        if psi < n:
            order = list(range(n))
            tree_rng.shuffle(order)
            sample = train[order[:psi], feature]
        else:
            sample = train[:, feature]
        nodes: list[_Node] = []
        _grow(sample, 0, cap, tree_rng, nodes)
        trees.append(IsolationTree(feature=feature, nodes=nodes))
    return IsolationForestModel(trees=trees, subsample=psi)


def iforest_score(model: IsolationForestModel, queries: np.ndarray) -> np.ndarray:
    """2^(-E[h(x)]/c(subsample)); approaches 1 for easily isolated points."""
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    c_n = average_path_length(model.subsample)
    out = np.empty(len(queries))
    for i, q in enumerate(queries):
        out[i] = 2.0 ** (-model.expected_path_length(q) / c_n)
    return out
