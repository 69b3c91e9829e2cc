"""Neighborhood density scoring: local outlier factor and Parzen windows."""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from .base import LofConfig, ParzenConfig

_DIST_EPS = 1e-12  # duplicate points would otherwise zero the densities


def _k_neighborhood(dists: np.ndarray, k: int) -> tuple[np.ndarray, list[np.ndarray]]:
    """k-distance and the (tie-inclusive) k-neighborhood per row."""
    n = dists.shape[0]
    kth = np.partition(dists, k - 1, axis=1)[:, k - 1]
    neighborhoods = [np.where(dists[i] <= kth[i])[0] for i in range(n)]
    return kth, neighborhoods


def lof_fit(train: np.ndarray, cfg: LofConfig) -> dict:
    """Precompute k-distances and local reachability densities of the
    training set."""
    train = np.atleast_2d(np.asarray(train, dtype=float))
    n = len(train)
    if n <= cfg.k:
        raise ValueError(f"need more than k={cfg.k} training points, got {n}")
    d = np.maximum(cdist(train, train), _DIST_EPS)
    np.fill_diagonal(d, np.inf)
    kdist, neigh = _k_neighborhood(d, cfg.k)
    lrd = np.empty(n)
    for i in range(n):
        reach = np.maximum(kdist[neigh[i]], d[i, neigh[i]])
        lrd[i] = 1.0 / reach.mean()
    return {"train": train, "kdist": kdist, "lrd": lrd, "k": cfg.k}


def lof_train_scores(model: dict) -> np.ndarray:
    """LOF of each training point within the training set (self excluded)."""
    train, kdist, lrd, k = model["train"], model["kdist"], model["lrd"], model["k"]
    d = np.maximum(cdist(train, train), _DIST_EPS)
    np.fill_diagonal(d, np.inf)
    _, neigh = _k_neighborhood(d, k)
    out = np.empty(len(train))
    for i in range(len(train)):
        out[i] = lrd[neigh[i]].mean() / lrd[i]
    return out


def lof_score(model: dict, queries: np.ndarray) -> np.ndarray:
    """LOF of each query against the fitted training set (higher = sparser)."""
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    d = np.maximum(cdist(queries, model["train"]), _DIST_EPS)
    kdist_q, neigh_q = _k_neighborhood(d, model["k"])
    out = np.empty(len(queries))
    for i in range(len(queries)):
        nb = neigh_q[i]
        reach = np.maximum(model["kdist"][nb], d[i, nb])
        lrd_q = 1.0 / reach.mean()
        out[i] = model["lrd"][nb].mean() / lrd_q
    return out


def silverman_bandwidths(train: np.ndarray, floor: float) -> np.ndarray:
    """Per-dimension Silverman rule bandwidths."""
    n, d = train.shape
    sigma = train.std(axis=0, ddof=1) if n > 1 else np.zeros(d)
    h = sigma * (4.0 / ((d + 2.0) * n)) ** (1.0 / (d + 4.0))
    return np.maximum(h, floor)


def parzen_fit(train: np.ndarray, cfg: ParzenConfig) -> dict:
    train = np.atleast_2d(np.asarray(train, dtype=float))
    if len(train) < 2:
        raise ValueError("need at least 2 training points")
    return {"train": train,
            "h": silverman_bandwidths(train, cfg.bandwidth_floor)}


def parzen_log_density(model: dict, queries: np.ndarray) -> np.ndarray:
    """Log Gaussian-kernel density estimate at each query point."""
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    train, h = model["train"], model["h"]
    n, d = train.shape
    log_norm = -0.5 * d * np.log(2.0 * np.pi) - np.log(h).sum()
    out = np.empty(len(queries))
    for i, q in enumerate(queries):
        z = (q - train) / h
        log_kernels = log_norm - 0.5 * (z * z).sum(axis=1)
        out[i] = logsumexp(log_kernels) - np.log(n)
    return out


def parzen_score(model: dict, queries: np.ndarray) -> np.ndarray:
    """Negative log density: higher score = lower estimated density."""
    return -parzen_log_density(model, queries)
