"""Sliding-window generalized extreme studentized deviate test.

Classic GESD is an offline test: repeatedly remove the most extreme point,
comparing each removal's R statistic against a critical value. Here it runs
online over a trailing window per sensor; the newest tick is flagged when
it is one of the declared outliers of its window. The reported score is the
margin R - lambda of the newest tick (max across sensors).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.stats import t as student_t

from .base import AnomalyScoreSeries, GesdConfig


@lru_cache(maxsize=None)
def gesd_critical_value(n: int, i: int, significance: float) -> float:
    """Critical value lambda_i for the i-th removal from an n-point window."""
    df = n - i - 1
    p = 1.0 - significance / (2.0 * (n - i + 1))
    tq = student_t.ppf(p, df)
    return float((n - i) * tq / np.sqrt((df + tq * tq) * (n - i + 1)))


def gesd_window_score(window: np.ndarray, cfg: GesdConfig) -> tuple[float, bool]:
    """Score the newest point of a single-sensor window.

    Returns (score, flagged): score is R - lambda at the step where the
    newest point was removed, or its plain studentized deviate minus
    lambda_1 when it never was. Zero-variance windows score 0, unflagged.
    """
    n = len(window)
    newest = n - 1
    active = np.ones(n, dtype=bool)
    removed_step = 0
    newest_score = None
    n_outliers = 0
    r_stats = []
    for i in range(1, cfg.max_anoms + 1):
        vals = window[active]
        std = vals.std(ddof=1)
        if std == 0.0:
            break
        mean = vals.mean()
        dev = np.abs(window - mean)
        dev[~active] = -np.inf
        worst = int(np.argmax(dev))
        r_i = dev[worst] / std
        lam = gesd_critical_value(n, i, cfg.significance)
        r_stats.append((r_i, lam))
        if r_i > lam:
            n_outliers = i
        if worst == newest:
            removed_step = i
            newest_score = float(r_i - lam)
        active[worst] = False
    if newest_score is None:
        full_std = window.std(ddof=1)
        if full_std == 0.0:
            return 0.0, False
        dev = abs(window[newest] - window.mean()) / full_std
        return float(dev - gesd_critical_value(n, 1, cfg.significance)), False
    flagged = 0 < removed_step <= n_outliers
    return newest_score, flagged


def _window_scores_vectorized(frame: np.ndarray, cfg: GesdConfig) -> tuple[float, bool]:
    """All sensors of one window at once; same math as gesd_window_score."""
    w, m = frame.shape
    newest = w - 1
    active = np.ones((w, m), dtype=bool)
    newest_score = np.full(m, np.nan)
    removed_step = np.zeros(m, dtype=int)
    n_outliers = np.zeros(m, dtype=int)
    alive = np.ones(m, dtype=bool)  # sensors still being processed
    for i in range(1, cfg.max_anoms + 1):
        counts = active.sum(axis=0)
        sums = np.where(active, frame, 0.0).sum(axis=0)
        means = sums / counts
        sq = np.where(active, (frame - means) ** 2, 0.0).sum(axis=0)
        var = sq / (counts - 1)
        std = np.sqrt(var)
        alive = alive & (std > 0.0)
        if not alive.any():
            break
        dev = np.where(active, np.abs(frame - means), -np.inf)
        worst = np.argmax(dev, axis=0)
        r_i = dev[worst, np.arange(m)] / np.where(std > 0, std, 1.0)
        lam = gesd_critical_value(w, i, cfg.significance)
        exceeds = alive & (r_i > lam)
        n_outliers[exceeds] = i
        hit_newest = alive & (worst == newest) & (removed_step == 0)
        newest_score[hit_newest] = r_i[hit_newest] - lam
        removed_step[hit_newest] = i
        active[worst[alive], np.where(alive)[0]] = False
    # sensors whose newest point never got removed: plain studentized deviate
    pending = np.isnan(newest_score)
    if pending.any():
        std_full = frame.std(axis=0, ddof=1)
        ok = pending & (std_full > 0)
        lam1 = gesd_critical_value(w, 1, cfg.significance)
        dev = np.abs(frame[newest] - frame.mean(axis=0))
        newest_score[ok] = dev[ok] / std_full[ok] - lam1
        newest_score[pending & ~ok] = 0.0
    flagged = (removed_step > 0) & (removed_step <= n_outliers)
    return float(newest_score.max()), bool(flagged.any())


def gesd_score_stream(values: np.ndarray, cfg: GesdConfig,
                      name: str = "gesd") -> AnomalyScoreSeries:
    """Per-sensor sliding GESD; per tick the max sensor margin is reported.

    Ticks before one full window are withheld.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    n_ticks, _ = values.shape
    scores = np.full(n_ticks, np.nan)
    flags = np.zeros(n_ticks, dtype=bool)
    w = cfg.window
    for t in range(w - 1, n_ticks):
        scores[t], flags[t] = _window_scores_vectorized(values[t - w + 1:t + 1], cfg)
    return AnomalyScoreSeries(detector=name, ticks=np.arange(n_ticks),
                              scores=scores, flags=flags)
