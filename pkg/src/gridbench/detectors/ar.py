"""Autoregressive residual scoring: per-channel AR (ARIMA(p,1,0)) and VAR.

Both first-difference the stream, fit AR coefficients by ordinary least
squares on a rolling history, and score the one-step-ahead residual of the
newest tick: absolute z per channel (max reported) for the univariate
model, Mahalanobis distance under the residual covariance for the VAR.
Coefficients are refit every ``refit_every`` ticks to keep the stream pass
cheap; between refits the stored coefficients keep predicting.
"""

from __future__ import annotations

import warnings

import numpy as np

from .base import (
    AnomalyScoreSeries,
    ArimaConfig,
    VarConfig,
    mahalanobis_threshold,
    max_z_threshold,
)


def ar_fit_batch(diffs: np.ndarray, p: int, ridge: float) -> tuple[np.ndarray, np.ndarray]:
    """OLS AR(p)-with-intercept fits for every channel of a diff window.

    Returns (coefs, sigmas): coefs is (channels, p+1) with the intercept
    last; sigmas are residual standard deviations. Singular normal
    equations fall back to ridge regression with a warning.
    """
    diffs = np.atleast_2d(diffs)
    rows = diffs.shape[0] - p
    if rows < p + 2:
        raise ValueError("history too short for the requested lag order")
    m = diffs.shape[1]
    # lag tensor: L[k, r, c] = diffs[p - 1 - k + r, c]
    lags = np.stack([diffs[p - 1 - k: p - 1 - k + rows] for k in range(p)])
    design = np.concatenate([lags, np.ones((1, rows, m))])  # (p+1, rows, m)
    y = diffs[p:]
    a = np.einsum("krm,lrm->mkl", design, design)
    b = np.einsum("krm,rm->mk", design, y)
    try:
        coefs = np.linalg.solve(a, b[..., None])[..., 0]
    except np.linalg.LinAlgError:
        warnings.warn("rank-deficient AR regression; using ridge fallback", stacklevel=2)
        a = a + ridge * np.eye(p + 1)[None, :, :]
        coefs = np.linalg.solve(a, b[..., None])[..., 0]
    preds = np.einsum("krm,mk->rm", design, coefs)
    resid = y - preds
    dof = max(1, rows - (p + 1))
    sigmas = np.sqrt((resid ** 2).sum(axis=0) / dof)
    return coefs, sigmas


def ar_predict(history: np.ndarray, coefs: np.ndarray, p: int) -> np.ndarray:
    """One-step prediction per channel from the trailing p diffs."""
    recent = history[-p:][::-1]  # lag 1 first
    return np.einsum("km,mk->m", recent, coefs[:, :p]) + coefs[:, p]


def arima_score_stream(values: np.ndarray, cfg: ArimaConfig,
                       name: str = "arima") -> AnomalyScoreSeries:
    """Max over channels of the absolute one-step residual z-score."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    n_ticks, m = values.shape
    d = cfg.d
    diffs = np.diff(values, n=d, axis=0) if d else values.copy()
    scores = np.full(n_ticks, np.nan)
    flags = np.zeros(n_ticks, dtype=bool)
    threshold = max_z_threshold(m)
    min_hist = max(cfg.min_history, cfg.p + 2 * (cfg.p + 1))
    coefs = sigmas = None
    fitted_at = -1
    for t in range(n_ticks):
        i = t - d  # index of the diff that first involves tick t
        if i < min_hist:
            continue
        window = diffs[max(0, i - cfg.fit_window):i]
        if coefs is None or t - fitted_at >= cfg.refit_every:
            coefs, sigmas = ar_fit_batch(window, cfg.p, cfg.ridge)
            fitted_at = t
        pred = ar_predict(window, coefs, cfg.p)
        resid = diffs[i] - pred
        z = np.abs(resid) / np.maximum(sigmas, 1e-9)
        scores[t] = float(z.max())
        flags[t] = scores[t] > threshold
    return AnomalyScoreSeries(detector=name, ticks=np.arange(n_ticks),
                              scores=scores, flags=flags, threshold=threshold)


def var_channel_subset(values: np.ndarray, cfg: VarConfig) -> np.ndarray:
    """Channel indices used by the VAR.

    With many sensors the regression would be underdetermined, so when
    channels exceed fit_window/4 the highest-variance subset is kept, sized
    to leave the least squares problem comfortably overdetermined.
    """
    m = values.shape[1]
    if m <= cfg.fit_window // 4:
        return np.arange(m)
    cap = max(1, (cfg.fit_window - cfg.max_lags - 1) // (2 * cfg.max_lags))
    variances = values.var(axis=0)
    return np.sort(np.argsort(-variances)[:min(m, cap)])


def var_fit(diffs: np.ndarray, p: int, ridge: float) -> tuple[np.ndarray, np.ndarray]:
    """Joint VAR(p) OLS fit. Returns (coef matrix, residual covariance).

    coef has shape (k*p + 1, k): stacked lag blocks then intercept row.
    """
    rows = diffs.shape[0] - p
    k = diffs.shape[1]
    x = np.concatenate([diffs[p - 1 - j: p - 1 - j + rows] for j in range(p)], axis=1)
    x = np.concatenate([x, np.ones((rows, 1))], axis=1)
    y = diffs[p:]
    coef, *_ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ coef
    dof = max(1, rows - x.shape[1])
    cov = resid.T @ resid / dof + ridge * np.eye(k)
    return coef, cov


def var_predict(history: np.ndarray, coef: np.ndarray, p: int) -> np.ndarray:
    x = np.concatenate([history[-1 - j] for j in range(p)] + [np.ones(1)])
    return x @ coef


def var_score_stream(values: np.ndarray, cfg: VarConfig,
                     name: str = "var") -> AnomalyScoreSeries:
    """Mahalanobis distance of the joint one-step residual.

    Scoring starts once the rolling window holds ``min_rows_factor`` rows
    per regressor; the flag threshold is the Hotelling prediction bound at
    the current effective degrees of freedom, so early fits get a wider
    berth than asymptotic chi-square would grant.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    n_ticks, _ = values.shape
    d = cfg.differencing
    p = cfg.max_lags
    scores = np.full(n_ticks, np.nan)
    flags = np.zeros(n_ticks, dtype=bool)
    warm = 8 * p  # enough raw ticks to rank channel variances
    subset: np.ndarray | None = None
    coef = cov_inv = None
    fitted_at = -1
    threshold = None
    n_regressors = None
    for t in range(n_ticks):
        i = t - d
        if i < warm:
            continue
        if subset is None:
            subset = var_channel_subset(values[:t], cfg)
            n_regressors = len(subset) * p + 1
        rows_avail = i - p
        if rows_avail < cfg.min_rows_factor * n_regressors:
            continue
        sub = values[:t + 1, subset]
        diffs = np.diff(sub, n=d, axis=0) if d else sub
        window = diffs[max(0, len(diffs) - 1 - cfg.fit_window):-1]
        if coef is None or t - fitted_at >= cfg.refit_every:
            coef, cov = var_fit(window, p, cfg.ridge)
            cov_inv = np.linalg.inv(cov)
            fitted_at = t
            rows = len(window) - p
            dof = max(len(subset) + 2, rows - n_regressors)
            leverage = np.sqrt(1.0 + n_regressors / max(1, rows))
            threshold = mahalanobis_threshold(len(subset), dof=dof,
                                              inflation=leverage)
        resid = diffs[-1] - var_predict(window, coef, p)
        scores[t] = float(np.sqrt(resid @ cov_inv @ resid))
        flags[t] = scores[t] > threshold
    return AnomalyScoreSeries(detector=name, ticks=np.arange(n_ticks),
                              scores=scores, flags=flags, threshold=threshold)
