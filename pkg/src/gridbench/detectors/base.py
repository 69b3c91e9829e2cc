"""Shared detector types, configuration, and flag thresholds.

Every detector is online: its score at tick t depends on frames up to t
only. Fit-based detectors are fitted on the training region of the stream
and then score each test frame independently.

Scores are "higher = more anomalous". Withheld ticks (warm-up, empty
effective history) carry NaN and are never flagged. Flag thresholds follow
one rule, "3 robust-z equivalents": detectors whose score is already a
per-channel z use the Gaussian 3-sigma tail probability, corrected for how
many channels feed a max (Bonferroni) or combined via the chi-square
quantile (Mahalanobis); fit-based detectors flag scores more than 3 robust
standard deviations above their training-score median. GESD flags by its
own hypothesis-test decision.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2, norm

# two-sided tail mass of |z| > 3: the "3 robust z equivalents" reference
P_THREE_SIGMA = 2.0 * (1.0 - norm.cdf(3.0))


@dataclass(frozen=True)
class AnomalyScoreSeries:
    detector: str
    ticks: np.ndarray   # int ticks the scores refer to
    scores: np.ndarray  # NaN where withheld
    flags: np.ndarray   # bool, False where withheld
    threshold: float | None = None  # None when flags come from a test decision

    def __post_init__(self):
        if not (len(self.ticks) == len(self.scores) == len(self.flags)):
            raise ValueError("score series fields must align")
        if np.any(self.flags & np.isnan(self.scores)):
            raise ValueError("withheld ticks cannot be flagged")

    def flagged_ticks(self) -> set[int]:
        return {int(t) for t, f in zip(self.ticks, self.flags) if f}


@dataclass(frozen=True)
class GesdConfig:
    window: int = 50
    max_anoms: int = 2
    significance: float = 0.05

    def __post_init__(self):
        if self.window <= self.max_anoms:
            raise ValueError("window must exceed max_anoms")


@dataclass(frozen=True)
class ArimaConfig:
    p: int = 5
    d: int = 1
    q: int = 0  # pure AR residual model; q is fixed at 0
    fit_window: int = 200
    refit_every: int = 5
    ridge: float = 1e-8
    min_history: int = 40  # diffs required before scoring starts


@dataclass(frozen=True)
class VarConfig:
    max_lags: int = 5
    differencing: int = 1
    fit_window: int = 200
    refit_every: int = 5
    ridge: float = 1e-6
    min_rows_factor: float = 2.0  # rows per regressor before scoring starts


@dataclass(frozen=True)
class LofConfig:
    k: int = 3

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")


@dataclass(frozen=True)
class ParzenConfig:
    bandwidth_floor: float = 1e-6


@dataclass(frozen=True)
class OcsvmConfig:
    nu: float = 0.5
    gamma: float | None = None  # None = 1/(n_features * mean feature variance)
    tol: float = 1e-6
    max_iter: int = 200000

    def __post_init__(self):
        if not (0.0 < self.nu <= 1.0):
            raise ValueError("nu must lie in (0, 1]")


@dataclass(frozen=True)
class IforestConfig:
    trees: int = 100
    features_per_tree: int = 1
    subsample: int = 256

    def __post_init__(self):
        if self.trees < 1:
            raise ValueError("need at least one tree")


@dataclass(frozen=True)
class TopoConfig:
    tau: float = 0.005      # graph-distance decay of history weights
    history: int = 150      # trailing ticks kept per sensor
    min_ess: float = 10.0   # withhold when effective history drops below
    min_history: int = 20   # absolute warm-up
    scale_slack: float = 2.0  # distance-proportional tolerance added to the scale
    value_floor: float = 0.05
    finite_sample: float = 3.0  # scale inflation 1 + c/sqrt(ess) for short histories


@dataclass(frozen=True)
class DetectorConfig:
    gesd: GesdConfig = field(default_factory=GesdConfig)
    arima: ArimaConfig = field(default_factory=ArimaConfig)
    var: VarConfig = field(default_factory=VarConfig)
    lof: LofConfig = field(default_factory=LofConfig)
    parzen: ParzenConfig = field(default_factory=ParzenConfig)
    ocsvm: OcsvmConfig = field(default_factory=OcsvmConfig)
    iforest: IforestConfig = field(default_factory=IforestConfig)
    topo: TopoConfig = field(default_factory=TopoConfig)
    seed: int = 0


def max_z_threshold(n_channels: int) -> float:
    """z threshold matching the 3-sigma tail after a max over channels."""
    p = P_THREE_SIGMA / max(1, n_channels)
    return float(norm.ppf(1.0 - p / 2.0))


def mahalanobis_threshold(n_channels: int, dof: int | None = None,
                          inflation: float = 1.0) -> float:
    """Mahalanobis distance matching the 3-sigma tail mass.

    With ``dof`` (effective samples behind the covariance estimate) the
    asymptotic chi-square limit is replaced by the Hotelling T-squared
    prediction bound; ``inflation`` scales for additional prediction
    variance (e.g. regression leverage).
    """
    from scipy.stats import f as f_dist

    k = max(1, n_channels)
    if dof is None or dof <= k + 1:
        base = float(np.sqrt(chi2.ppf(1.0 - P_THREE_SIGMA, df=k)))
    else:
        fq = f_dist.ppf(1.0 - P_THREE_SIGMA, k, dof - k)
        base = float(np.sqrt(k * (dof - 1) / (dof - k) * fq))
    return base * inflation


def robust_train_threshold(train_scores: np.ndarray, z: float = 3.0) -> float:
    """median + z * 1.4826 * MAD of the training scores."""
    s = np.asarray(train_scores, dtype=float)
    s = s[np.isfinite(s)]
    if len(s) == 0:
        return np.inf
    med = float(np.median(s))
    mad = float(np.median(np.abs(s - med)))
    return med + z * 1.4826 * max(mad, 1e-12)
