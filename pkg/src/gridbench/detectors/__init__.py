"""Detector suite behind one online-scoring interface.

Streaming detectors (gesd, arima, var, topo) score the whole stream with a
warm-up prefix withheld. Fit-based detectors (lof, parzen, ocsvm, iforest)
are fitted on the training-topology frames and score the test-topology
frames; features are standardized with training statistics.
"""

from __future__ import annotations

import numpy as np

from .base import (
    AnomalyScoreSeries,
    ArimaConfig,
    DetectorConfig,
    GesdConfig,
    IforestConfig,
    LofConfig,
    OcsvmConfig,
    ParzenConfig,
    TopoConfig,
    VarConfig,
    max_z_threshold,
    mahalanobis_threshold,
    robust_train_threshold,
)
from .ar import arima_score_stream, var_score_stream
from .density import (
    lof_fit,
    lof_score,
    lof_train_scores,
    parzen_fit,
    parzen_log_density,
    parzen_score,
)
from .gesd import gesd_critical_value, gesd_score_stream, gesd_window_score
from .iforest import average_path_length, iforest_fit, iforest_score
from .ocsvm import OcsvmError, OcsvmModel, ocsvm_fit, ocsvm_score, rbf_kernel
from .topo import graph_distance, sensitivity_weights, topo_aware_score

DETECTOR_NAMES = ("gesd", "arima", "var", "lof", "parzen", "ocsvm", "iforest", "topo")
STREAMING = ("gesd", "arima", "var", "topo")
FIT_BASED = ("lof", "parzen", "ocsvm", "iforest")


def _standardize(train: np.ndarray, other: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = train.mean(axis=0)
    std = np.maximum(train.std(axis=0), 1e-9)
    return (train - mean) / std, (other - mean) / std


def _fit_based_series(name: str, stream, cfg: DetectorConfig) -> AnomalyScoreSeries:
    train_ticks = np.array(stream.train_ticks, dtype=int)
    test_ticks = np.array(stream.test_ticks, dtype=int)
    if len(train_ticks) == 0:
        raise ValueError(f"{name} needs a training region")
    train_raw = stream.values[train_ticks]
    test_raw = stream.values[test_ticks] if len(test_ticks) else np.empty((0, stream.values.shape[1]))
    train, test = _standardize(train_raw, test_raw)

    if name == "lof":
        model = lof_fit(train, cfg.lof)
        train_scores = lof_train_scores(model)
        scores = lof_score(model, test) if len(test) else np.empty(0)
    elif name == "parzen":
        model = parzen_fit(train, cfg.parzen)
        train_scores = parzen_score(model, train)
        scores = parzen_score(model, test) if len(test) else np.empty(0)
    elif name == "ocsvm":
        model = ocsvm_fit(train, cfg.ocsvm)
        train_scores = ocsvm_score(model, train)
        scores = ocsvm_score(model, test) if len(test) else np.empty(0)
    elif name == "iforest":
        model = iforest_fit(train, cfg.iforest, seed=cfg.seed)
        train_scores = iforest_score(model, train)
        scores = iforest_score(model, test) if len(test) else np.empty(0)
    else:  # pragma: no cover
        raise ValueError(name)
    threshold = robust_train_threshold(train_scores)
    flags = scores > threshold
    return AnomalyScoreSeries(detector=name, ticks=test_ticks,
                              scores=np.asarray(scores, dtype=float), flags=flags,
                              threshold=threshold)


def score_stream(stream, names=DETECTOR_NAMES, cfg: DetectorConfig | None = None,
                 case=None) -> dict[str, AnomalyScoreSeries]:
    """Run the selected detectors over a labeled stream.

    ``case`` is required for the topology-aware detector (distance weights).
    Unknown names raise with the valid list.
    """
    cfg = cfg or DetectorConfig()
    out: dict[str, AnomalyScoreSeries] = {}
    for name in names:
        if name == "gesd":
            out[name] = gesd_score_stream(stream.values, cfg.gesd)
        elif name == "arima":
            out[name] = arima_score_stream(stream.values, cfg.arima)
        elif name == "var":
            out[name] = var_score_stream(stream.values, cfg.var)
        elif name == "topo":
            if case is None:
                raise ValueError("the topology-aware detector needs the grid case")
            out[name] = topo_aware_score(stream.values, stream.topology_id_per_tick,
                                         stream.topology_registry, case, cfg.topo)
        elif name in FIT_BASED:
            out[name] = _fit_based_series(name, stream, cfg)
        else:
            raise ValueError(
                f"unknown detector {name!r}; valid names: {', '.join(DETECTOR_NAMES)}")
    return out


__all__ = [
    "AnomalyScoreSeries", "ArimaConfig", "DETECTOR_NAMES", "DetectorConfig",
    "FIT_BASED", "GesdConfig", "IforestConfig", "LofConfig", "OcsvmConfig",
    "OcsvmError", "OcsvmModel", "ParzenConfig", "STREAMING", "TopoConfig",
    "VarConfig", "arima_score_stream", "average_path_length", "gesd_critical_value",
    "gesd_score_stream", "gesd_window_score", "graph_distance", "iforest_fit",
    "iforest_score", "lof_fit", "lof_score", "lof_train_scores",
    "mahalanobis_threshold", "max_z_threshold", "ocsvm_fit", "ocsvm_score",
    "parzen_fit", "parzen_log_density", "parzen_score", "rbf_kernel",
    "robust_train_threshold", "score_stream", "sensitivity_weights",
    "topo_aware_score", "var_score_stream",
]
