"""Synthetic load/generation profiles and their summary statistics.

Three layers:

* trace synthesis: decompose a real trace into (base, variation, noise),
  then re-synthesize at a new length as ``(1 + alpha*c_new(t) + n_s(t)) * mu``
* style profiles: parametric daily multiplier shapes (constant, smooth,
  oscillating, abrupt, plus generation variants with unit-commitment gaps)
* load scaling: naive / grouped / brute-force factor sampling used by the
  data-augmentation experiments

All randomness flows through :class:`gridbench.rng.Rng`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .rng import Rng, derive_seed

POSITIVE_FLOOR = 1e-4

STYLES = ("constant", "smooth", "oscillating", "abrupt",
          "gen_constant", "gen_ramping", "gen_unit_commit")
SCALING_MODES = ("naive", "grouped", "brute_force")

# Population mix calibrated so that roughly 90% of loads clear the
# 8%-of-daily-max half-hourly delta (abrupt loads are the intended tail).
DEFAULT_STYLE_MIX = (("smooth", 0.50), ("constant", 0.20),
                     ("oscillating", 0.22), ("abrupt", 0.08))


class LoadSynthError(ValueError):
    pass


@dataclass(frozen=True)
class TraceComponents:
    """(base, variation, noise std) decomposition of a load trace."""

    mu: float
    variation: np.ndarray  # zero-mean, dimensionless, length of the source
    noise_sigma: float

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise LoadSynthError("noise_sigma must be nonnegative")


@dataclass(frozen=True)
class StyleParams:
    """Parameters of one daily multiplier profile.

    ``amplitude`` is the relative height of the low-frequency hump;
    style-specific knobs: ``ripple``/``osc_freq`` (oscillating),
    ``step_tick``/``step_height`` (abrupt), ``off_intervals`` (unit
    commitment, half-open tick ranges).
    """

    style: str
    peak_tick: int = 0
    amplitude: float = 0.0
    ripple: float = 0.01
    osc_freq: float = 8.0
    step_tick: int = 0
    step_height: float = 0.0
    off_intervals: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.style not in STYLES:
            raise LoadSynthError(f"unknown style {self.style!r}")
        if self.amplitude < 0:
            raise LoadSynthError("amplitude must be nonnegative")
        if self.peak_tick < 0:
            raise LoadSynthError("peak_tick must be nonnegative")


@dataclass(frozen=True)
class ScalingMode:
    mode: str
    factor_range: tuple[float, float] = (0.8, 1.2)

    def __post_init__(self):
        if self.mode not in SCALING_MODES:
            raise LoadSynthError(f"unknown scaling mode {self.mode!r}")
        lo, hi = self.factor_range
        if not (0 < lo <= hi):
            raise LoadSynthError("factor_range must satisfy 0 < lo <= hi")


@dataclass(frozen=True)
class DeltaStats:
    """Per-load worst step size relative to daily max, plus threshold table."""

    ratios: np.ndarray                      # one entry per load
    fraction_under: dict[float, float]      # threshold -> fraction of loads


@dataclass(frozen=True)
class AggregateStats:
    totals: np.ndarray
    min_frac: float  # min(total)/mean(total)
    max_frac: float


def decompose_trace(trace: np.ndarray, window: int = 5) -> TraceComponents:
    """Split a positive trace into base level, slow variation, and noise.

    The variation is a centered moving average of the normalized trace
    (shrinking windows at the edges), re-centered to exact zero mean; the
    residual's sample standard deviation becomes the noise level.
    """
    trace = np.asarray(trace, dtype=float)
    if window < 3:
        raise LoadSynthError("window must be at least 3")
    if len(trace) < window:
        raise LoadSynthError("trace must be at least one window long")
    if np.any(trace <= 0):
        raise LoadSynthError("trace values must be positive")
    mu = float(trace.mean())
    ratio = trace / mu - 1.0
    half = window // 2
    # odd (anti-symmetric) reflection keeps the smoother exact on linear
    # trends at the boundaries
    front = 2.0 * ratio[0] - ratio[half:0:-1]
    back = 2.0 * ratio[-1] - ratio[-2:-half - 2:-1]
    padded = np.concatenate([front, ratio, back])
    kernel = np.full(2 * half + 1, 1.0 / (2 * half + 1))
    variation = np.convolve(padded, kernel, mode="valid")
    variation -= variation.mean()
    residual = ratio - variation
    residual -= residual.mean()
    sigma = float(residual.std(ddof=1)) if len(residual) > 1 else 0.0
    return TraceComponents(mu=mu, variation=variation, noise_sigma=sigma)


def synthesize_trace(components: TraceComponents, t_new: int, alpha: float,
                     seed: int) -> np.ndarray:
    """Resample the variation to ``t_new`` ticks and re-apply noise.

    Output is ``(1 + alpha*c_new + n_s) * mu`` with ``n_s`` i.i.d. Gaussian
    of the learned sigma. Non-positive values are clamped to a small floor
    (with a warning) so downstream power flows stay sane.
    """
    if t_new < 2:
        raise LoadSynthError("t_new must be at least 2")
    var = components.variation
    src = np.linspace(0.0, len(var) - 1.0, t_new)
    c_new = np.interp(src, np.arange(len(var), dtype=float), var)
    rng = Rng(seed)
    noise = rng.normals(t_new, 0.0, components.noise_sigma)
    out = (1.0 + alpha * c_new + noise) * components.mu
    floor = POSITIVE_FLOOR
    if np.any(out <= 0):
        warnings.warn(f"synthesized trace clamped to {floor} at "
                      f"{int(np.sum(out <= 0))} tick(s)", stacklevel=2)
        out = np.maximum(out, floor)
    return out


def style_profile(params: StyleParams, horizon: int, seed: int = 0) -> np.ndarray:
    """Dimensionless positive multiplier series for one load or generator.

    Strictly positive everywhere except unit-commitment off intervals,
    which are exactly zero.
    """
    if horizon < 2:
        raise LoadSynthError("horizon must be at least 2")
    if params.peak_tick >= horizon:
        raise LoadSynthError(f"peak_tick {params.peak_tick} outside horizon {horizon}")
    t = np.arange(horizon, dtype=float)
    hump = 1.0 + params.amplitude * np.cos(
        2.0 * math.pi * (t - params.peak_tick) / horizon)

    style = params.style
    if style in ("constant", "gen_constant"):
        out = np.ones(horizon)
    elif style in ("smooth", "gen_ramping"):
        out = hump
    elif style == "oscillating":
        rng = Rng(seed)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        wave = params.ripple * np.sin(
            2.0 * math.pi * params.osc_freq * t / horizon + phase)
        jitter = rng.normals(horizon, 0.0, params.ripple / 2.0)
        out = hump + wave + jitter
    elif style == "abrupt":
        out = hump.copy()
        out[params.step_tick:] += params.step_height
    elif style == "gen_unit_commit":
        out = hump.copy()
        for lo, hi in params.off_intervals:
            out[max(0, lo):hi] = 0.0
    else:  # pragma: no cover - guarded by StyleParams validation
        raise LoadSynthError(f"unknown style {style!r}")

    if style == "gen_unit_commit":
        off = out == 0.0
        out = np.where(off, 0.0, np.maximum(out, POSITIVE_FLOOR))
    else:
        out = np.maximum(out, POSITIVE_FLOOR)
    return out


def scale_loads(base: np.ndarray, mode: ScalingMode, groups: list[str] | None,
                n_samples: int, seed: int) -> np.ndarray:
    """Sample scaled load vectors: one row per sample.

    naive: one factor per sample for every load; grouped: one factor per
    (sample, group); brute_force: one factor per (sample, load). Factors
    are i.i.d. uniform on the configured range.
    """
    base = np.asarray(base, dtype=float)
    n_loads = len(base)
    lo, hi = mode.factor_range
    rng = Rng(seed)
    out = np.empty((n_samples, n_loads))
    if mode.mode == "naive":
        for i in range(n_samples):
            out[i] = rng.uniform(lo, hi) * base
    elif mode.mode == "grouped":
        if not groups or len(groups) != n_loads:
            raise LoadSynthError("grouped mode needs a group label per load")
        order = sorted(set(groups))
        col_of = {g: [j for j, gj in enumerate(groups) if gj == g] for g in order}
        for i in range(n_samples):
            for g in order:
                c = rng.uniform(lo, hi)
                for j in col_of[g]:
                    out[i, j] = c * base[j]
    elif mode.mode == "brute_force":
        for i in range(n_samples):
            for j in range(n_loads):
                out[i, j] = rng.uniform(lo, hi) * base[j]
    else:  # pragma: no cover
        raise LoadSynthError(f"unknown scaling mode {mode.mode!r}")
    return out


def delta_stats(profiles: np.ndarray, interval: int,
                thresholds: tuple[float, ...] = (0.02, 0.04, 0.08, 0.16)) -> DeltaStats:
    """Worst |step| over the given interval, relative to each load's max.

    ``profiles`` is (ticks x loads). Returns per-load ratios and, for each
    threshold, the fraction of loads whose worst step stays below it.
    """
    if interval < 1:
        raise LoadSynthError("interval must be at least 1")
    profiles = np.atleast_2d(np.asarray(profiles, dtype=float))
    if profiles.shape[0] <= interval:
        raise LoadSynthError("profiles shorter than the requested interval")
    deltas = np.abs(profiles[interval:] - profiles[:-interval])
    daily_max = profiles.max(axis=0)
    daily_max = np.where(daily_max == 0, 1.0, daily_max)
    ratios = deltas.max(axis=0) / daily_max
    fractions = {thr: float(np.mean(ratios < thr)) for thr in thresholds}
    return DeltaStats(ratios=ratios, fraction_under=fractions)


def aggregate_stats(profiles: np.ndarray) -> AggregateStats:
    """Total-series extremes as fractions of its mean."""
    profiles = np.atleast_2d(np.asarray(profiles, dtype=float))
    totals = profiles.sum(axis=1)
    mean = totals.mean()
    if mean == 0:
        return AggregateStats(totals=totals, min_frac=1.0, max_frac=1.0)
    return AggregateStats(totals=totals, min_frac=float(totals.min() / mean),
                          max_frac=float(totals.max() / mean))


# ------------------------------------------------------------ populations

def sample_style_params(style: str, horizon: int, rng: Rng) -> StyleParams:
    """Draw one load's style parameters from the default population ranges.

    Peak hours are uniform over the day; amplitudes cover the observed
    spread from gentle to pronounced daily swings.
    """
    peak = rng.randrange(horizon)
    if style == "constant":
        return StyleParams(style="constant")
    if style == "smooth":
        return StyleParams(style="smooth", peak_tick=peak,
                           amplitude=rng.uniform(0.02, 0.30))
    if style == "oscillating":
        return StyleParams(style="oscillating", peak_tick=peak,
                           amplitude=rng.uniform(0.02, 0.20),
                           ripple=rng.uniform(0.005, 0.015),
                           osc_freq=float(4 + rng.randrange(9)))
    if style == "abrupt":
        step = rng.randrange(horizon)
        height = rng.uniform(0.15, 0.5) * (1.0 if rng.random() < 0.5 else -1.0)
        return StyleParams(style="abrupt", peak_tick=peak,
                           amplitude=rng.uniform(0.0, 0.05),
                           step_tick=step, step_height=height)
    raise LoadSynthError(f"no population defaults for style {style!r}")


def sample_population(n_loads: int, horizon: int, seed: int,
                      mix: tuple[tuple[str, float], ...] = DEFAULT_STYLE_MIX,
                      ) -> list[StyleParams]:
    """Per-load style parameters for a mixed population.

    Styles are assigned by deterministic largest-remainder quotas from the
    mix, then shuffled, so the realized fractions track the mix exactly.
    """
    total = sum(w for _, w in mix)
    quotas = [(name, w / total * n_loads) for name, w in mix]
    counts = {name: int(q) for name, q in quotas}
    remainder = n_loads - sum(counts.values())
    for name, _ in sorted(quotas, key=lambda kv: -(kv[1] - int(kv[1]))):
        if remainder <= 0:
            break
        counts[name] += 1
        remainder -= 1
    styles = [name for name, c in counts.items() for _ in range(c)]
    rng = Rng(seed)
    rng.shuffle(styles)
    return [sample_style_params(s, horizon, rng.spawn(1000 + i))
            for i, s in enumerate(styles)]


def profiles_matrix(params: list[StyleParams], horizon: int, seed: int) -> np.ndarray:
    """(ticks x loads) multiplier matrix, one seeded column per load."""
    cols = [style_profile(p, horizon, seed=derive_seed(seed, i))
            for i, p in enumerate(params)]
    return np.column_stack(cols)


def write_profiles_csv(path: str, load_ids: list, matrix: np.ndarray) -> None:
    """One column per load, header row of load ids, one row per tick."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(str(i) for i in load_ids) + "\n")
        for row in np.atleast_2d(matrix):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
