"""Trace decomposition/synthesis, style profiles, load scaling, statistics."""

import math

import numpy as np
import pytest

from gridbench.loadsynth import (
    DEFAULT_STYLE_MIX,
    LoadSynthError,
    ScalingMode,
    StyleParams,
    aggregate_stats,
    decompose_trace,
    delta_stats,
    profiles_matrix,
    sample_population,
    scale_loads,
    style_profile,
    synthesize_trace,
)
from gridbench.rng import Rng


# ------------------------------------------------------------- decompose

def test_constant_trace_decomposition():
    comps = decompose_trace(np.array([5.0, 5, 5, 5, 5]), window=3)
    assert comps.mu == 5.0
    np.testing.assert_allclose(comps.variation, 0.0, atol=1e-15)
    assert comps.noise_sigma == 0.0


def test_sine_reconstruction_within_one_percent():
    t = np.arange(96)
    mu = 3.0
    trace = mu * (1.0 + 0.2 * np.sin(2 * np.pi * t / 96))
    comps = decompose_trace(trace, window=5)
    recon = comps.mu * (1.0 + comps.variation)
    assert np.max(np.abs(recon - trace)) / trace.max() < 0.01


def test_noise_sigma_estimator_spread():
    # mu + iid N(0, 0.02*mu): estimated sigma lands in [0.015, 0.025]
    mu = 7.0
    hits = 0
    for seed in range(100):
        rng = Rng(seed)
        trace = mu * (1.0 + rng.normals(200, 0.0, 0.02))
        comps = decompose_trace(trace, window=5)
        if 0.015 <= comps.noise_sigma <= 0.025:
            hits += 1
    assert hits >= 95  # moving-average leakage shrinks sigma slightly, stays in band


def test_nonpositive_trace_rejected():
    with pytest.raises(LoadSynthError, match="positive"):
        decompose_trace(np.array([1.0, -1.0, 1.0, 1.0, 1.0]))


def test_variation_zero_mean_invariant():
    rng = Rng(8)
    for _ in range(20):
        trace = 2.0 + rng.uniforms(50, 0.5, 1.5)
        comps = decompose_trace(trace, window=7)
        assert abs(comps.variation.mean()) < 1e-12


# ------------------------------------------------------------ synthesize

def test_alpha_zero_no_noise_collapses_to_mu():
    comps = decompose_trace(np.array([4.0, 4, 4, 4, 4]))
    out = synthesize_trace(comps, t_new=10, alpha=0.0, seed=1)
    np.testing.assert_allclose(out, 4.0)


def test_linear_interpolation_of_variation():
    from gridbench.loadsynth import TraceComponents
    comps = TraceComponents(mu=1.0, variation=np.array([0.0, 1.0]), noise_sigma=0.0)
    out = synthesize_trace(comps, t_new=3, alpha=1.0, seed=0)
    np.testing.assert_allclose(out, [1.0, 1.5, 2.0])


def test_formula_transliteration_oracle():
    # independent recomputation of (1 + alpha*c_new + n)*mu with the same PRNG
    trace = 2.0 + np.sin(np.arange(48) / 5.0)
    comps = decompose_trace(trace, window=5)
    t_new, alpha, seed = 100, 1.0, 33
    got = synthesize_trace(comps, t_new, alpha, seed)

    c_new = np.interp(np.linspace(0, len(comps.variation) - 1, t_new),
                      np.arange(len(comps.variation), dtype=float), comps.variation)
    noise = Rng(seed).normals(t_new, 0.0, comps.noise_sigma)
    expect = (1.0 + alpha * c_new + noise) * comps.mu
    np.testing.assert_allclose(got, expect, rtol=0, atol=0)


def test_seeded_synthesis_bit_identical():
    trace = 1.0 + 0.3 * np.cos(np.arange(48) / 3.0)
    comps = decompose_trace(trace)
    a = synthesize_trace(comps, 200, 1.0, seed=5)
    b = synthesize_trace(comps, 200, 1.0, seed=5)
    assert a.tobytes() == b.tobytes()


def test_negative_output_clamped_with_warning():
    from gridbench.loadsynth import TraceComponents
    comps = TraceComponents(mu=1.0, variation=np.array([-2.0, 2.0]), noise_sigma=0.0)
    with pytest.warns(UserWarning, match="clamped"):
        out = synthesize_trace(comps, t_new=4, alpha=1.0, seed=0)
    assert np.all(out > 0)


# --------------------------------------------------------------- styles

def test_constant_style_flat():
    prof = style_profile(StyleParams(style="constant"), horizon=48)
    assert prof.max() / prof.min() == 1.0


def test_smooth_peaks_at_peak_tick():
    prof = style_profile(StyleParams(style="smooth", peak_tick=14, amplitude=0.1),
                         horizon=48)
    assert int(np.argmax(prof)) == 14


def test_smooth_delta_bound_exhaustive_scan():
    # amplitude 0.08: every 1-tick delta stays below 8% of the series max
    prof = style_profile(StyleParams(style="smooth", peak_tick=20, amplitude=0.08),
                         horizon=48)
    deltas = np.abs(np.diff(prof))
    assert np.all(deltas <= 0.08 * prof.max())


def test_abrupt_step_height():
    p = StyleParams(style="abrupt", step_tick=10, step_height=0.4)
    prof = style_profile(p, horizon=48)
    assert prof[9] == pytest.approx(1.0)
    assert prof[10] == pytest.approx(1.4)


def test_unit_commit_exact_zeros():
    p = StyleParams(style="gen_unit_commit", amplitude=0.1, peak_tick=5,
                    off_intervals=((0, 4), (20, 30)))
    prof = style_profile(p, horizon=48)
    assert np.all(prof[0:4] == 0.0)
    assert np.all(prof[20:30] == 0.0)
    on = np.ones(48, dtype=bool)
    on[0:4] = on[20:30] = False
    assert np.all(prof[on] > 0.0)


def test_styles_strictly_positive():
    rng = Rng(3)
    for style in ("constant", "smooth", "oscillating", "abrupt"):
        for k in range(10):
            from gridbench.loadsynth import sample_style_params
            p = sample_style_params(style, 48, rng)
            prof = style_profile(p, 48, seed=k)
            assert np.all(prof > 0.0), (style, k)


def test_oscillating_seed_determinism():
    p = StyleParams(style="oscillating", peak_tick=8, amplitude=0.1)
    a = style_profile(p, 48, seed=9)
    b = style_profile(p, 48, seed=9)
    c = style_profile(p, 48, seed=10)
    assert a.tobytes() == b.tobytes()
    assert a.tobytes() != c.tobytes()


# --------------------------------------------------------------- scaling

def test_factor_range_one_reproduces_base():
    base = np.array([1.0, 2.0, 3.0])
    out = scale_loads(base, ScalingMode("naive", (1.0, 1.0)), None, 5, seed=0)
    np.testing.assert_allclose(out, np.tile(base, (5, 1)))


def test_naive_mode_rank_one_structure():
    base = np.array([1.0, 2.0, 4.0])
    out = scale_loads(base, ScalingMode("naive"), None, 20, seed=3)
    ratios = out / base
    for i in range(20):
        assert np.allclose(ratios[i], ratios[i, 0])


def test_grouped_mode_structure():
    base = np.array([1.0, 1.0, 2.0, 2.0])
    groups = ["a", "b", "a", "b"]
    out = scale_loads(base, ScalingMode("grouped"), groups, 30, seed=4)
    ratios = out / base
    for i in range(30):
        assert ratios[i, 0] == pytest.approx(ratios[i, 2])
        assert ratios[i, 1] == pytest.approx(ratios[i, 3])
    assert not np.allclose(ratios[:, 0], ratios[:, 1])


def test_brute_force_monte_carlo_uniformity():
    base = np.ones(4)
    out = scale_loads(base, ScalingMode("brute_force", (0.8, 1.2)), None, 10000, seed=7)
    factors = out.ravel()
    assert 0.99 <= factors.mean() <= 1.01
    assert factors.min() >= 0.8
    assert factors.max() <= 1.2


def test_brute_force_no_shared_ratios():
    base = np.ones(5)
    out = scale_loads(base, ScalingMode("brute_force"), None, 50, seed=9)
    for a in range(5):
        for b in range(a + 1, 5):
            assert not np.allclose(out[:, a], out[:, b])


def test_grouped_requires_groups():
    with pytest.raises(LoadSynthError, match="group"):
        scale_loads(np.ones(3), ScalingMode("grouped"), None, 2, seed=0)


# ------------------------------------------------------------ statistics

def test_constant_profiles_all_under_threshold():
    prof = np.ones((48, 10))
    stats = delta_stats(prof, interval=1)
    assert stats.fraction_under[0.02] == 1.0


def test_linear_ramp_delta_arithmetic():
    prof = np.linspace(0.0, 1.0, 49).reshape(-1, 1)  # 48 steps of 1/48
    for interval in (1, 2, 4):
        stats = delta_stats(prof, interval=interval, thresholds=(1.0,))
        assert stats.ratios[0] == pytest.approx(interval / 48.0)


def test_smooth_population_meets_ninety_percent_target():
    # default smooth-style population: every load under the 8% half-hourly bound
    params = [StyleParams(style="smooth", peak_tick=p % 48, amplitude=0.02 + 0.006 * p)
              for p in range(40)]
    mat = profiles_matrix(params, horizon=48, seed=0)
    stats = delta_stats(mat, interval=1)
    assert stats.fraction_under[0.08] >= 0.90


def test_aggregate_constant_population():
    stats = aggregate_stats(np.ones((48, 7)) * 2.0)
    assert stats.min_frac == 1.0
    assert stats.max_frac == 1.0


def test_aggregate_antiphase_cancellation():
    t = np.arange(48)
    a = 1.0 + 0.1 * np.cos(2 * np.pi * t / 48)
    b = 1.0 - 0.1 * np.cos(2 * np.pi * t / 48)
    stats = aggregate_stats(np.column_stack([a, b]))
    assert stats.min_frac == pytest.approx(1.0, abs=1e-12)
    assert stats.max_frac == pytest.approx(1.0, abs=1e-12)


def test_default_mixed_population_calibration():
    # generator calibration targets: aggregate stays in the +/-8% band and
    # roughly 90% of loads clear the 8% delta bound
    params = sample_population(100, horizon=48, seed=0)
    mat = profiles_matrix(params, horizon=48, seed=0)
    agg = aggregate_stats(mat)
    assert 0.92 <= agg.min_frac and agg.max_frac <= 1.08
    stats = delta_stats(mat, interval=1)
    assert stats.fraction_under[0.08] >= 0.90


def test_population_mix_quotas():
    params = sample_population(50, horizon=48, seed=4)
    counts = {}
    for p in params:
        counts[p.style] = counts.get(p.style, 0) + 1
    want = {name: round(frac * 50) for name, frac in DEFAULT_STYLE_MIX}
    assert counts == want
