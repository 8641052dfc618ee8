import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from yangsaf.config import AnalysisConfig
from yangsaf.frontend import (analyze_channel, analyze_frontend, channel_aperiodicity,
                              design_channels, equivalent_suppression_gain, flanagan_if,
                              frame_grid, small_signal_residual_gain)
from yangsaf.signal_core import AudioBuffer, ParameterError, convolve_complex, make_kernel_pair
from yangsaf.testgen import add_noise

from _signals import FS, complex_tone, tone


def _interior(track, f_c, fs=FS):
    edge = int(round(2 * 2 / f_c * fs))
    return slice(edge, -edge)


# --- channel layout -------------------------------------------------------

def test_default_layout():
    layout = design_channels(AnalysisConfig())
    assert len(layout.centers) == 56
    assert layout.centers[0] == 40.0
    ratios = layout.centers[1:] / layout.centers[:-1]
    np.testing.assert_allclose(ratios, 2 ** (1 / 12), rtol=1e-12)
    assert layout.centers[-1] <= 1000.0


def test_one_octave_one_channel_per_octave():
    layout = design_channels(AnalysisConfig(f_lo=100, f_hi=200, channels_per_octave=1))
    np.testing.assert_allclose(layout.centers, [100.0, 200.0])


@settings(max_examples=30, deadline=None)
@given(f_lo=st.floats(20, 200), octaves=st.floats(0.5, 5), k=st.integers(1, 24))
def test_layout_invariants(f_lo, octaves, k):
    f_hi = f_lo * 2 ** octaves
    layout = design_channels(AnalysisConfig(f_lo=f_lo, f_hi=f_hi, channels_per_octave=k))
    c = layout.centers
    assert np.all(np.diff(c) > 0)
    assert c[0] == pytest.approx(f_lo) and c[-1] <= f_hi * (1 + 1e-12)
    assert c[-1] * 2 ** (1 / k) > f_hi * (1 - 1e-9)


def test_layout_rejects_nyquist_violation():
    with pytest.raises(ParameterError):
        design_channels(AnalysisConfig(), sample_rate=1800.0)


def test_inverted_range_rejected():
    with pytest.raises(ParameterError):
        AnalysisConfig(f_lo=500, f_hi=100)


# --- instantaneous frequency ----------------------------------------------

@pytest.mark.parametrize("f_c", [90.0, 100.0, 120.0])
def test_flanagan_exact_on_complex_tone(f_c):
    x = complex_tone(100.0)
    pair = make_kernel_pair(f_c, FS)
    X = convolve_complex(x, pair.h)
    X_d = convolve_complex(x, pair.h_d)
    f = flanagan_if(X, X_d)[_interior(x, f_c)] / (2 * np.pi)
    np.testing.assert_allclose(f, 100.0, rtol=1e-4)


@settings(max_examples=50, deadline=None)
@given(c=st.floats(1e-6, 1e6), re=st.floats(-10, 10), im=st.floats(-10, 10),
       dre=st.floats(-1e3, 1e3), dim=st.floats(-1e3, 1e3))
def test_flanagan_scale_invariant(c, re, im, dre, dim):
    X, X_d = complex(re, im), complex(dre, dim)
    if abs(X) < 1e-3:
        return
    a = flanagan_if(X, X_d)
    b = flanagan_if(c * X, c * X_d)
    assert b == pytest.approx(a, rel=1e-9, abs=1e-12)


def test_flanagan_zero_output_is_undefined():
    assert np.isnan(flanagan_if(0j, 1 + 1j))


def test_flanagan_tracks_linear_chirp():
    # 100 -> 150 Hz over 1 s; oracle 1: instantaneous chirp frequency,
    # oracle 2: finite difference of the unwrapped output phase
    t = np.arange(int(FS)) / FS
    x = np.cos(2 * np.pi * (100 * t + 25 * t ** 2))
    pair = make_kernel_pair(125.0, FS)
    X = convolve_complex(x, pair.h)
    X_d = convolve_complex(x, pair.h_d)
    f = flanagan_if(X, X_d) / (2 * np.pi)
    core = slice(int(0.2 * FS), int(0.8 * FS))
    np.testing.assert_allclose(f[core], (100 + 50 * t)[core], atol=0.5)
    phase = np.unwrap(np.angle(X))
    fd = np.gradient(phase, 1 / FS) / (2 * np.pi)
    np.testing.assert_allclose(f[core], fd[core], atol=0.5)


def test_frontend_reads_tone_frequency(config):
    maps = analyze_frontend(tone(120.0, 1.0), config)
    k = int(np.argmin(np.abs(np.log(maps.layout.centers / 120.0))))
    core = slice(20, -20)
    np.testing.assert_allclose(maps.if_map[core, k], 120.0, rtol=1e-3)


def test_low_channels_follow_fundamental(config):
    # three harmonics: channels from about half F0 up to below the second
    # harmonic report F0; far below F0 only stopband leakage remains
    t = np.arange(int(FS)) / FS
    x = sum(a * np.cos(2 * np.pi * 120 * k * t) for k, a in [(1, 1.0), (2, 0.5), (3, 0.33)])
    maps = analyze_frontend(AudioBuffer(0.5 * x, FS), config)
    c = maps.layout.centers
    low = (c > 0.55 * 120) & (c < 1.15 * 120)
    med = np.median(maps.if_map[20:-20][:, low], axis=0)
    np.testing.assert_allclose(med, 120.0, rtol=0.01)


# --- aperiodicity ---------------------------------------------------------

@pytest.mark.parametrize("f_c", [60.0, 120.0, 400.0, 950.0])
def test_pure_tone_aperiodicity_vanishes(f_c):
    tr = channel_aperiodicity(tone(f_c, 0.5), f_c)
    assert np.max(tr.aperiodicity_smoothed[_interior(tr, f_c)]) <= 1e-6


def test_aperiodicity_decreases_with_snr():
    f_c = 120.0
    clean = tone(f_c, 0.5)
    snrs = [0.0, 10.0, 20.0, 30.0]
    levels = []
    for snr in snrs:
        vals = [np.mean(channel_aperiodicity(add_noise(clean, snr, seed), f_c)
                        .aperiodicity_smoothed[_interior(clean, f_c)]) for seed in range(20)]
        levels.append(10 * np.log10(np.median(vals)))
    assert np.all(np.diff(levels) < 0)
    assert np.corrcoef(snrs, levels)[0, 1] <= -0.99


def test_aperiodicity_bounds_on_noise():
    x = AudioBuffer(np.random.default_rng(0).standard_normal(8000), FS)
    tr = analyze_channel(x, 200.0)
    assert np.all(tr.aperiodicity_raw >= 0) and np.all(tr.aperiodicity_raw <= 4 + 1e-12)
    assert np.all(tr.aperiodicity_smoothed >= 0) and np.all(tr.aperiodicity_smoothed <= 4 + 1e-12)


def test_two_tone_residual_drops_with_secondary_level():
    f_c, dom, probe = 200.0, 228.0, 180.0
    t = np.arange(int(FS)) / FS
    core = slice(3000, -3000)
    levels = []
    for db in (-10, -20, -30, -40):
        x = np.cos(2 * np.pi * dom * t) + 10 ** (db / 20) * np.cos(2 * np.pi * probe * t + 0.7)
        levels.append(np.mean(analyze_channel(AudioBuffer(x, FS), f_c).aperiodicity_smoothed[core]))
    assert np.all(np.diff(levels) < 0)


@pytest.mark.parametrize("ratio", [0.8, 0.9, 1.0, 1.3, 1.45])
def test_two_tone_residual_follows_small_signal_gain(ratio):
    # dominant at 1.14 f_c, weak component 30 dB down
    f_c = 200.0
    dom, probe, eps = 1.14 * f_c, ratio * f_c, 10 ** (-30 / 20)
    t = np.arange(int(FS)) / FS
    x = np.cos(2 * np.pi * dom * t) + eps * np.cos(2 * np.pi * probe * t + 0.7)
    a = np.mean(analyze_channel(AudioBuffer(x, FS), f_c).aperiodicity_smoothed[3000:-3000])
    g = small_signal_residual_gain(f_c, probe, FS, f_dominant=dom)
    assert 10 * np.log10(a) == pytest.approx(10 * np.log10(eps ** 2 * g ** 2 / 2), abs=0.5)


def test_suppression_gain_examples():
    f_c = 200.0
    assert equivalent_suppression_gain(None, f_c, f_c, FS) <= -120
    assert equivalent_suppression_gain(None, f_c, 2 * f_c - 1e-3, FS) <= -60


def test_suppression_gain_rises_away_from_dominant():
    f_c = 200.0
    dom = 1.14 * f_c
    offsets = np.array([0.01, 0.03, 0.06, 0.1])
    for sign in (-1, 1):
        g = equivalent_suppression_gain(None, f_c, dom * (1 + sign * offsets), FS, f_dominant=dom)
        assert np.all(np.diff(g) > 0)


def test_suppression_gain_probe_range():
    with pytest.raises(ParameterError):
        equivalent_suppression_gain(None, 200.0, FS / 2, FS)
    layout = design_channels(AnalysisConfig())
    with pytest.raises(ParameterError):
        equivalent_suppression_gain(layout, 5000.0, 100.0, FS)


# --- frame maps -----------------------------------------------------------

def test_frame_grid_spacing():
    g = frame_grid(3.0, 200.0)
    np.testing.assert_allclose(np.diff(g), 1 / 200.0)
    assert g.size == 600


def test_silence_is_fully_masked(config):
    maps = analyze_frontend(AudioBuffer(np.zeros(4410), FS), config)
    assert np.all(maps.mask)
    assert np.all(maps.ap_map == 1.0)


def test_frontend_amplitude_invariance(config):
    x = tone(150.0, 0.3)
    x2 = add_noise(x, 10.0, 1)
    a = analyze_frontend(x2, config)
    b = analyze_frontend(AudioBuffer(37.5 * x2.samples, FS), config)
    np.testing.assert_allclose(b.if_map, a.if_map, rtol=1e-9)
    np.testing.assert_allclose(b.ap_map, a.ap_map, rtol=1e-9, atol=1e-15)


def test_channel_tracks_shift_with_input():
    x = add_noise(tone(150.0, 0.3), 10.0, 2).samples
    m = 37
    a = analyze_channel(AudioBuffer(x, FS), 150.0)
    b = analyze_channel(AudioBuffer(np.concatenate([np.zeros(m), x]), FS), 150.0)
    core = slice(1000, x.size - 1000)
    np.testing.assert_allclose(b.inst_freq[m:][core], a.inst_freq[core], rtol=1e-9)
    np.testing.assert_allclose(b.aperiodicity_smoothed[m:][core], a.aperiodicity_smoothed[core],
                               rtol=1e-7, atol=1e-14)


def test_parallel_channels_match_sequential(config, monkeypatch):
    x = add_noise(tone(150.0, 0.3), 10.0, 3)
    seq = analyze_frontend(x, config)
    monkeypatch.setenv("YANGSAF_THREADS", "3")
    par = analyze_frontend(x, config)
    np.testing.assert_array_equal(seq.if_map, par.if_map)
    np.testing.assert_array_equal(seq.ap_map, par.ap_map)
