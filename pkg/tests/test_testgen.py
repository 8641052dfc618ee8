import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.signal.windows import blackmanharris

from yangsaf.signal_core import AudioBuffer, ParameterError
from yangsaf.testgen import (TestSignalSpec, add_noise, bandlimited_noise, f0_curve,
                             harmonic_amplitudes, phase_integral, synthesize)

from _signals import FS


def test_depth_sets_extreme_ratio():
    spec = TestSignalSpec(depth=100, mod_freq=4.0, duration=1.0)
    _, truth = synthesize(spec)
    assert spec.f0_max / spec.f0_min == pytest.approx(2 ** (100 / 1200), rel=1e-15)
    assert truth.f0.max() / truth.f0.min() == pytest.approx(2 ** (100 / 1200), rel=1e-9)


def test_zero_depth_gives_constant_f0():
    _, truth = synthesize(TestSignalSpec(duration=0.5))
    assert np.all(truth.f0 == 120.0)


@settings(max_examples=25, deadline=None)
@given(depth=st.floats(0, 400), fm=st.floats(0.5, 40), t=st.floats(0.01, 2.9))
def test_phase_law_matches_f0_curve(depth, fm, t):
    # oracle: central finite difference of the analytic phase integral
    spec = TestSignalSpec(depth=depth, mod_freq=fm)
    h = 1e-5
    deriv = (phase_integral(spec, t + h) - phase_integral(spec, t - h)) / (2 * h)
    assert deriv == pytest.approx(f0_curve(spec, t), rel=1e-6)


def test_phase_integral_starts_at_zero():
    assert phase_integral(TestSignalSpec(depth=100, mod_freq=7.0), 0.0) == pytest.approx(0.0, abs=1e-12)


def test_harmonic_slope():
    a = harmonic_amplitudes(8, -6.0)
    assert a[0] == 1.0
    np.testing.assert_allclose(20 * np.log10(a[[1, 3, 7]]), [-6.0, -12.0, -18.0])


@pytest.mark.parametrize("snr", [-10.0, 0.0, 17.5, 40.0])
def test_noise_hits_requested_snr(snr):
    x, _ = synthesize(TestSignalSpec(duration=1.0))
    y = add_noise(x, snr, 3)
    noise = y.samples - x.samples
    measured = 10 * np.log10(np.mean(x.samples ** 2) / np.mean(noise ** 2))
    assert measured == pytest.approx(snr, abs=0.1)


def test_same_seed_same_noise():
    x, _ = synthesize(TestSignalSpec(duration=0.5))
    np.testing.assert_array_equal(add_noise(x, 10.0, 9).samples, add_noise(x, 10.0, 9).samples)
    assert not np.array_equal(add_noise(x, 10.0, 9).samples, add_noise(x, 10.0, 10).samples)


def test_100db_noise_is_tiny():
    x, _ = synthesize(TestSignalSpec(duration=1.0))
    y = add_noise(x, 100.0, 0)
    rms = np.sqrt(np.mean(x.samples ** 2))
    assert np.max(np.abs(y.samples - x.samples)) <= 1e-5 * rms * 6


def test_spectral_purity():
    # 3 s at 120 Hz is a whole number of periods: every harmonic lands on a DFT bin
    x, _ = synthesize(TestSignalSpec(duration=3.0))
    n = len(x)
    spec = np.abs(np.fft.rfft(x.samples * blackmanharris(n, sym=False))) ** 2
    bins_per_hz = n / FS
    keep = np.ones(spec.size, dtype=bool)
    for k in range(1, 11):
        c = int(round(120 * k * bins_per_hz))
        keep[c - 4:c + 5] = False
    assert 10 * np.log10(spec[keep].sum() / spec.sum()) <= -100


def test_signal_peak_and_rate():
    x, truth = synthesize(TestSignalSpec(depth=50, mod_freq=3.0, duration=0.5, peak=0.25))
    assert np.max(np.abs(x.samples)) == pytest.approx(0.25)
    assert x.sample_rate == FS and truth.times.size == len(x)


def test_nyquist_violation_rejected():
    with pytest.raises(ParameterError, match="Nyquist"):
        synthesize(TestSignalSpec(f0_mean=1200.0, n_harmonics=10))


@pytest.mark.parametrize("kw", [dict(duration=0.0), dict(n_harmonics=0), dict(depth=-1.0),
                                dict(f0_mean=0.0)])
def test_invalid_specs_rejected(kw):
    with pytest.raises(ParameterError):
        synthesize(TestSignalSpec(**kw))


def test_silent_signal_cannot_take_snr():
    with pytest.raises(ParameterError):
        add_noise(AudioBuffer(np.zeros(100), FS), 10.0, 0)
    with pytest.raises(ParameterError):
        add_noise(AudioBuffer(np.ones(100), FS), np.inf, 0)


def test_bandlimited_noise_band_and_power():
    y = bandlimited_noise(22050, FS, 300.0, 420.0, 0.01, 5)
    assert np.mean(y ** 2) == pytest.approx(0.01, rel=1e-9)
    spec = np.abs(np.fft.rfft(y)) ** 2
    f = np.fft.rfftfreq(y.size, 1 / FS)
    assert spec[(f < 299) | (f > 421)].sum() <= 1e-20 * spec.sum()
