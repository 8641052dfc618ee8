"""Synthetic harmonic test signals with an exact F0 ground truth.

The F0 follows a sinusoid on the log-frequency axis,

    f0(t) = f0_mean * 2 ** ((depth / 2400) * sin(2 pi f_m t)),

so ``depth`` is the peak-to-peak excursion in cents.  The phase integral is
evaluated through the modified-Bessel expansion of ``exp(beta sin(theta))``
and is therefore exact to rounding, not a numerical quadrature.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import iv

from .signal_core import AudioBuffer, ParameterError
from .tracker import F0Trajectory

BESSEL_TERMS = 40


@dataclass(frozen=True)
class TestSignalSpec:
    f0_mean: float = 120.0
    depth: float = 0.0
    mod_freq: float = 0.0
    n_harmonics: int = 10
    harmonic_slope: float = -6.0
    duration: float = 3.0
    sample_rate: float = 22050.0
    snr_db: float | None = None
    seed: int = 0
    peak: float = 0.5

    __test__ = False  # not a pytest class

    @property
    def f0_max(self) -> float:
        return self.f0_mean * 2.0 ** (self.depth / 2400.0)

    @property
    def f0_min(self) -> float:
        return self.f0_mean * 2.0 ** (-self.depth / 2400.0)

    def validate(self):
        if not self.f0_mean > 0 or not self.sample_rate > 0:
            raise ParameterError("f0_mean and sample_rate must be positive")
        if not self.duration > 0:
            raise ParameterError("duration must be positive")
        if self.n_harmonics < 1:
            raise ParameterError("n_harmonics must be >= 1")
        if self.depth < 0 or self.mod_freq < 0:
            raise ParameterError("depth and mod_freq must be non-negative")
        if self.n_harmonics * self.f0_max >= self.sample_rate / 2:
            raise ParameterError(
                f"harmonic {self.n_harmonics} reaches {self.n_harmonics * self.f0_max:.1f} Hz, "
                f"not below Nyquist {self.sample_rate / 2} Hz")


def f0_curve(spec: TestSignalSpec, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return spec.f0_mean * 2.0 ** ((spec.depth / 2400.0) * np.sin(2 * np.pi * spec.mod_freq * t))


def phase_integral(spec: TestSignalSpec, t) -> np.ndarray:
    """``Phi(t) = int_0^t f0(s) ds`` in cycles."""
    t = np.asarray(t, dtype=float)
    beta = spec.depth / 2400.0 * np.log(2.0)
    if beta == 0 or spec.mod_freq == 0:
        return spec.f0_mean * t
    w = 2 * np.pi * spec.mod_freq
    theta = w * t
    # exp(beta sin th) = I0 + 2 sum_k (-1)^k [I_{2k+1} sin((2k+1)th) + I_{2k+2} cos((2k+2)th)]
    acc = iv(0, beta) * t
    for k in range(BESSEL_TERMS):
        n_odd, n_even = 2 * k + 1, 2 * k + 2
        sign = -1.0 if k % 2 else 1.0
        c_odd = 2 * sign * iv(n_odd, beta)
        c_even = -2 * sign * iv(n_even, beta)
        if c_odd == 0 and c_even == 0:
            break
        acc = acc + c_odd * (1 - np.cos(n_odd * theta)) / (n_odd * w)
        acc = acc + c_even * np.sin(n_even * theta) / (n_even * w)
    return spec.f0_mean * acc


def harmonic_amplitudes(n_harmonics: int, slope_db_per_octave: float) -> np.ndarray:
    k = np.arange(1, n_harmonics + 1)
    return 10.0 ** (slope_db_per_octave * np.log2(k) / 20.0)


def synthesize(spec: TestSignalSpec) -> tuple[AudioBuffer, F0Trajectory]:
    """Additive harmonic complex following ``f0_curve`` plus optional noise.

    Returns the audio and the audio-rate ground truth trajectory.
    """
    spec.validate()
    n = int(round(spec.duration * spec.sample_rate))
    t = np.arange(n) / spec.sample_rate
    phi = phase_integral(spec, t)
    amps = harmonic_amplitudes(spec.n_harmonics, spec.harmonic_slope)
    x = np.zeros(n)
    for k, a in enumerate(amps, start=1):
        x += a * np.cos(2 * np.pi * k * phi)
    x *= spec.peak / np.max(np.abs(x))
    audio = AudioBuffer(x, spec.sample_rate)
    if spec.snr_db is not None:
        audio = add_noise(audio, spec.snr_db, spec.seed)
    truth = F0Trajectory(t, f0_curve(spec, t), np.zeros(n))
    return audio, truth


def add_noise(x: AudioBuffer, snr_db: float, seed: int) -> AudioBuffer:
    """Add white Gaussian noise at exactly ``snr_db`` relative to the signal power."""
    if not np.isfinite(snr_db):
        raise ParameterError("snr_db must be finite")
    p_sig = float(np.mean(x.samples ** 2))
    if p_sig == 0:
        raise ParameterError("cannot set an SNR relative to a silent signal")
    noise = np.random.default_rng(seed).standard_normal(len(x))
    noise *= np.sqrt(p_sig / 10.0 ** (snr_db / 10.0) / np.mean(noise ** 2))
    return AudioBuffer(x.samples + noise, x.sample_rate)


def bandlimited_noise(n: int, sample_rate: float, lo: float, hi: float, power: float,
                      seed: int) -> np.ndarray:
    """Gaussian noise confined to ``[lo, hi]`` Hz with mean power ``power``."""
    rng = np.random.default_rng(seed)
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n, 1.0 / sample_rate)
    spec[(f < lo) | (f > hi)] = 0.0
    y = np.fft.irfft(spec, n)
    return y * np.sqrt(power / np.mean(y ** 2))
