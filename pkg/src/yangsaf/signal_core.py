"""Windows, analytic bandpass kernels and convolution primitives.

All kernels are zero-delay FIR filters sampled on a grid centered at t = 0
with an odd number of taps.  The window is the 4-term cosine series of
Nuttall (Table II, item 11) stretched over a support of ``(-2/f_c, 2/f_c)``.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

NUTTALL_COEFFS = (0.338946, 0.481973, 0.161054, 0.018027)


class ParameterError(ValueError):
    """Raised for out-of-range or malformed analysis parameters."""


@dataclass(frozen=True)
class AudioBuffer:
    """Mono audio samples with their sampling rate in Hz."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if x.ndim != 1:
            raise ParameterError("AudioBuffer expects a 1-D (mono) signal")
        if x.size < 1:
            raise ParameterError("AudioBuffer must hold at least one sample")
        if not np.all(np.isfinite(x)):
            raise ParameterError("AudioBuffer samples must be finite")
        if not self.sample_rate > 0:
            raise ParameterError(f"sample_rate must be positive, got {self.sample_rate}")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate


@dataclass(frozen=True)
class ComplexKernelPair:
    """Analytic bandpass kernel ``h`` and its time-derivative kernel ``h_d``."""

    h: np.ndarray
    h_d: np.ndarray
    center_frequency: float
    support_half_width: float
    sample_rate: float

    @property
    def half_length(self) -> int:
        return (self.h.size - 1) // 2

    @property
    def times(self) -> np.ndarray:
        n = self.half_length
        return np.arange(-n, n + 1) / self.sample_rate

    def response(self, freqs) -> np.ndarray:
        """Discrete-time frequency response of ``h`` at ``freqs`` (Hz)."""
        freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
        t = self.times
        return np.exp(-2j * np.pi * np.outer(freqs, t)) @ self.h


def _check_band(f_c, sample_rate):
    if not sample_rate > 0:
        raise ParameterError(f"sample_rate must be positive, got {sample_rate}")
    if not 0 < f_c < sample_rate / 2:
        raise ParameterError(
            f"center frequency {f_c} Hz outside (0, {sample_rate / 2}) Hz")


def _half_taps(half_width, sample_rate):
    return int(round(half_width * sample_rate))


def _cosine_series(t, period, derivative=False):
    arg = 2 * np.pi * t / period
    k = np.arange(len(NUTTALL_COEFFS))[:, None]
    a = np.asarray(NUTTALL_COEFFS)[:, None]
    if derivative:
        out = -(a * (2 * np.pi * k / period) * np.sin(k * arg)).sum(axis=0)
    else:
        out = (a * np.cos(k * arg)).sum(axis=0)
    out[np.abs(t) > period / 2] = 0.0
    return out


def window_grid(half_width: float, sample_rate: float) -> np.ndarray:
    """Sample times of a centered kernel spanning ``|t| <= half_width``."""
    n = _half_taps(half_width, sample_rate)
    if n < 1:
        raise ParameterError("window support shorter than one sample")
    return np.arange(-n, n + 1) / sample_rate


def nuttall_window(f_c: float, sample_rate: float, half_width: float | None = None) -> np.ndarray:
    """Centered Nuttall window with support ``(-2/f_c, 2/f_c)``.

    ``half_width`` overrides the support (seconds); the refinement stage uses
    it to keep the width tied to F0 instead of the harmonic center.
    """
    _check_band(f_c, sample_rate)
    half = 2.0 / f_c if half_width is None else float(half_width)
    t = window_grid(half, sample_rate)
    return _cosine_series(t, 2 * half)


def derivative_window(f_c: float, sample_rate: float, half_width: float | None = None) -> np.ndarray:
    """``dw/dt + j*2*pi*f_c*w`` on the same grid as :func:`nuttall_window`."""
    _check_band(f_c, sample_rate)
    half = 2.0 / f_c if half_width is None else float(half_width)
    t = window_grid(half, sample_rate)
    w = _cosine_series(t, 2 * half)
    dw = _cosine_series(t, 2 * half, derivative=True)
    return dw + 2j * np.pi * f_c * w


@functools.lru_cache(maxsize=2048)
def _kernel_pair_cached(f_c, sample_rate, half_width):
    half = 2.0 / f_c if half_width is None else half_width
    t = window_grid(half, sample_rate)
    w = _cosine_series(t, 2 * half)
    dw = _cosine_series(t, 2 * half, derivative=True)
    # unit gain at f_c: the sampled window sums to 1
    scale = 1.0 / w.sum()
    carrier = np.exp(2j * np.pi * f_c * t)
    h = scale * w * carrier
    h_d = scale * (dw + 2j * np.pi * f_c * w) * carrier
    h.setflags(write=False)
    h_d.setflags(write=False)
    return ComplexKernelPair(h, h_d, float(f_c), float(half), float(sample_rate))


def make_kernel_pair(f_c: float, sample_rate: float, half_width: float | None = None) -> ComplexKernelPair:
    """Analytic kernel ``h = w exp(j 2 pi f_c t)`` and its derivative kernel.

    The pair is normalized to unit gain at ``f_c``; instantaneous frequency
    and the aperiodicity cascade are both insensitive to that scale.
    Results are cached and read-only.
    """
    _check_band(f_c, sample_rate)
    return _kernel_pair_cached(float(f_c), float(sample_rate),
                               None if half_width is None else float(half_width))


def convolve_complex(x, k, method: str = "auto") -> np.ndarray:
    """'same'-length convolution with the kernel center on each output sample.

    Samples outside ``x`` are treated as zeros.  ``method`` is ``"direct"``
    (reference path), ``"fft"`` or ``"auto"``.
    """
    x = np.asarray(x)
    k = np.asarray(k)
    if x.size == 0 or k.size == 0:
        raise ParameterError("convolve_complex needs non-empty inputs")
    if k.size % 2 == 0:
        raise ParameterError("kernel length must be odd for zero-delay centering")
    if method == "auto":
        method = "fft" if k.size > 64 and x.size > 64 else "direct"
    half = (k.size - 1) // 2
    if method == "direct":
        full = np.convolve(x, k, mode="full")
    elif method == "fft":
        full = sps.fftconvolve(x, k, mode="full")
    else:
        raise ParameterError(f"unknown convolution method {method!r}")
    return np.asarray(full[half:half + x.size], dtype=complex)


def lowpass_upsample4(x: np.ndarray, half_taps: int = 32) -> np.ndarray:
    """4x zero-stuffed upsampling through a Nuttall-windowed sinc.

    Output sample ``4*n`` reproduces ``x[n]`` exactly (the interpolator
    vanishes at the other integer lags).
    """
    up = 4
    n = np.arange(-half_taps * up, half_taps * up + 1)
    t = n / (half_taps * up)
    taper = _cosine_series(t, 2.0)
    fir = np.sinc(n / up) * taper
    y = sps.upfirdn(fir, np.asarray(x, dtype=float), up=up)
    start = half_taps * up
    return y[start:start + up * len(x)]
