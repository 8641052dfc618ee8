"""Per-channel instantaneous frequency and aperiodicity detectors.

Each channel filters the input with an analytic Nuttall kernel.  The
instantaneous frequency comes from Flanagan's equation applied to the
filter output and the output of the derivative kernel.  Aperiodicity is
the power of the residual between the amplitude-normalized output and the
same signal filtered a second time and renormalized; a pure sinusoid
anywhere in the main lobe leaves no residual because the kernel is
zero-phase.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import AnalysisConfig, thread_count
from .signal_core import AudioBuffer, ParameterError, convolve_complex, make_kernel_pair

# |X| below this fraction of the input peak counts as no output
MAG_FLOOR = 1e-10


@dataclass(frozen=True)
class ChannelLayout:
    centers: np.ndarray
    channels_per_octave: int
    f_lo: float
    f_hi: float

    def __len__(self):
        return self.centers.size

    @property
    def band_edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Nominal pass band ``[f_c 2^(-1/2K), f_c 2^(1/2K)]`` per channel."""
        half = 2.0 ** (1.0 / (2 * self.channels_per_octave))
        return self.centers / half, self.centers * half


@dataclass
class ChannelTrack:
    inst_freq: np.ndarray
    aperiodicity_raw: np.ndarray
    aperiodicity_smoothed: np.ndarray

    @property
    def masked(self) -> np.ndarray:
        return np.isnan(self.inst_freq)


@dataclass
class FrameMaps:
    """Frame-rate maps, shape ``(frames, channels)``.

    Masked IF cells are NaN; their aperiodicity is 1.0 and, once filled,
    their probability is 0.
    """

    frame_times: np.ndarray
    if_map: np.ndarray
    ap_map: np.ndarray
    layout: ChannelLayout
    frame_rate: float
    prob_map: np.ndarray | None = None
    frame_samples: np.ndarray = field(default=None)

    @property
    def mask(self) -> np.ndarray:
        return np.isnan(self.if_map)

    @property
    def n_frames(self) -> int:
        return self.frame_times.size


def design_channels(config: AnalysisConfig, sample_rate: float | None = None) -> ChannelLayout:
    """Log-spaced centers ``f_lo 2^(n/K)`` up to ``f_hi``."""
    f_lo, f_hi, k = config.f_lo, config.f_hi, int(config.channels_per_octave)
    if not f_lo < f_hi:
        raise ParameterError("inverted channel range")
    if k < 1:
        raise ParameterError("channels_per_octave must be >= 1")
    count = math.floor(k * math.log2(f_hi / f_lo) + 1e-9) + 1
    centers = f_lo * 2.0 ** (np.arange(count) / k)
    if sample_rate is not None and centers[-1] >= sample_rate / 2:
        raise ParameterError(
            f"channel at {centers[-1]:.1f} Hz is not below Nyquist ({sample_rate / 2} Hz)")
    return ChannelLayout(centers, k, float(f_lo), float(f_hi))


def flanagan_if(X, X_d):
    """Instantaneous angular frequency (rad/s) from a filter output and its derivative.

    Works element-wise on arrays; entries with ``X == 0`` come back NaN.
    """
    X = np.asarray(X, dtype=complex)
    X_d = np.asarray(X_d, dtype=complex)
    power = X.real ** 2 + X.imag ** 2
    num = X.real * X_d.imag - X.imag * X_d.real
    with np.errstate(divide="ignore", invalid="ignore"):
        omega = np.where(power > 0, num / np.where(power > 0, power, 1.0), np.nan)
    return omega if omega.ndim else float(omega)


def _normalize(y, floor):
    mag = np.abs(y)
    ok = mag > floor
    out = np.zeros_like(y)
    out[ok] = y[ok] / mag[ok]
    return out, ok


def residual_cascade(y1: np.ndarray, h: np.ndarray, floor: float):
    """Raw and smoothed aperiodicity from a first-stage filter output ``y1``.

    Samples where either normalization is undefined get ``a_k = 1``.
    """
    y1n, ok1 = _normalize(y1, floor)
    y2 = convolve_complex(y1n, h)
    y2n, ok2 = _normalize(y2, 1e-10)
    r = y1n - y2n
    a_k = r.real ** 2 + r.imag ** 2
    a_k[~(ok1 & ok2)] = 1.0
    smoother = np.abs(h)
    smoother = smoother / smoother.sum()
    a_ks = convolve_complex(a_k, smoother).real
    np.maximum(a_ks, 0.0, out=a_ks)
    return a_k, a_ks


def analyze_channel(x: AudioBuffer, f_c: float, half_width: float | None = None,
                    level: float | None = None) -> ChannelTrack:
    """Full-rate IF and aperiodicity tracks for one channel."""
    pair = make_kernel_pair(f_c, x.sample_rate, half_width)
    if level is None:
        level = float(np.max(np.abs(x.samples)))
    floor = MAG_FLOOR * level
    X = convolve_complex(x.samples, pair.h)
    X_d = convolve_complex(x.samples, pair.h_d)
    inst = flanagan_if(X, X_d) / (2 * np.pi)
    inst = np.atleast_1d(inst)
    inst[np.abs(X) <= floor] = np.nan
    a_k, a_ks = residual_cascade(X, pair.h, floor)
    return ChannelTrack(inst, a_k, a_ks)


def channel_aperiodicity(x: AudioBuffer, f_c: float) -> ChannelTrack:
    """Aperiodicity tracks for a front-end channel (IF included)."""
    return analyze_channel(x, f_c)


def equivalent_suppression_gain(layout: ChannelLayout | None, f_c: float, f_probe,
                                sample_rate: float, f_dominant: float | None = None,
                                floor_db: float = -300.0):
    """Residual-path gain (dB) for a minor component at ``f_probe``.

    The dominant component sits at ``f_dominant`` (default ``f_c``); the
    filter response is normalized to unit gain there, and the residual
    path is the first-pass gain minus the cascaded second-pass gain.
    """
    nyq = sample_rate / 2
    probe = np.atleast_1d(np.asarray(f_probe, dtype=float))
    if np.any((probe <= 0) | (probe >= nyq)):
        raise ParameterError("probe frequency outside (0, Nyquist)")
    if layout is not None and not (layout.centers[0] <= f_c <= layout.centers[-1]):
        raise ParameterError(f"{f_c} Hz is outside the channel layout")
    dom = f_c if f_dominant is None else float(f_dominant)
    pair = make_kernel_pair(f_c, sample_rate)
    ref = pair.response(dom)[0]
    hbar = pair.response(probe) / ref
    gain = np.abs(hbar - hbar ** 2)
    with np.errstate(divide="ignore"):
        db = 20 * np.log10(gain)
    db = np.maximum(db, floor_db)
    return db if np.ndim(f_probe) else float(db[0])


def small_signal_residual_gain(f_c: float, f_probe, sample_rate: float,
                               f_dominant: float | None = None):
    """Residual amplitude per unit relative level of a weak component at ``f_probe``.

    Amplitude normalization keeps only the phase part of the weak
    component's perturbation, which splits it between ``f_probe`` and its
    mirror ``2 f_dominant - f_probe``; both pass through the second filter.
    For a relative level ``eps`` the expected smoothed aperiodicity is
    ``eps**2 * gain**2 / 2``.  This differs from
    :func:`equivalent_suppression_gain` only through the mirror term.
    """
    dom = f_c if f_dominant is None else float(f_dominant)
    probe = np.atleast_1d(np.asarray(f_probe, dtype=float))
    pair = make_kernel_pair(f_c, sample_rate)
    ref = pair.response(dom)[0]
    h_p = pair.response(probe) / ref
    h_m = pair.response(2 * dom - probe) / ref
    gain = np.abs(h_p * (1 - (h_p + h_m) / 2))
    return gain if np.ndim(f_probe) else float(gain[0])


def frame_grid(duration: float, frame_rate: float) -> np.ndarray:
    count = int(math.floor(duration * frame_rate - 1e-9)) + 1
    return np.arange(max(count, 1)) / frame_rate


def analyze_frontend(x: AudioBuffer, config: AnalysisConfig) -> FrameMaps:
    """IF and smoothed aperiodicity maps at the frame rate.

    Every channel is analysed at the audio rate and the sample nearest to
    each frame time is kept.
    """
    layout = design_channels(config, x.sample_rate)
    times = frame_grid(x.duration, config.frame_rate)
    idx = np.clip(np.round(times * x.sample_rate).astype(int), 0, len(x) - 1)
    level = float(np.max(np.abs(x.samples)))

    def run(f_c):
        track = analyze_channel(x, f_c, level=level)
        return track.inst_freq[idx], track.aperiodicity_smoothed[idx]

    workers = thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, layout.centers))
    else:
        results = [run(f) for f in layout.centers]
    if_map = np.stack([r[0] for r in results], axis=1)
    ap_map = np.stack([r[1] for r in results], axis=1)
    ap_map[np.isnan(if_map)] = 1.0
    return FrameMaps(times, if_map, ap_map, layout, float(config.frame_rate),
                     frame_samples=idx)
