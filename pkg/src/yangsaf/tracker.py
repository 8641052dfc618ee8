"""Greedy best-channel tracking on the probability map and the initial F0.

Steps: utterance-level search range from an amplitude-weighted IF
histogram, amplitude-weighted temporal smoothing of the probability map,
gated argmax tracking, a snap back onto the unsmoothed map, and finally a
minimum-variance mix of the IFs of the channels around the chosen one.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import AnalysisConfig
from .frontend import ChannelLayout, FrameMaps, analyze_frontend
from .mixing import optimal_weights
from .probability import fill_probability, variance_from_aperiodicity
from .signal_core import AudioBuffer, ParameterError

RANGE_BELOW_OCT = 1.3
RANGE_ABOVE_OCT = 1.2
GATE_OCT = 0.7
SNAP_OCT = 0.35
SMOOTH_SECONDS = 0.045
HIST_BINS = 600
HIST_LO, HIST_HI = 40.0, 1000.0
MAX_CARRY = 5


class NoPeriodicEvidence(ParameterError):
    """The input has no unmasked frame to estimate a pitch range from."""


@dataclass
class F0Trajectory:
    """Frame-rate F0 track; masked frames hold NaN in ``f0``."""

    times: np.ndarray
    f0: np.ndarray
    variance: np.ndarray
    source_channel: np.ndarray | None = None
    flags: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.f0 = np.asarray(self.f0, dtype=float)
        self.variance = np.asarray(self.variance, dtype=float)
        if self.flags is None:
            self.flags = np.zeros(self.times.size, dtype=bool)
        if self.source_channel is None:
            self.source_channel = np.full(self.times.size, -1)

    @property
    def masked(self) -> np.ndarray:
        return ~np.isfinite(self.f0)

    def __len__(self):
        return self.times.size

    def copy(self) -> "F0Trajectory":
        return F0Trajectory(self.times.copy(), self.f0.copy(), self.variance.copy(),
                            self.source_channel.copy(), self.flags.copy())


@dataclass(frozen=True)
class SearchRange:
    center: float

    @property
    def lo(self) -> float:
        return self.center * 2.0 ** -RANGE_BELOW_OCT

    @property
    def hi(self) -> float:
        return self.center * 2.0 ** RANGE_ABOVE_OCT


def bandpass_40_1000(x: AudioBuffer, lo: float = HIST_LO, hi: float = HIST_HI,
                     skirt: float = 10.0) -> np.ndarray:
    """FFT brick-wall bandpass with raised-cosine skirts ``skirt`` Hz wide."""
    n = len(x)
    spec = np.fft.rfft(x.samples)
    f = np.fft.rfftfreq(n, 1.0 / x.sample_rate)
    gain = np.zeros_like(f)
    gain[(f >= lo) & (f <= hi)] = 1.0
    rise = (f > lo - skirt) & (f < lo)
    gain[rise] = 0.5 - 0.5 * np.cos(np.pi * (f[rise] - (lo - skirt)) / skirt)
    fall = (f > hi) & (f < hi + skirt)
    gain[fall] = 0.5 + 0.5 * np.cos(np.pi * (f[fall] - hi) / skirt)
    return np.fft.irfft(spec * gain, n)


def frame_amplitude(x: AudioBuffer, frame_times: np.ndarray, frame_rate: float) -> np.ndarray:
    """RMS of the 40-1000 Hz band over one frame period centered on each frame."""
    y = bandpass_40_1000(x)
    half = max(int(round(x.sample_rate / frame_rate / 2)), 0)
    csum = np.concatenate([[0.0], np.cumsum(y * y)])
    centers = np.round(frame_times * x.sample_rate).astype(int)
    lo = np.clip(centers - half, 0, len(x))
    hi = np.clip(centers + half + 1, 0, len(x))
    count = np.maximum(hi - lo, 1)
    return np.sqrt(np.maximum(csum[hi] - csum[lo], 0.0) / count)


def estimate_search_range(maps: FrameMaps, x: AudioBuffer,
                          amplitude: np.ndarray | None = None) -> SearchRange:
    """Center the search range on the weighted median IF of the utterance."""
    if amplitude is None:
        amplitude = frame_amplitude(x, maps.frame_times, maps.frame_rate)
    f = maps.if_map
    ok = np.isfinite(f) & (np.nan_to_num(f) >= HIST_LO) & (np.nan_to_num(f) <= HIST_HI)
    weights = np.broadcast_to(amplitude[:, None], f.shape)[ok]
    if weights.size == 0 or not weights.sum() > 0:
        raise NoPeriodicEvidence("no periodic evidence in the 40-1000 Hz range")
    edges = np.geomspace(HIST_LO, HIST_HI, HIST_BINS + 1)
    hist, _ = np.histogram(f[ok], bins=edges, weights=weights)
    cdf = np.cumsum(hist) / hist.sum()
    b = int(np.searchsorted(cdf, 0.5))
    center = float(np.sqrt(edges[b] * edges[b + 1]))
    return SearchRange(center)


def smooth_probability_map(prob: np.ndarray, amplitude: np.ndarray, frame_rate: float) -> np.ndarray:
    """Amplitude-weighted moving average along time with a 45 ms Hanning window."""
    taps = max(int(round(SMOOTH_SECONDS * frame_rate)), 1)
    win = np.hanning(taps + 2)[1:-1]
    amp = np.asarray(amplitude, dtype=float)
    num = np.apply_along_axis(lambda c: np.convolve(c, win, mode="same"), 0, prob * amp[:, None])
    den = np.convolve(amp, win, mode="same")
    return num / np.maximum(den, 1e-12)[:, None]


def track_best_channel(smoothed: np.ndarray, layout: ChannelLayout, srange: SearchRange):
    """Gated greedy argmax.

    Returns ``(channels, low_confidence)``; ``channels`` is -1 on masked
    frames.  Ties go to the lower channel.
    """
    n_frames, _ = smoothed.shape
    centers = layout.centers
    in_range = (centers >= srange.lo) & (centers <= srange.hi)
    log2c = np.log2(centers)
    channels = np.full(n_frames, -1)
    low_conf = np.zeros(n_frames, dtype=bool)
    prev = -1
    carried = 0
    for t in range(n_frames):
        feasible = in_range.copy()
        if prev >= 0:
            feasible &= np.abs(log2c - log2c[prev]) <= GATE_OCT + 1e-12
        p = np.where(feasible, smoothed[t], -np.inf)
        best = int(np.argmax(p))
        if feasible.any() and p[best] > 0:
            channels[t] = best
            prev = best
            carried = 0
        elif prev >= 0 and carried < MAX_CARRY:
            channels[t] = prev
            low_conf[t] = True
            carried += 1
        else:
            prev = -1
            carried = 0
    return channels, low_conf


def snap_to_unsmoothed(prob: np.ndarray, channels: np.ndarray, layout: ChannelLayout) -> np.ndarray:
    """Move each choice to the strongest local maximum of the raw map nearby.

    Candidates are local maxima within +-0.35 octave of the smoothed-map
    choice; equal probabilities resolve to the nearest channel.
    """
    log2c = np.log2(layout.centers)
    out = channels.copy()
    n_ch = layout.centers.size
    for t, k in enumerate(channels):
        if k < 0:
            continue
        p = prob[t]
        left = np.concatenate([[-np.inf], p[:-1]])
        right = np.concatenate([p[1:], [-np.inf]])
        peaks = (p >= left) & (p >= right) & (p > 0)
        near = np.abs(log2c - log2c[k]) <= SNAP_OCT + 1e-12
        cand = np.flatnonzero(peaks & near)
        if cand.size == 0:
            continue
        dist = np.abs(cand - k)
        order = np.lexsort((dist, -p[cand]))
        out[t] = int(cand[order[0]])
        assert 0 <= out[t] < n_ch
    return out


def neighborhood(layout: ChannelLayout, k: int) -> np.ndarray:
    """Channels ``m`` with ``0.5 f_c[k] < f_c[m] < 1.25 f_c[k]``."""
    c = layout.centers
    return np.flatnonzero((c > 0.5 * c[k]) & (c < 1.25 * c[k]))


def initial_f0(maps: FrameMaps, best_channel: np.ndarray, sigma_scale: float,
               sigma_min: float) -> F0Trajectory:
    """Minimum-variance mix of the IFs in the neighborhood of each frame's channel.

    Members whose IF falls outside ``(0.5, 1.25) f_c[k]`` are left out, so
    the result always lies in that interval.
    """
    n = maps.n_frames
    f0 = np.full(n, np.nan)
    var = np.full(n, np.nan)
    layout = maps.layout
    for t, k in enumerate(best_channel):
        if k < 0:
            continue
        members = neighborhood(layout, k)
        fk = maps.if_map[t, members]
        fc = layout.centers[k]
        ok = np.isfinite(fk) & (np.nan_to_num(fk) > 0.5 * fc) & (np.nan_to_num(fk) < 1.25 * fc)
        if not ok.any():
            continue
        v = variance_from_aperiodicity(maps.ap_map[t, members[ok]], sigma_scale, sigma_min)
        sol = optimal_weights(v)
        f0[t] = float(fk[ok] @ sol.weights)
        var[t] = sol.combined_variance
    return F0Trajectory(maps.frame_times.copy(), f0, var, best_channel.copy())


@dataclass
class InitialEstimate:
    maps: FrameMaps
    search_range: SearchRange
    amplitude: np.ndarray
    smoothed: np.ndarray
    channels: np.ndarray
    low_confidence: np.ndarray
    trajectory: F0Trajectory


def track(maps: FrameMaps, x: AudioBuffer, config: AnalysisConfig) -> InitialEstimate:
    """Run the tracking stage on front-end maps (probabilities filled in if missing)."""
    if maps.prob_map is None:
        fill_probability(maps, config.sigma_scale, config.sigma_floor)
    amp = frame_amplitude(x, maps.frame_times, maps.frame_rate)
    srange = estimate_search_range(maps, x, amp)
    smoothed = smooth_probability_map(maps.prob_map, amp, maps.frame_rate)
    channels, low_conf = track_best_channel(smoothed, maps.layout, srange)
    snapped = snap_to_unsmoothed(maps.prob_map, channels, maps.layout)
    traj = initial_f0(maps, snapped, config.sigma_scale, config.sigma_floor)
    traj.flags = low_conf.copy()
    return InitialEstimate(maps, srange, amp, smoothed, snapped, low_conf, traj)


def initial_estimate(x: AudioBuffer, config: AnalysisConfig) -> InitialEstimate:
    """Front end plus tracking: the initial F0 trajectory of ``x``."""
    maps = analyze_frontend(x, config)
    return track(maps, x, config)
