"""Harmonic refinement (H_m), F0-adaptive time warping (T_m) and the
per-harmonic aperiodicity report.

Harmonic detectors share one linear-frequency shape: a Nuttall kernel of
duration ``4 / f0_ref`` shifted to ``k * f0_ref``, so its first spectral
zeros sit on the neighbouring harmonics.  Each detector gives an IF
``f_k`` and a smoothed residual ``a_k``; ``f_k / k`` is F0 evidence with
log-variance ``sigma_scale * a_k / k**2`` and the evidences are mixed with
minimum-variance weights.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from . import calibration
from .config import AnalysisConfig
from .frontend import MAG_FLOOR, flanagan_if, residual_cascade
from .mixing import optimal_weights
from .signal_core import (AudioBuffer, ParameterError, convolve_complex, lowpass_upsample4,
                          make_kernel_pair)
from .tracker import F0Trajectory, InitialEstimate, initial_estimate

BANK_STEPS_PER_OCTAVE = 48  # quarter-semitone bank grid
SANITY_OCT = 0.5
VARIANCE_FLOOR = 1e-14


@dataclass(frozen=True)
class HarmonicDetectorBank:
    f0_ref: float
    sample_rate: float
    harmonics: tuple[int, ...]

    @property
    def half_width(self) -> float:
        return 2.0 / self.f0_ref

    def kernel(self, k: int):
        return make_kernel_pair(k * self.f0_ref, self.sample_rate, self.half_width)

    @classmethod
    def design(cls, f0_ref: float, sample_rate: float, m: int) -> "HarmonicDetectorBank":
        nyq = sample_rate / 2
        ks = tuple(k for k in range(1, m + 1) if (k + 1) * f0_ref < nyq)
        return cls(float(f0_ref), float(sample_rate), ks)


@dataclass
class HarmonicReport:
    """Per-frame, per-harmonic IF (Hz, original time axis), aperiodicity and SNR.

    Columns for harmonics at or above Nyquist are NaN.
    """

    times: np.ndarray
    harmonics: np.ndarray
    inst_freq: np.ndarray
    aperiodicity: np.ndarray
    snr_db: np.ndarray


@dataclass
class WarpResult:
    warped: AudioBuffer
    f0_ref: float
    t_grid: np.ndarray      # original sample times
    tau_grid: np.ndarray    # warped time at each original sample
    rate: np.ndarray        # d tau / d t at each original sample

    def tau(self, t):
        return np.interp(t, self.t_grid, self.tau_grid)

    def t_of_tau(self, tau):
        return np.interp(tau, self.tau_grid, self.t_grid)

    def rate_at(self, t):
        return np.interp(t, self.t_grid, self.rate)


def _segments(positions, margin, n):
    order = np.sort(np.unique(positions))
    segs = []
    start = order[0] - margin
    end = order[0] + margin + 1
    for p in order[1:]:
        if p - margin <= end:
            end = p + margin + 1
        else:
            segs.append((start, end))
            start, end = p - margin, p + margin + 1
    segs.append((start, end))
    return segs


def _padded_slice(x, start, end):
    n = x.size
    out = np.zeros(end - start)
    a, b = max(start, 0), min(end, n)
    if a < b:
        out[a - start:b - start] = x[a:b]
    return out


def measure_harmonics(samples: np.ndarray, bank: HarmonicDetectorBank, positions,
                      level: float | None = None, period_average: bool = True):
    """IF (Hz) and smoothed aperiodicity of every bank detector at ``positions``.

    ``positions`` are in samples and may be fractional; values between
    samples are interpolated linearly.  Only the stretches of signal that
    can influence the requested samples are filtered, which gives the same
    result as whole-signal filtering with zero padding.  Returns arrays of
    shape ``(len(positions), len(bank.harmonics))``.

    With ``period_average`` the IF is averaged over one period of
    ``bank.f0_ref`` before sampling.  Leakage from neighbouring harmonics
    beats at multiples of F0, so this removes the IF ripple it causes
    when the bank is slightly off the true F0.  The warped-axis stage
    disables it because there the bank sits on F0 and the averaging
    would only cost modulation bandwidth.
    """
    samples = np.asarray(samples, dtype=float)
    positions = np.clip(np.asarray(positions, dtype=float), 0, samples.size - 1)
    if level is None:
        level = float(np.max(np.abs(samples)))
    floor = MAG_FLOOR * level
    n_h = len(bank.harmonics)
    freq = np.full((positions.size, n_h), np.nan)
    ap = np.ones((positions.size, n_h))
    if positions.size == 0 or n_h == 0:
        return freq, ap
    base = np.floor(positions).astype(int)
    frac = positions - base
    half = bank.kernel(bank.harmonics[0]).half_length
    period = int(round(bank.sample_rate / bank.f0_ref)) if period_average else 1
    margin = 3 * half + period + 2
    for start, end in _segments(base, margin, samples.size):
        seg = _padded_slice(samples, start, end)
        sel = np.flatnonzero((base >= start) & (base < end))
        i0 = base[sel] - start
        i1 = i0 + 1
        w = frac[sel]
        for j, k in enumerate(bank.harmonics):
            pair = bank.kernel(k)
            X = convolve_complex(seg, pair.h)
            X_d = convolve_complex(seg, pair.h_d)
            f = np.atleast_1d(flanagan_if(X, X_d)) / (2 * np.pi)
            f[np.abs(X) <= floor] = np.nan
            if period > 1:
                f = _moving_mean(f, period)
            _, a_ks = residual_cascade(X, pair.h, floor)
            freq[sel, j] = (1 - w) * f[i0] + w * f[i1]
            ap[sel, j] = (1 - w) * a_ks[i0] + w * a_ks[i1]
    return freq, ap


def _moving_mean(v, width):
    """Centered running mean over ``width`` samples; NaN if any input is NaN."""
    bad = np.isnan(v)
    c = np.concatenate([[0.0], np.cumsum(np.where(bad, 0.0, v))])
    nb = np.concatenate([[0], np.cumsum(bad)])
    lo = np.arange(v.size) - width // 2
    hi = lo + width
    out = np.full(v.size, np.nan)
    ok = (lo >= 0) & (hi <= v.size)
    ok[ok] &= nb[hi[ok]] == nb[lo[ok]]
    out[ok] = (c[hi[ok]] - c[lo[ok]]) / width
    return out


def _bank_index(f0):
    return np.round(BANK_STEPS_PER_OCTAVE * np.log2(f0)).astype(int)


def combine_harmonic_evidence(freqs, aps, harmonics, f0_in, sigma_scale,
                              divide_by_k2=True):
    """Mix ``f_k / k`` over usable harmonics of one frame.

    Returns ``(f0, variance)`` or ``(nan, nan)`` with no usable harmonic.
    A harmonic is usable when its IF is defined and within half an F0 of
    ``k * f0_in``.
    """
    ks = np.asarray(harmonics, dtype=float)
    ok = np.isfinite(freqs) & (np.abs(np.nan_to_num(freqs) - ks * f0_in) < 0.5 * f0_in)
    if not ok.any():
        return math.nan, math.nan
    var = sigma_scale * np.asarray(aps)[ok]
    if divide_by_k2:
        var = var / ks[ok] ** 2
    var = np.maximum(var, VARIANCE_FLOOR)
    sol = optimal_weights(var)
    return float((freqs[ok] / ks[ok]) @ sol.weights), sol.combined_variance


def _frame_positions(times, sample_rate, n):
    return np.clip(np.asarray(times, dtype=float) * sample_rate, 0, n - 1)


def _gate(f_new, var_new, f_in, flags):
    """Keep the input where the refined value is undefined or jumps > 0.5 octave."""
    bad = ~np.isfinite(f_new) | (np.abs(np.log2(np.where(np.isfinite(f_new), f_new, 1.0) / f_in)) > SANITY_OCT)
    out_f = np.where(bad, f_in, f_new)
    return out_f, np.where(bad, np.nan, var_new), flags | bad


def refine_harmonic(x: AudioBuffer, traj: F0Trajectory, m: int,
                    config: AnalysisConfig | None = None) -> F0Trajectory:
    """The H_m operator: refine each frame with harmonic detectors 1..m."""
    if m < 1:
        raise ParameterError("harmonic count must be >= 1")
    config = config or AnalysisConfig()
    f_in = traj.f0
    live = np.flatnonzero(np.isfinite(f_in) & (np.nan_to_num(f_in) > 0))
    if live.size == 0:
        raise ParameterError("trajectory has no unmasked frame")
    pos = _frame_positions(traj.times, x.sample_rate, len(x))
    level = float(np.max(np.abs(x.samples)))
    f_new = np.full(len(traj), np.nan)
    v_new = np.full(len(traj), np.nan)
    groups = _bank_index(f_in[live])
    for g in np.unique(groups):
        frames = live[groups == g]
        bank = HarmonicDetectorBank.design(2.0 ** (g / BANK_STEPS_PER_OCTAVE), x.sample_rate, m)
        freqs, aps = measure_harmonics(x.samples, bank, pos[frames], level)
        for row, t in enumerate(frames):
            f_new[t], v_new[t] = combine_harmonic_evidence(
                freqs[row], aps[row], bank.harmonics, f_in[t], config.sigma_scale,
                config.harmonic_variance_division)
    out = traj.copy()
    f_out, v_out, flags = _gate(f_new[live], v_new[live], f_in[live], out.flags[live])
    out.f0[live] = f_out
    out.variance[live] = np.where(np.isfinite(v_out), v_out, traj.variance[live])
    out.flags[live] = flags
    return out


def _filled_log_f0(traj: F0Trajectory) -> np.ndarray:
    ok = np.isfinite(traj.f0) & (np.nan_to_num(traj.f0) > 0)
    if not ok.any():
        raise ParameterError("trajectory has no unmasked frame to warp with")
    bad = np.isfinite(traj.f0) & ~ok
    if bad.any():
        raise ParameterError("non-positive F0 in the warp span")
    return np.interp(traj.times, traj.times[ok], np.log(traj.f0[ok]))


def warp_time_axis(x: AudioBuffer, traj: F0Trajectory) -> WarpResult:
    """Resample ``x`` on a time axis whose local rate follows F0.

    ``d tau / d t = f0(t) / f0_ref`` with ``f0_ref`` the geometric mean of
    the unmasked frames; the fundamental of the warped signal therefore
    sits at ``f0_ref``.  Masked frames are bridged linearly in log-F0 and
    the frame track is spline-interpolated to the audio rate.
    """
    log_f0 = _filled_log_f0(traj)
    ok = np.isfinite(traj.f0)
    f0_ref = float(np.exp(np.mean(np.log(traj.f0[ok]))))
    fs = x.sample_rate
    t = x.times
    if traj.times.size >= 2:
        spline = CubicSpline(traj.times, log_f0)
        rate = np.exp(spline(np.clip(t, traj.times[0], traj.times[-1])) - math.log(f0_ref))
    else:
        rate = np.full(t.size, math.exp(log_f0[0] - math.log(f0_ref)))
    tau = np.concatenate([[0.0], np.cumsum(0.5 * (rate[1:] + rate[:-1]) / fs)])
    n_out = int(math.floor(tau[-1] * fs + 1e-9)) + 1
    tau_out = np.arange(n_out) / fs
    t_src = np.interp(tau_out, tau, t)
    up = lowpass_upsample4(x.samples)
    grid = np.arange(up.size) / (4 * fs)
    warped = np.interp(t_src, grid, up)
    return WarpResult(AudioBuffer(warped, fs), f0_ref, t, tau, rate)


def refine_warped(x: AudioBuffer, traj: F0Trajectory, m: int,
                  config: AnalysisConfig | None = None, return_warp: bool = False):
    """The T_m operator: harmonic refinement on the F0-warped signal.

    The warped-axis estimate is mapped back with ``f0(t) = f0_w(tau(t)) * dtau/dt``.
    """
    config = config or AnalysisConfig()
    warp = warp_time_axis(x, traj)
    live = np.flatnonzero(np.isfinite(traj.f0))
    tau_frames = warp.tau(traj.times[live])
    pos = _frame_positions(tau_frames, x.sample_rate, len(warp.warped))
    bank = HarmonicDetectorBank.design(warp.f0_ref, x.sample_rate, m)
    freqs, aps = measure_harmonics(warp.warped.samples, bank, pos, period_average=False)
    rate = warp.rate_at(traj.times[live])
    f_new = np.full(live.size, np.nan)
    v_new = np.full(live.size, np.nan)
    for row in range(live.size):
        f_new[row], v_new[row] = combine_harmonic_evidence(
            freqs[row], aps[row], bank.harmonics, warp.f0_ref, config.sigma_scale,
            config.harmonic_variance_division)
    f_new = f_new * rate
    out = traj.copy()
    f_out, v_out, flags = _gate(f_new, v_new, traj.f0[live], out.flags[live])
    out.f0[live] = f_out
    out.variance[live] = np.where(np.isfinite(v_out), v_out, traj.variance[live])
    out.flags[live] = flags
    if return_warp:
        return out, warp
    return out


def harmonic_aperiodicity_report(warped: AudioBuffer, f0_ref: float, m: int,
                                 tau_frames, times=None, rate=None) -> HarmonicReport:
    """Per-harmonic IF, aperiodicity and calibrated SNR on a constant-F0 axis.

    ``tau_frames`` are the analysis instants on the (warped) axis; ``rate``
    converts warped-axis IF back to the original axis (1 when unwarped).
    """
    tau_frames = np.asarray(tau_frames, dtype=float)
    times = tau_frames if times is None else np.asarray(times, dtype=float)
    rate = np.ones(tau_frames.size) if rate is None else np.asarray(rate, dtype=float)
    bank = HarmonicDetectorBank.design(f0_ref, warped.sample_rate, m)
    pos = _frame_positions(tau_frames, warped.sample_rate, len(warped))
    freqs, aps = measure_harmonics(warped.samples, bank, pos)
    inst = np.full((tau_frames.size, m), np.nan)
    ap = np.full((tau_frames.size, m), np.nan)
    cols = np.asarray(bank.harmonics, dtype=int) - 1
    inst[:, cols] = freqs * rate[:, None]
    ap[:, cols] = aps
    snr = calibration.aperiodicity_to_snr_db(ap)
    return HarmonicReport(times, np.arange(1, m + 1), inst, ap, snr)


def _report_unwarped(x: AudioBuffer, traj: F0Trajectory, m: int) -> HarmonicReport:
    """Report on the original axis with banks following the trajectory."""
    n_frames = len(traj)
    inst = np.full((n_frames, m), np.nan)
    ap = np.full((n_frames, m), np.nan)
    live = np.flatnonzero(np.isfinite(traj.f0))
    pos = _frame_positions(traj.times, x.sample_rate, len(x))
    groups = _bank_index(traj.f0[live])
    level = float(np.max(np.abs(x.samples)))
    for g in np.unique(groups):
        frames = live[groups == g]
        bank = HarmonicDetectorBank.design(2.0 ** (g / BANK_STEPS_PER_OCTAVE), x.sample_rate, m)
        freqs, aps = measure_harmonics(x.samples, bank, pos[frames], level)
        cols = np.asarray(bank.harmonics, dtype=int) - 1
        inst[np.ix_(frames, cols)] = freqs
        ap[np.ix_(frames, cols)] = aps
    snr = calibration.aperiodicity_to_snr_db(ap)
    return HarmonicReport(traj.times.copy(), np.arange(1, m + 1), inst, ap, snr)


@dataclass
class PipelineResult:
    trajectory: F0Trajectory
    report: HarmonicReport
    initial: F0Trajectory
    stages: dict


def run_pipeline(x: AudioBuffer, config: AnalysisConfig | None = None,
                 variant: str | None = None, initial: InitialEstimate | None = None) -> PipelineResult:
    """Initial estimate followed by ``H10 . H3`` (variant "H") or ``T10 . T10 . H3`` ("T").

    With ``config.refine`` off, the initial estimate is returned unrefined.
    A precomputed ``initial`` (from the same audio and config) skips the
    front end and tracker.
    """
    config = config or AnalysisConfig()
    variant = variant or config.variant
    if variant not in ("H", "T"):
        raise ParameterError(f"unknown variant {variant!r}")
    init = initial if initial is not None else initial_estimate(x, config)
    traj = init.trajectory
    stages = {"initial": traj}
    m_rep = config.report_harmonics
    if not config.refine:
        return PipelineResult(traj, _report_unwarped(x, traj, m_rep), init.trajectory, stages)
    traj = refine_harmonic(x, traj, 3, config)
    stages["H3"] = traj
    if variant == "H":
        traj = refine_harmonic(x, traj, 10, config)
        stages["H10"] = traj
        report = _report_unwarped(x, traj, m_rep)
    else:
        traj = refine_warped(x, traj, 10, config)
        stages["T10"] = traj
        traj = refine_warped(x, traj, 10, config)
        stages["T10T10"] = traj
        warp = warp_time_axis(x, traj)
        report = harmonic_aperiodicity_report(
            warp.warped, warp.f0_ref, m_rep, warp.tau(traj.times), traj.times,
            warp.rate_at(traj.times))
    return PipelineResult(traj, report, init.trajectory, stages)
