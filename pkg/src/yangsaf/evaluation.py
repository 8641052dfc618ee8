"""Tracking-fidelity metrics on the log-frequency axis.

All errors are in cents, ``1200 * log2(f_est / f_true)``.  The first and
last 100 ms of each test signal are excluded from every metric.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import AnalysisConfig, thread_count
from .refinement import run_pipeline
from .signal_core import ParameterError
from .testgen import TestSignalSpec, synthesize
from .tracker import F0Trajectory, initial_estimate

EDGE_SECONDS = 0.1
DEFAULT_MOD_FREQS = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0)
DEFAULT_SNRS = (-10.0, 0.0, 10.0, 20.0, 30.0, 100.0)
MIN_VALID_FRACTION = 0.8


def cents_error(est: F0Trajectory, truth: F0Trajectory, edge: float = EDGE_SECONDS):
    """Per-frame cent errors over unmasked, non-edge frames of ``est``.

    Returns ``(times, cents)``.  The truth is interpolated linearly in
    log-F0 at the estimate's frame times.
    """
    t0, t1 = truth.times[0] + edge, truth.times[-1] - edge
    keep = (est.times >= t0) & (est.times <= t1)
    if not keep.any():
        raise ParameterError("estimate and truth do not overlap")
    keep &= np.isfinite(est.f0) & (np.nan_to_num(est.f0) > 0)
    t = est.times[keep]
    log_true = np.interp(t, truth.times, np.log2(truth.f0))
    return t, 1200.0 * (np.log2(est.f0[keep]) - log_true)


def rms_cent_error(est: F0Trajectory, truth: F0Trajectory, edge: float = EDGE_SECONDS) -> float:
    _, c = cents_error(est, truth, edge)
    if c.size == 0:
        return math.nan
    return float(np.sqrt(np.mean(c * c)))


def valid_fraction(est: F0Trajectory, truth: F0Trajectory, edge: float = EDGE_SECONDS) -> float:
    t0, t1 = truth.times[0] + edge, truth.times[-1] - edge
    keep = (est.times >= t0) & (est.times <= t1)
    return float(np.mean(np.isfinite(est.f0[keep]))) if keep.any() else 0.0


@dataclass
class ModulationFit:
    amplitude: float     # cents, zero-to-peak
    phase: float         # radians, model amplitude * sin(w t + phase)
    offset: float        # cents
    residual_rms: float  # cents, after removing offset and sinusoid


def fit_modulation(times, cents, mod_freq: float) -> ModulationFit:
    """Least-squares fit of ``c0 + a cos(wt) + b sin(wt)``."""
    times = np.asarray(times, dtype=float)
    cents = np.asarray(cents, dtype=float)
    w = 2 * np.pi * mod_freq
    design = np.column_stack([np.ones_like(times), np.cos(w * times), np.sin(w * times)])
    coef, *_ = np.linalg.lstsq(design, cents, rcond=None)
    resid = cents - design @ coef
    return ModulationFit(float(np.hypot(coef[1], coef[2])), float(np.arctan2(coef[1], coef[2])),
                         float(coef[0]), float(np.sqrt(np.mean(resid ** 2))))


def modulation_gain(est: F0Trajectory, f0_mean: float, depth: float, mod_freq: float,
                    truth: F0Trajectory | None = None, edge: float = EDGE_SECONDS) -> ModulationFit:
    """Fit the modulation in ``1200 log2(f_est / f0_mean)``; amplitude is divided by depth/2."""
    t_lo = est.times[0] + edge if truth is None else truth.times[0] + edge
    t_hi = est.times[-1] - edge if truth is None else truth.times[-1] - edge
    keep = (est.times >= t_lo) & (est.times <= t_hi) & np.isfinite(est.f0)
    cents = 1200.0 * np.log2(est.f0[keep] / f0_mean)
    fit = fit_modulation(est.times[keep], cents, mod_freq)
    fit.amplitude = fit.amplitude / (depth / 2.0)
    return fit


@dataclass
class FMTFCurve:
    mod_freqs: np.ndarray
    gain: np.ndarray
    minus3db_point: float
    censored: bool = False      # gain never fell below -3 dB in the battery
    reliable: np.ndarray | None = None


def minus3db_point(mod_freqs, gain) -> tuple[float, bool]:
    """First -3 dB crossing, interpolated linearly in (log f, dB).

    When the gain never drops below -3 dB the highest frequency is
    returned as a lower bound with ``censored=True``.
    """
    mod_freqs = np.asarray(mod_freqs, dtype=float)
    gain_db = 20 * np.log10(np.maximum(np.asarray(gain, dtype=float), 1e-12))
    target = 20 * np.log10(np.sqrt(0.5))
    below = np.flatnonzero(gain_db < target)
    if below.size == 0:
        return float(mod_freqs[-1]), True
    i = below[0]
    if i == 0:
        return float(mod_freqs[0]), False
    x0, x1 = np.log(mod_freqs[i - 1]), np.log(mod_freqs[i])
    y0, y1 = gain_db[i - 1], gain_db[i]
    x = x0 + (target - y0) * (x1 - x0) / (y1 - y0)
    return float(np.exp(x)), False


def _map(fn, items):
    workers = thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


@dataclass
class BatteryPoint:
    mod_freq: float
    snr_db: float | None
    seed: int
    mod_amplitude: float = 0.0  # cents, zero-to-peak
    rms_cents: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)         # modulation in 1200 log2(f / f0_mean)
    error_fits: dict = field(default_factory=dict)   # same fit on the error est - truth
    stage_rms: dict = field(default_factory=dict)    # "variant/stage" -> RMS cents
    valid: dict = field(default_factory=dict)


def run_fm_point(mod_freq: float, config: AnalysisConfig, variants=("H", "T"), f0_mean=120.0,
                 depth=100.0, snr_db=100.0, seed=0, duration=3.0, sample_rate=22050.0,
                 **spec_kw) -> BatteryPoint:
    """Synthesize one FM test signal and score every variant on it.

    The front end and tracker run once and are shared by all variants;
    keys of the result dicts are the variant names plus ``"initial"``.
    """
    spec = TestSignalSpec(f0_mean=f0_mean, depth=depth, mod_freq=mod_freq, duration=duration,
                          sample_rate=sample_rate, snr_db=snr_db, seed=seed, **spec_kw)
    x, truth = synthesize(spec)
    point = BatteryPoint(mod_freq, snr_db, seed, depth / 2.0)
    init = initial_estimate(x, config)
    tracks = {"initial": init.trajectory}
    for v in variants:
        res = run_pipeline(x, config, v, initial=init)
        tracks[v] = res.trajectory
        for stage, tr in res.stages.items():
            point.stage_rms[f"{v}/{stage}"] = rms_cent_error(tr, truth)
    for name, tr in tracks.items():
        point.rms_cents[name] = rms_cent_error(tr, truth)
        point.valid[name] = valid_fraction(tr, truth)
        if depth > 0 and mod_freq > 0:
            point.fits[name] = modulation_gain(tr, f0_mean, depth, mod_freq, truth)
            point.error_fits[name] = fit_modulation(*cents_error(tr, truth), mod_freq)
    return point


def fm_battery(mod_freqs=DEFAULT_MOD_FREQS, config: AnalysisConfig | None = None,
               variants=("H", "T"), **kw) -> list[BatteryPoint]:
    """``run_fm_point`` at every modulation frequency (parallel under ``YANGSAF_THREADS``)."""
    config = config or AnalysisConfig()
    return _map(lambda fm: run_fm_point(fm, config, variants, **kw), list(mod_freqs))


def curve_from_points(points: list[BatteryPoint], name: str) -> FMTFCurve:
    """FMTF of track ``name`` (a variant or ``"initial"``) from battery points."""
    points = sorted(points, key=lambda p: p.mod_freq)
    freqs = np.array([p.mod_freq for p in points])
    gain = np.array([p.fits[name].amplitude for p in points])
    reliable = np.array([p.valid[name] >= MIN_VALID_FRACTION for p in points])
    point, censored = minus3db_point(freqs, gain)
    return FMTFCurve(freqs, gain, point, censored, reliable)


def fmtf(variant: str = "T", f0_mean: float = 120.0, depth: float = 100.0,
         mod_freqs=DEFAULT_MOD_FREQS, config: AnalysisConfig | None = None,
         snr_db: float = 100.0, seed: int = 0, duration: float = 3.0,
         tracker=None) -> FMTFCurve:
    """FM transfer function of a pipeline variant.

    ``tracker`` may replace the pipeline with any callable
    ``(audio, truth) -> F0Trajectory``.
    """
    config = config or AnalysisConfig()

    def one(fm):
        spec = TestSignalSpec(f0_mean=f0_mean, depth=depth, mod_freq=fm, duration=duration,
                              snr_db=snr_db, seed=seed)
        x, truth = synthesize(spec)
        est = tracker(x, truth) if tracker else run_pipeline(x, config, variant).trajectory
        fit = modulation_gain(est, f0_mean, depth, fm, truth)
        return fit.amplitude, valid_fraction(est, truth) >= MIN_VALID_FRACTION

    results = _map(one, list(mod_freqs))
    gain = np.array([r[0] for r in results])
    reliable = np.array([r[1] for r in results])
    point, censored = minus3db_point(mod_freqs, gain)
    return FMTFCurve(np.asarray(mod_freqs, dtype=float), gain, point, censored, reliable)


def snr_sweep(variant: str = "H", snr_list=DEFAULT_SNRS, seeds=range(5),
              config: AnalysisConfig | None = None, f0_mean: float = 120.0,
              duration: float = 3.0):
    """Constant-F0 battery: rows of ``(snr_db, seed, rms_initial, rms_refined)``."""
    config = config or AnalysisConfig()
    jobs = [(snr, seed) for snr in snr_list for seed in seeds]

    def one(job):
        snr, seed = job
        x, truth = synthesize(TestSignalSpec(f0_mean=f0_mean, duration=duration,
                                             snr_db=snr, seed=seed))
        res = run_pipeline(x, config, variant)
        return (snr, seed, rms_cent_error(res.initial, truth),
                rms_cent_error(res.trajectory, truth))

    return _map(one, jobs)


def median_by_snr(rows):
    """Collapse ``snr_sweep`` rows to ``{snr: (median_initial, median_refined)}``."""
    out = {}
    for snr in sorted({r[0] for r in rows}):
        sel = [r for r in rows if r[0] == snr]
        out[snr] = (float(np.median([r[2] for r in sel])), float(np.median([r[3] for r in sel])))
    return out


def linear_fit_residual_power(amplitude: float, omega: float, phase: float, start: float,
                              length: float) -> float:
    """Mean squared residual of the best line through ``A sin(omega t + phase)`` on a segment.

    Closed form: project onto the orthogonal basis ``{1, t - center}``.
    """
    c = start + length / 2
    h = length / 2
    # integrals over u in [-h, h] of sin(omega (c+u) + phase) and u * sin(...)
    th = omega * c + phase
    s0 = 2 * math.sin(th) * math.sin(omega * h) / omega
    s1 = 2 * math.cos(th) * (math.sin(omega * h) / omega ** 2 - h * math.cos(omega * h) / omega)
    total = h - math.cos(2 * th) * math.sin(2 * omega * h) / (2 * omega)
    proj = s0 ** 2 / (2 * h) + s1 ** 2 / (2 * h ** 3 / 3)
    return amplitude ** 2 * max(total - proj, 0.0) / length


def piecewise_linear_baseline(depth: float, mod_freq: float, segment: float,
                              duration: float = 3.0, edge: float = EDGE_SECONDS) -> float:
    """RMS cents of the best per-segment linear approximation of the true log-F0.

    Segments tile ``[edge, duration - edge]``; the final partial segment,
    if any, is fitted on its own.
    """
    amp = depth / 2.0
    omega = 2 * np.pi * mod_freq
    t0, t1 = edge, duration - edge
    acc, span = 0.0, 0.0
    start = t0
    while start < t1 - 1e-12:
        length = min(segment, t1 - start)
        acc += linear_fit_residual_power(amp, omega, 0.0, start, length) * length
        span += length
        start += length
    return float(np.sqrt(acc / span))
