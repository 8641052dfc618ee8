"""Monte-Carlo calibrations behind two stored constants.

``calibrate_sigma_scale`` relates front-end aperiodicity to the variance of
log-IF errors (stored as ``config.SIGMA_SCALE``).  ``calibrate_snr_table``
relates the harmonic-detector aperiodicity to the local SNR around a
harmonic (stored as ``SNR_TABLE`` below), which the harmonic report
inverts.  Both sweeps are deterministic given their seeds.
"""
from __future__ import annotations

import numpy as np

# (local SNR in dB, median log10 a_ks) for a tone at k*f0 plus Gaussian noise
# confined to (k-1/2)f0..(k+1/2)f0, detector of duration 4/f0.  Generated by
# calibrate_snr_table() with its defaults.
SNR_TABLE = (
    (-10.0, -1.4783), (-5.0, -1.6069), (0.0, -1.9055), (5.0, -2.4417),
    (10.0, -2.9493), (15.0, -3.4510), (20.0, -3.9456), (25.0, -4.4437),
    (30.0, -4.9447), (35.0, -5.4410), (40.0, -5.9408), (45.0, -6.4399),
    (50.0, -6.9402), (55.0, -7.4404), (60.0, -7.9405),
)


def aperiodicity_to_snr_db(a) -> np.ndarray:
    """Invert the calibration table; values beyond its ends extrapolate at 10 dB/decade."""
    a = np.asarray(a, dtype=float)
    snr_pts = np.array([p[0] for p in SNR_TABLE])
    log_a = np.array([p[1] for p in SNR_TABLE])
    with np.errstate(divide="ignore", invalid="ignore"):
        la = np.log10(np.maximum(a, 1e-300))
    # log_a decreases with snr; np.interp needs increasing x
    out = np.interp(la, log_a[::-1], snr_pts[::-1])
    hi = la < log_a[-1]
    out = np.where(hi, snr_pts[-1] + 10.0 * (log_a[-1] - la), out)
    lo = la > log_a[0]
    out = np.where(lo, snr_pts[0] - 10.0 * (la - log_a[0]), out)
    return np.where(np.isnan(a), np.nan, out)


def calibrate_sigma_scale(snrs=(0.0, 10.0, 20.0, 30.0), seeds=range(20), f_tone=120.0,
                          sample_rate=22050.0, duration=1.0, frame_rate=200.0):
    """Ratio of empirical ln(IF) error variance to mean a_ks, per SNR.

    Returns ``(ratios, median)``; the channel is centered on the tone.
    """
    from .frontend import analyze_channel
    from .signal_core import AudioBuffer
    from .testgen import add_noise

    n = int(duration * sample_rate)
    t = np.arange(n) / sample_rate
    clean = AudioBuffer(np.cos(2 * np.pi * f_tone * t), sample_rate)
    hop = int(round(sample_rate / frame_rate))
    edge = int(round(3 * 2 / f_tone * sample_rate))
    idx = np.arange(edge, n - edge, hop)
    ratios = []
    for snr in snrs:
        errs, aps = [], []
        for seed in seeds:
            x = add_noise(clean, snr, seed)
            tr = analyze_channel(x, f_tone)
            errs.append(np.log(tr.inst_freq[idx] / f_tone))
            aps.append(tr.aperiodicity_smoothed[idx])
        errs = np.concatenate(errs)
        aps = np.concatenate(aps)
        ratios.append(float(np.var(errs) / np.mean(aps)))
    return np.array(ratios), float(np.median(ratios))


def calibrate_snr_table(snrs=tuple(range(-10, 61, 5)), seeds=range(8), f0=120.0, k=5,
                        sample_rate=22050.0, duration=1.0, frame_rate=200.0):
    """Median log10 a_ks of harmonic detector ``k`` versus local SNR."""
    from .refinement import HarmonicDetectorBank, measure_harmonics
    from .testgen import bandlimited_noise

    n = int(duration * sample_rate)
    t = np.arange(n) / sample_rate
    tone = np.cos(2 * np.pi * k * f0 * t)
    p_tone = 0.5
    bank = HarmonicDetectorBank(f0, sample_rate, (k,))
    hop = int(round(sample_rate / frame_rate))
    edge = int(round(3 * 2 / f0 * sample_rate))
    pos = np.arange(edge, n - edge, hop)
    rows = []
    for snr in snrs:
        vals = []
        for seed in seeds:
            noise = bandlimited_noise(n, sample_rate, (k - 0.5) * f0, (k + 0.5) * f0,
                                      p_tone / 10 ** (snr / 10), seed)
            _, ap = measure_harmonics(tone + noise, bank, pos)
            vals.append(ap[:, 0])
        rows.append((float(snr), float(np.median(np.log10(np.concatenate(vals))))))
    return tuple(rows)
