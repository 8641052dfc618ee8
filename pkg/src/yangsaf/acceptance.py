"""Acceptance thresholds for the noise and FM batteries.

Shared by ``yangsaf fmtf --check`` / ``yangsaf snr-sweep --check`` and the
acceptance test module so both judge a build by the same numbers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .evaluation import BatteryPoint, curve_from_points

# noise robustness: refined error at most this fraction of the initial error
NOISE_RATIO = 0.25
NOISE_MIN_SNR = 0.0
# FM tracking
GAIN_AT_16 = 0.7
MINUS3DB_RATIO = 1.8
RMS_RATIO = 0.2
RMS_BAND = (2.0, 16.0)
SPURIOUS_DB = -40.0
SPURIOUS_MOD_FREQ = 16.0
# Points beyond the stated 1..32 Hz battery, measured only to locate a
# -3 dB point that the battery leaves censored.
FM_EXTENSION = (48.0, 64.0)
REFERENCE_RMS_FACTOR = 10.0


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: str
    threshold: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.measured} (required {self.threshold})"


def _non_increasing(values) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.isfinite(v)) and np.all(np.diff(v) <= 0))


def check_noise(medians: dict) -> list[CheckResult]:
    """Judge ``{snr: (median_initial, median_refined)}`` from ``median_by_snr``."""
    snrs = sorted(medians)
    init = [medians[s][0] for s in snrs]
    ref = [medians[s][1] for s in snrs]
    ratios = {s: medians[s][1] / medians[s][0] for s in snrs if s >= NOISE_MIN_SNR}
    worst = max(ratios.values()) if ratios else math.nan
    detail = ", ".join(f"{s:g} dB: {medians[s][0] / medians[s][1]:.1f}x" for s in ratios)
    return [
        CheckResult("noise: refined/initial RMS at SNR >= 0 dB",
                    bool(ratios) and worst <= NOISE_RATIO,
                    f"worst ratio {worst:.3f} ({detail})", f"<= {NOISE_RATIO}"),
        CheckResult("noise: initial-estimate error non-increasing in SNR", _non_increasing(init),
                    " ".join(f"{v:.4g}" for v in init), "monotone"),
        CheckResult("noise: refined error non-increasing in SNR", _non_increasing(ref),
                    " ".join(f"{v:.4g}" for v in ref), "monotone"),
    ]


def check_fm(points: list[BatteryPoint], extension: list[BatteryPoint] = ()) -> list[CheckResult]:
    """Judge FM battery points that carry both the ``"H"`` and ``"T"`` tracks.

    ``extension`` points join the battery only for locating -3 dB points.
    """
    by_freq = {p.mod_freq: p for p in points}
    out = []

    p16 = by_freq.get(SPURIOUS_MOD_FREQ)
    if p16 is not None:
        g = p16.fits["T"].amplitude
        out.append(CheckResult("fmtf: T-chain gain at 16 Hz", g >= GAIN_AT_16, f"{g:.4f}",
                               f">= {GAIN_AT_16}"))

    all_points = list(points) + list(extension)
    h = curve_from_points(all_points, "H")
    t = curve_from_points(all_points, "T")
    ratio = t.minus3db_point / h.minus3db_point
    note = []
    if h.censored:
        note.append("H censored")
    if t.censored:
        note.append("T censored (lower bound)")
    out.append(CheckResult(
        "fmtf: T-chain -3 dB point / H-chain -3 dB point",
        (not h.censored) and ratio >= MINUS3DB_RATIO,
        f"{t.minus3db_point:.2f} Hz / {h.minus3db_point:.2f} Hz = {ratio:.2f}"
        + (f" [{'; '.join(note)}]" if note else ""),
        f">= {MINUS3DB_RATIO}"))

    band = sorted(f for f in by_freq if RMS_BAND[0] <= f <= RMS_BAND[1])
    if band:
        ratios = {f: by_freq[f].rms_cents["T"] / by_freq[f].rms_cents["H"] for f in band}
        worst = max(ratios.values())
        detail = ", ".join(f"{f:g} Hz: {1 / r:.1f}x" for f, r in ratios.items())
        out.append(CheckResult(
            "rms: T-chain / H-chain RMS cents over 2..16 Hz", worst <= RMS_RATIO,
            f"worst ratio {worst:.4f}; improvement {detail}; reference target {REFERENCE_RMS_FACTOR:g}x or more",
            f"<= {RMS_RATIO}"))

    if p16 is not None:
        level = spurious_level_db(p16, "T")
        out.append(CheckResult("spurious: residual after modulation fit at 16 Hz (T-chain)",
                               level <= SPURIOUS_DB, f"{level:.1f} dB", f"<= {SPURIOUS_DB} dB"))
    return out


def spurious_level_db(point: BatteryPoint, name: str) -> float:
    """Residual RMS of ``est - truth`` after the sinusoid fit, in dB re the modulation amplitude."""
    return 20 * math.log10(max(point.error_fits[name].residual_rms, 1e-300) / point.mod_amplitude)
