"""Observation probability map from per-channel IF and aperiodicity.

Each unmasked channel contributes a Gaussian on the natural-log frequency
axis centered at its IF, with variance proportional to its smoothed
aperiodicity.  The probability that channel ``k`` holds the fundamental is
the mixture mass inside that channel's nominal band.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .frontend import ChannelLayout, FrameMaps


@dataclass(frozen=True)
class MixtureFrame:
    """Gaussian mixture on the log-frequency axis.

    An empty mixture (no unmasked channel) has zero-length arrays.
    """

    log_centers: np.ndarray
    variances: np.ndarray
    weights: np.ndarray

    @property
    def empty(self) -> bool:
        return self.log_centers.size == 0

    def density(self, nu) -> np.ndarray:
        nu = np.atleast_1d(np.asarray(nu, dtype=float))[:, None]
        sd = np.sqrt(self.variances)
        z = (nu - self.log_centers) / sd
        return (self.weights * np.exp(-0.5 * z * z) / (sd * np.sqrt(2 * np.pi))).sum(axis=1)

    def mass(self, lo, hi) -> float:
        """Mixture probability between ``lo`` and ``hi`` on the log axis."""
        if self.empty:
            return 0.0
        sd = np.sqrt(self.variances)
        return float(self.weights @ (ndtr((hi - self.log_centers) / sd)
                                     - ndtr((lo - self.log_centers) / sd)))


def variance_from_aperiodicity(a_ks, sigma_scale: float, sigma_min: float):
    """``sigma_scale * a_ks`` floored at ``sigma_min**2``."""
    var = sigma_scale * np.asarray(a_ks, dtype=float)
    return np.maximum(var, sigma_min ** 2)


def build_mixture(frame_if, frame_var) -> MixtureFrame:
    """One equally weighted Gaussian per unmasked (non-NaN) channel."""
    f = np.asarray(frame_if, dtype=float)
    v = np.asarray(frame_var, dtype=float)
    ok = np.isfinite(f) & (f > 0) & np.isfinite(v)
    n = int(ok.sum())
    if n == 0:
        return MixtureFrame(np.empty(0), np.empty(0), np.empty(0))
    return MixtureFrame(np.log(f[ok]), v[ok], np.full(n, 1.0 / n))


def channel_probability(mix: MixtureFrame, k: int, layout: ChannelLayout) -> float:
    lo, hi = layout.band_edges
    return mix.mass(np.log(lo[k]), np.log(hi[k]))


def probability_map(maps: FrameMaps, sigma_scale: float, sigma_min: float) -> np.ndarray:
    """Band probabilities for every frame and channel, shape ``(frames, channels)``.

    Vectorized form of :func:`build_mixture` + :func:`channel_probability`.
    """
    lo, hi = maps.layout.band_edges
    log_lo, log_hi = np.log(lo), np.log(hi)
    var = variance_from_aperiodicity(maps.ap_map, sigma_scale, sigma_min)
    ok = np.isfinite(maps.if_map) & (np.nan_to_num(maps.if_map) > 0)
    counts = ok.sum(axis=1)
    centers = np.log(np.where(ok, maps.if_map, 1.0))
    sd = np.sqrt(var)
    out = np.zeros(maps.if_map.shape)
    for i in range(maps.n_frames):
        if counts[i] == 0:
            continue
        c = centers[i, ok[i]]
        s = sd[i, ok[i]]
        cdf_hi = ndtr((log_hi[:, None] - c) / s)
        cdf_lo = ndtr((log_lo[:, None] - c) / s)
        out[i] = (cdf_hi - cdf_lo).sum(axis=1) / counts[i]
    return out


def fill_probability(maps: FrameMaps, sigma_scale: float, sigma_min: float) -> FrameMaps:
    maps.prob_map = probability_map(maps, sigma_scale, sigma_min)
    return maps
