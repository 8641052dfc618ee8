"""Analysis parameter set and its JSON round trip."""
from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field, fields

from .signal_core import ParameterError

# Log-IF variance per unit of smoothed front-end aperiodicity.  Produced by
# ``yangsaf.calibration.calibrate_sigma_scale()`` (120 Hz sinusoid plus white
# noise at 0..30 dB SNR, 22050 Hz, 20 seeds; ratios 0.5996..0.6002): median
# ratio of the empirical variance of ln(IF) to the mean a_ks of the channel
# centered on the tone.
SIGMA_SCALE = 0.600

VARIANTS = ("H", "T")


@dataclass
class AnalysisConfig:
    """Design parameters of the analysis (the parameter set Theta)."""

    f_lo: float = 40.0
    f_hi: float = 1000.0
    channels_per_octave: int = 12
    frame_rate: float = 200.0
    sigma_scale: float = SIGMA_SCALE
    # None -> a quarter of the channel spacing on the natural-log axis
    sigma_min: float | None = None
    variant: str = "T"
    harmonic_variance_division: bool = True
    refine: bool = True
    report_harmonics: int = 10
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("f_lo", "f_hi", "frame_rate", "sigma_scale"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be a positive number, got {value!r}")
        if self.f_lo >= self.f_hi:
            raise ParameterError(f"f_lo ({self.f_lo}) must be below f_hi ({self.f_hi})")
        if int(self.channels_per_octave) != self.channels_per_octave or self.channels_per_octave < 1:
            raise ParameterError("channels_per_octave must be a positive integer")
        if self.sigma_min is not None and not self.sigma_min > 0:
            raise ParameterError("sigma_min must be positive")
        if self.variant not in VARIANTS:
            raise ParameterError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.report_harmonics < 1:
            raise ParameterError("report_harmonics must be >= 1")

    @property
    def sigma_floor(self) -> float:
        if self.sigma_min is not None:
            return float(self.sigma_min)
        return math.log(2.0) / self.channels_per_octave / 4.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "AnalysisConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "AnalysisConfig":
        return cls.from_dict(json.loads(text))

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "AnalysisConfig":
        with open(path) as fh:
            return cls.from_json(fh.read())

    def digest(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


def thread_count() -> int:
    """Worker threads allowed by ``YANGSAF_THREADS`` (default 1)."""
    raw = os.environ.get("YANGSAF_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1
