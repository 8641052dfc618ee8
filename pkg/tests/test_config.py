import json

import numpy as np
import pytest

from yangsaf.config import SIGMA_SCALE, AnalysisConfig, thread_count
from yangsaf.signal_core import ParameterError


def test_defaults():
    cfg = AnalysisConfig()
    assert (cfg.f_lo, cfg.f_hi, cfg.channels_per_octave, cfg.frame_rate) == (40.0, 1000.0, 12, 200.0)
    assert cfg.sigma_scale == SIGMA_SCALE
    assert cfg.sigma_floor == pytest.approx(np.log(2) / 48)


def test_json_round_trip(tmp_path):
    cfg = AnalysisConfig(f_lo=50.0, variant="H", sigma_min=0.02, seeds=[3, 4])
    path = tmp_path / "cfg.json"
    cfg.save(path)
    back = AnalysisConfig.load(path)
    assert back == cfg
    assert back.digest() == cfg.digest()
    assert json.loads(path.read_text())["variant"] == "H"


def test_digest_tracks_every_field():
    base = AnalysisConfig().digest()
    assert AnalysisConfig(variant="H").digest() != base
    assert AnalysisConfig(harmonic_variance_division=False).digest() != base
    assert AnalysisConfig().digest() == base


@pytest.mark.parametrize("kw", [dict(f_lo=0.0), dict(f_hi=-1.0), dict(f_lo=500.0, f_hi=100.0),
                                dict(frame_rate=float("nan")), dict(channels_per_octave=0),
                                dict(channels_per_octave=2.5), dict(sigma_min=0.0),
                                dict(variant="Z"), dict(report_harmonics=0)])
def test_invalid_values_rejected(kw):
    with pytest.raises(ParameterError):
        AnalysisConfig(**kw)


def test_unknown_keys_rejected():
    with pytest.raises(ParameterError, match="unknown"):
        AnalysisConfig.from_dict({"f_lo": 40.0, "bogus": 1})


@pytest.mark.parametrize("raw, expected", [(None, 1), ("4", 4), ("0", 1), ("junk", 1)])
def test_thread_count(monkeypatch, raw, expected):
    if raw is None:
        monkeypatch.delenv("YANGSAF_THREADS", raising=False)
    else:
        monkeypatch.setenv("YANGSAF_THREADS", raw)
    assert thread_count() == expected
