"""Command-line front end.

Exit codes: 0 success, 1 usage or I/O error, 2 acceptance check failed.
Every command writes only inside its output directory.
"""
from __future__ import annotations

import argparse
import hashlib
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .acceptance import FM_EXTENSION, check_fm, check_noise
from .audio_io import AudioIOError, read_wav, write_csv, write_json, write_text, write_wav
from .config import AnalysisConfig
from .evaluation import (DEFAULT_MOD_FREQS, DEFAULT_SNRS, curve_from_points, fm_battery,
                         median_by_snr, snr_sweep)
from .refinement import run_pipeline
from .signal_core import ParameterError
from .testgen import TestSignalSpec, synthesize
from .tracker import initial_estimate

EXIT_OK, EXIT_USAGE, EXIT_CHECK = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _load_config(args) -> AnalysisConfig:
    cfg = AnalysisConfig.load(args.config) if args.config else AnalysisConfig()
    if getattr(args, "variant", None):
        cfg.variant = args.variant
    if getattr(args, "no_refine", False):
        cfg.refine = False
    cfg.validate()
    return cfg


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(out: Path, command: str, cfg: AnalysisConfig, outputs, **extra):
    write_json(out / "manifest.json", {
        "tool": "yangsaf", "version": __version__, "command": command,
        "variant": cfg.variant, "config_digest": cfg.digest(), "config": cfg.to_dict(),
        "outputs": sorted(outputs), **extra,
    })


def cmd_analyze(args) -> int:
    cfg = _load_config(args)
    x = read_wav(args.input)
    out = _out_dir(args.out_dir)
    init = initial_estimate(x, cfg)
    res = run_pipeline(x, cfg, cfg.variant, initial=init)
    tr = res.trajectory
    write_csv(out / "f0.csv", ["time_s", "f0_hz", "variance", "masked"],
              zip(tr.times, tr.f0, tr.variance, tr.masked))
    rep = res.report
    with np.errstate(divide="ignore", invalid="ignore"):
        ap_db = 10 * np.log10(rep.aperiodicity)
    write_csv(out / "aperiodicity.csv", ["time_s"] + [f"ap_{k}" for k in rep.harmonics],
              ([t, *row] for t, row in zip(rep.times, ap_db)))
    outputs = ["f0.csv", "aperiodicity.csv"]
    if args.emit_maps:
        maps = init.maps
        write_json(out / "maps.json", {
            "frame_times": maps.frame_times, "centers": maps.layout.centers,
            "inst_freq": maps.if_map, "aperiodicity": maps.ap_map, "probability": maps.prob_map,
        })
        outputs.append("maps.json")
    digest = hashlib.sha256(Path(args.input).read_bytes()).hexdigest()
    _manifest(out, "analyze", cfg, outputs + ["manifest.json"],
              input={"name": Path(args.input).name, "sha256": digest,
                     "sample_rate": x.sample_rate, "samples": len(x)})
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = TestSignalSpec(f0_mean=args.f0, depth=args.depth_cents, mod_freq=args.mod_hz,
                          n_harmonics=args.harmonics, harmonic_slope=args.slope_db,
                          duration=args.duration, sample_rate=args.sample_rate,
                          snr_db=args.snr_db, seed=args.seed)
    audio, truth = synthesize(spec)   # validates before anything is written
    out = _out_dir(args.out_dir)
    write_wav(out / "out.wav", audio)
    write_csv(out / "truth.csv", ["time_s", "f0_hz"], zip(truth.times, truth.f0))
    write_json(out / "manifest.json", {
        "tool": "yangsaf", "version": __version__, "command": "synth",
        "spec": {k: getattr(spec, k) for k in spec.__dataclass_fields__},
        "outputs": ["manifest.json", "out.wav", "truth.csv"],
    })
    return EXIT_OK


FMTF_PLOT = '''"""Plot the FM transfer function and RMS error curves from curves.csv."""
import csv
import math

import matplotlib.pyplot as plt

with open("curves.csv") as fh:
    rows = list(csv.DictReader(fh))
fm = [float(r["mod_hz"]) for r in rows]
fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
for v in ("H", "T"):
    ax1.semilogx(fm, [20 * math.log10(float(r["gain_" + v])) for r in rows], "o-", label=v + "-chain")
    ax2.loglog(fm, [float(r["rms_cents_" + v]) for r in rows], "o-", label=v + "-chain")
ax1.axhline(-3, color="gray", ls=":")
ax1.set(xlabel="modulation frequency (Hz)", ylabel="FMTF gain (dB)")
ax2.set(xlabel="modulation frequency (Hz)", ylabel="RMS error (cents)")
for ax in (ax1, ax2):
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
fig.tight_layout()
fig.savefig("fmtf.png", dpi=150)
'''

SWEEP_PLOT = '''"""Plot RMS F0 error against SNR from curves.csv."""
import csv
import matplotlib.pyplot as plt

with open("curves.csv") as fh:
    rows = list(csv.DictReader(fh))
snr = [float(r["snr_db"]) for r in rows]
fig, ax = plt.subplots(figsize=(5, 4))
ax.semilogy(snr, [float(r["rms_cents_initial"]) for r in rows], "o-", label="initial estimate")
ax.semilogy(snr, [float(r["rms_cents_refined"]) for r in rows], "s-", label="refined")
ax.set(xlabel="SNR (dB)", ylabel="RMS error (cents)")
ax.legend()
ax.grid(True, which="both", alpha=0.3)
fig.tight_layout()
fig.savefig("snr_sweep.png", dpi=150)
'''


def _report_checks(out: Path, results) -> int:
    lines = [r.line() for r in results]
    write_text(out / "check_report.txt", "\n".join(lines) + "\n")
    failed = [r for r in results if not r.passed]
    for line in lines:
        print(line)
    if failed:
        print(f"{len(failed)} check(s) failed", file=sys.stderr)
        for r in failed:
            print(f"  {r.name}: measured {r.measured}, required {r.threshold}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def cmd_fmtf(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args.out_dir)
    kw = dict(f0_mean=args.f0, depth=args.depth_cents, snr_db=args.snr_db, seed=args.seed,
              duration=args.duration)
    points = fm_battery(args.mod_hz, cfg, **kw)
    curves = {v: curve_from_points(points, v) for v in ("H", "T")}
    by_freq = {p.mod_freq: p for p in points}
    write_csv(out / "curves.csv", ["mod_hz", "gain_H", "gain_T", "rms_cents_H", "rms_cents_T"],
              ([f, curves["H"].gain[i], curves["T"].gain[i],
                by_freq[f].rms_cents["H"], by_freq[f].rms_cents["T"]]
               for i, f in enumerate(curves["H"].mod_freqs)))
    write_text(out / "plot_fmtf.py", FMTF_PLOT)
    outputs = ["curves.csv", "plot_fmtf.py", "manifest.json"]
    summary = {v: {"minus3db_hz": c.minus3db_point, "censored": c.censored}
               for v, c in curves.items()}
    status = EXIT_OK
    if args.check:
        extension = []
        if curves["T"].censored or curves["H"].censored:
            extension = fm_battery([f for f in FM_EXTENSION if f > max(args.mod_hz)], cfg, **kw)
            write_csv(out / "curves_extension.csv",
                      ["mod_hz", "gain_H", "gain_T", "rms_cents_H", "rms_cents_T"],
                      ([p.mod_freq, p.fits["H"].amplitude, p.fits["T"].amplitude,
                        p.rms_cents["H"], p.rms_cents["T"]] for p in extension))
            outputs.append("curves_extension.csv")
        status = _report_checks(out, check_fm(points, extension))
        outputs.append("check_report.txt")
    _manifest(out, "fmtf", cfg, outputs, battery={**kw, "mod_hz": list(args.mod_hz)},
              minus3db=summary)
    return status


def cmd_snr_sweep(args) -> int:
    cfg = _load_config(args)
    cfg.variant = "H"
    out = _out_dir(args.out_dir)
    seeds = args.seeds if args.seeds is not None else cfg.seeds
    rows = snr_sweep("H", args.snr_db, seeds, cfg, f0_mean=args.f0, duration=args.duration)
    write_csv(out / "sweep_rows.csv", ["snr_db", "seed", "rms_cents_initial", "rms_cents_refined"],
              rows)
    med = median_by_snr(rows)
    write_csv(out / "curves.csv", ["snr_db", "rms_cents_initial", "rms_cents_refined"],
              ([s, a, b] for s, (a, b) in med.items()))
    write_text(out / "plot_snr_sweep.py", SWEEP_PLOT)
    outputs = ["curves.csv", "sweep_rows.csv", "plot_snr_sweep.py", "manifest.json"]
    status = EXIT_OK
    if args.check:
        status = _report_checks(out, check_noise(med))
        outputs.append("check_report.txt")
    _manifest(out, "snr-sweep", cfg, outputs,
              battery={"snr_db": list(args.snr_db), "seeds": list(seeds), "f0": args.f0,
                       "duration": args.duration})
    return status


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="yangsaf", description="F0 and aperiodicity analysis.")
    p.add_argument("--version", action="version", version=f"yangsaf {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="JSON analysis configuration file")
        sp.add_argument("--out-dir", required=True, help="directory for all outputs")

    a = sub.add_parser("analyze", help="analyze a mono WAV file")
    a.add_argument("input", help="PCM16 or float32 mono WAV")
    common(a)
    a.add_argument("--variant", choices=("H", "T"))
    a.add_argument("--no-refine", action="store_true", help="report the initial estimate only")
    a.add_argument("--emit-maps", action="store_true", help="also write maps.json")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("synth", help="synthesize a test signal and its F0 truth")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--f0", type=float, default=120.0, help="mean F0 (Hz)")
    s.add_argument("--depth-cents", type=float, default=0.0, help="peak-to-peak FM depth")
    s.add_argument("--mod-hz", type=float, default=0.0, help="modulation frequency")
    s.add_argument("--harmonics", type=int, default=10)
    s.add_argument("--slope-db", type=float, default=-6.0, help="harmonic slope (dB/octave)")
    s.add_argument("--duration", type=float, default=3.0)
    s.add_argument("--sample-rate", type=float, default=22050.0)
    s.add_argument("--snr-db", type=float, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)

    f = sub.add_parser("fmtf", help="FM battery: transfer function and RMS error per chain")
    common(f)
    f.add_argument("--mod-hz", type=float, nargs="+", default=list(DEFAULT_MOD_FREQS))
    f.add_argument("--f0", type=float, default=120.0)
    f.add_argument("--depth-cents", type=float, default=100.0)
    f.add_argument("--snr-db", type=float, default=100.0)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--duration", type=float, default=3.0)
    f.add_argument("--no-refine", action="store_true")
    f.add_argument("--check", action="store_true", help="apply the acceptance thresholds")
    f.set_defaults(func=cmd_fmtf)

    w = sub.add_parser("snr-sweep", help="constant-F0 battery over SNR")
    common(w)
    w.add_argument("--snr-db", type=float, nargs="+", default=list(DEFAULT_SNRS))
    w.add_argument("--seeds", type=int, nargs="+", help="noise seeds (default: config seeds)")
    w.add_argument("--f0", type=float, default=120.0)
    w.add_argument("--duration", type=float, default=3.0)
    w.add_argument("--no-refine", action="store_true")
    w.add_argument("--check", action="store_true", help="apply the acceptance thresholds")
    w.set_defaults(func=cmd_snr_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"yangsaf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParameterError, AudioIOError, OSError) as exc:
        print(f"yangsaf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
