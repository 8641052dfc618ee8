"""WAV input/output and the fixed-format CSV writers used by the CLI."""
from __future__ import annotations

import csv
import json
import math
import os
import struct
import tempfile
import warnings
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .signal_core import AudioBuffer

CSV_DIGITS = 9


class AudioIOError(OSError):
    """Unreadable, malformed or unsupported audio file."""


def _riff_problem(path: Path) -> str:
    """Locate the first structural defect of a RIFF/WAVE file, as ``"offset N: ..."``."""
    data = path.read_bytes()
    if len(data) < 12:
        return f"offset 0: file is {len(data)} bytes, shorter than a RIFF header"
    if data[0:4] not in (b"RIFF", b"RIFX"):
        return f"offset 0: expected 'RIFF', found {data[0:4]!r}"
    if data[8:12] != b"WAVE":
        return f"offset 8: expected 'WAVE', found {data[8:12]!r}"
    pos, seen = 12, set()
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack("<I", data[pos + 4:pos + 8])
        if pos + 8 + size > len(data):
            return (f"offset {pos}: chunk {cid!r} declares {size} bytes but only "
                    f"{len(data) - pos - 8} remain")
        seen.add(cid)
        pos += 8 + size + (size & 1)
    if b"fmt " not in seen:
        return f"offset {pos}: no 'fmt ' chunk"
    if b"data" not in seen:
        return f"offset {pos}: no 'data' chunk"
    return f"offset {pos}: unsupported encoding"


def read_wav(path) -> AudioBuffer:
    """Read a mono PCM16 or float32 WAV file.

    PCM16 is scaled to [-1, 1).  Other sample formats and multi-channel
    files are rejected with :class:`AudioIOError`.
    """
    path = Path(path)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", wavfile.WavFileWarning)
            rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise AudioIOError(f"{path}: no such file") from None
    except (ValueError, struct.error, EOFError) as exc:
        raise AudioIOError(f"{path}: malformed WAV at {_riff_problem(path)} ({exc})") from None
    # scipy returns the samples it could read from a short data chunk
    short = [w for w in caught if "prematurely" in str(w.message)]
    if short:
        raise AudioIOError(f"{path}: malformed WAV at {_riff_problem(path)} ({short[0].message})")
    if data.ndim != 1:
        raise AudioIOError(f"{path}: {data.shape[1]} channels; only mono input is supported")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise AudioIOError(f"{path}: sample format {data.dtype} is not PCM16 or float32")
    if samples.size == 0:
        raise AudioIOError(f"{path}: no samples")
    if not np.all(np.isfinite(samples)):
        raise AudioIOError(f"{path}: non-finite samples")
    return AudioBuffer(samples, float(rate))


def _atomic_write(path: Path, write):
    """Write through a temporary file in the target directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".part")
    os.close(fd)
    try:
        write(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_wav(path, audio: AudioBuffer):
    """Write float32 mono WAV."""
    if int(audio.sample_rate) != audio.sample_rate:
        raise AudioIOError(f"sample rate {audio.sample_rate} is not an integer")
    _atomic_write(path, lambda tmp: wavfile.write(tmp, int(audio.sample_rate),
                                                 audio.samples.astype(np.float32)))


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return format(v, f".{CSV_DIGITS}g")


def write_csv(path, header, rows):
    """CSV with a fixed column order and 9 significant digits."""
    def write(tmp):
        with open(tmp, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([format_value(v) for v in row])
    _atomic_write(path, write)


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    return header, np.array(rows, dtype=float).reshape(-1, len(header))


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (float, np.floating)):
        return None if not math.isfinite(obj) else float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_text(path, text: str):
    def write(tmp):
        with open(tmp, "w") as fh:
            fh.write(text)
    _atomic_write(path, write)


def write_json(path, obj):
    write_text(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
