"""CSV, PGM and sequence file helpers."""

from __future__ import annotations

import csv
import hashlib
import json
import re
from pathlib import Path

import numpy as np

from .pnseq import PnSequence
from .waveform import SampledWaveform


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_sequence(path, seq: PnSequence) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "value"])
        for k, v in enumerate(seq.values):
            w.writerow([k, v])


def read_sequence(path) -> PnSequence:
    """Read a code written by ``gen-seq``: one integer per line, or a ``k,value`` CSV."""
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty sequence file")
    if "," in lines[0]:
        header = [c.strip() for c in lines[0].split(",")]
        col = header.index("value") if "value" in header else len(header) - 1
        body = lines[1:] if not _is_int(header[col]) else lines
        values = [int(ln.split(",")[col]) for ln in body]
    else:
        values = [int(ln) for ln in lines]
    return PnSequence.from_values(values)


def _is_int(s: str) -> bool:
    try:
        int(s)
    except ValueError:
        return False
    return True


def write_waveform_csv(path, w: SampledWaveform, column: str = "amplitude") -> None:
    data = np.column_stack([w.times, w.samples])
    np.savetxt(path, data, delimiter=",", header=f"t_seconds,{column}", comments="",
               fmt="%.17g")


def read_waveform_csv(path, sample_rate: float | None = None) -> SampledWaveform:
    """Read ``t_seconds,amplitude``; the rate comes from the time column unless given."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] < 2:
        raise ValueError(f"{path}: expected columns t_seconds,amplitude")
    t, y = data[:, 0], data[:, 1]
    if sample_rate is None:
        if t.size < 2:
            raise ValueError(f"{path}: cannot infer a sample rate from one sample")
        sample_rate = (t.size - 1) / (t[-1] - t[0])
    else:
        if t.size >= 2:
            inferred = (t.size - 1) / (t[-1] - t[0])
            if abs(inferred - sample_rate) > 1e-6 * sample_rate:
                raise ValueError(
                    f"{path}: time column implies {inferred:g} Sa/s, expected {sample_rate:g}"
                )
    return SampledWaveform(y, sample_rate, Path(path).stem)


def write_matrix_csv(path, values: np.ndarray) -> None:
    np.savetxt(path, np.asarray(values), delimiter=",", fmt="%.17g")


def write_pgm16(path, values: np.ndarray) -> dict:
    """
    16-bit binary PGM (P5, big-endian words), min-max scaled; row 0 is ``values[0]``.

    Returns:
        The scaling record, ``value = min + code * scale``.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 2:
        raise ValueError("PGM image must be 2-D")
    lo, hi = float(v.min()), float(v.max())
    scale = (hi - lo) / 65535.0 if hi > lo else 0.0
    codes = np.zeros(v.shape) if scale == 0 else np.round((v - lo) / scale)
    codes = np.clip(codes, 0, 65535).astype(">u2")
    ny, nx = v.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n65535\n".encode("ascii"))
        fh.write(codes.tobytes())
    return {"min": lo, "max": hi, "scale": scale, "width": nx, "height": ny}


def read_pgm16(path) -> np.ndarray:
    data = Path(path).read_bytes()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if m is None:
        raise ValueError(f"{path}: not a binary PGM")
    nx, ny, maxval = (int(g) for g in m.groups())
    if maxval != 65535:
        raise ValueError(f"{path}: expected 16-bit PGM")
    return np.frombuffer(data[m.end(): m.end() + nx * ny * 2], dtype=">u2").reshape(ny, nx)


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
