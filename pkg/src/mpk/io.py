"""Serialization: CSV, a small binary container, PGM heatmaps and JSON reports."""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .lattice import ConfigurationError, PhaseSpaceGrid, make_grid

__all__ = [
    "MAGIC",
    "KINDS",
    "write_csv",
    "read_csv",
    "write_binary",
    "read_binary",
    "write_gabor_csv",
    "write_pgm",
    "read_pgm",
    "write_json",
    "write_norm_series",
    "file_hash",
]

MAGIC = b"MPKT"
VERSION = 1
KINDS = {"state": 0, "phase_space": 1, "symbol": 2, "operator": 3}
# magic, version, d, N, L, kind, reserved, stride_x, stride_eta
_HEADER = struct.Struct("<4sIIIdHHHH")
assert _HEADER.size == 32


def write_csv(path, values: np.ndarray) -> Path:
    """One row per entry: the index columns, then ``re`` and ``im``."""
    path = Path(path)
    v = np.asarray(values)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"i{k}" for k in range(v.ndim)] + ["re", "im"])
        for idx in np.ndindex(v.shape):
            z = complex(v[idx])
            w.writerow(list(idx) + [repr(z.real), repr(z.imag)])
    return path


def read_csv(path) -> np.ndarray:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    nidx = rows.shape[1] - 2
    idx = rows[:, :nidx].astype(int)
    shape = tuple(idx.max(axis=0) + 1)
    out = np.zeros(shape, dtype=complex)
    out[tuple(idx.T)] = rows[:, -2] + 1j * rows[:, -1]
    return out


def write_binary(path, grid: PhaseSpaceGrid, values: np.ndarray, kind: str = "state") -> Path:
    """Little-endian float64 (re, im) pairs after a 32-byte header."""
    if kind not in KINDS:
        raise ConfigurationError(f"unknown payload kind {kind!r}")
    path = Path(path)
    v = np.ascontiguousarray(values, dtype="<c16")
    head = _HEADER.pack(MAGIC, VERSION, grid.d, grid.N, float(grid.L), KINDS[kind], 0, *grid.stride)
    with path.open("wb") as fh:
        fh.write(head)
        fh.write(v.tobytes())
    return path


def read_binary(path):
    """Returns ``(grid, values, kind)``; the payload shape follows from ``kind``."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ConfigurationError("file too short for header")
    magic, version, d, N, L, kind, _, sx, se = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ConfigurationError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ConfigurationError(f"unsupported version {version}")
    grid = make_grid(d, N, L, (sx, se))
    data = np.frombuffer(raw[_HEADER.size :], dtype="<c16").copy()
    name = {v: k for k, v in KINDS.items()}[kind]
    shape = {
        "state": (N,),
        "phase_space": grid.shape,
        "symbol": (2 * N, N),
        "operator": (N, N),
    }[name]
    if data.size != int(np.prod(shape)):
        raise ConfigurationError(f"payload of {data.size} values does not match {name} shape {shape}")
    return grid, data.reshape(shape), name


def write_gabor_csv(path, K: np.ndarray) -> Path:
    """Columns ``w, z, abs, arg`` over flattened lattice indices."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["w", "z", "abs", "arg"])
        mag, ang = np.abs(K), np.angle(K)
        for i in range(K.shape[0]):
            for j in range(K.shape[1]):
                w.writerow([i, j, repr(float(mag[i, j])), repr(float(ang[i, j]))])
    return path


def write_pgm(path, K: np.ndarray, lo: float = -12.0, hi: float = 0.0) -> Path:
    """8-bit binary PGM of ``log10 |K|`` clipped to ``[lo, hi]``, row-major."""
    path = Path(path)
    with np.errstate(divide="ignore"):
        L = np.log10(np.abs(K))
    L = np.clip(np.nan_to_num(L, neginf=lo), lo, hi)
    img = np.rint((L - lo) / (hi - lo) * 255).astype(np.uint8)
    h, w = img.shape
    with path.open("wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(img.tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ConfigurationError("not a binary PGM")
    w, h = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def write_json(path, data: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
    return path


def write_norm_series(path, series) -> Path:
    """Columns ``t, p, s, norm, ratio``."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "p", "s", "norm", "ratio"])
        for t, p, s, n, r in series.rows():
            w.writerow([repr(t), "inf" if p == np.inf else repr(float(p)), repr(float(s)), repr(n), repr(r)])
    return path


def file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
