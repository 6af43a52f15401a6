"""Readers for the documented study artifact formats.

These re-implement the published file contracts (rates.csv, replicas.csv,
summary.json, and the flat binary field dump with its 32-byte header) so
the figure tool depends only on files, never on the simulation package.
"""
import csv
import json
import struct
from pathlib import Path

import numpy as np

FIELD_MAGIC = b"TORUSFLD"
_HEADER = struct.Struct("<8sIII12x")

RATES_COLUMNS = ["N", "m", "estimate", "ci_lo", "ci_hi", "init_term"]
REPLICAS_COLUMNS = ["N", "seed", "sup_lq", "cutoff_ok", "kr0"]
SUMMARY_KEYS = ["slope", "slope_ci", "kappa_predicted", "beta", "d", "q"]


class SchemaError(ValueError):
    """Input file does not match the documented artifact schema."""


def read_rates(path):
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"missing {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RATES_COLUMNS:
            raise SchemaError(
                f"{path}: expected columns {RATES_COLUMNS}, got {header}"
            )
        rows = [row for row in reader if row]
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    out = {
        "N": np.array([int(r[0]) for r in rows]),
        "m": float(rows[0][1]),
    }
    for j, name in enumerate(RATES_COLUMNS[2:], start=2):
        out[name] = np.array([float(r[j]) for r in rows])
    if np.any(out["estimate"] <= 0):
        raise SchemaError(f"{path}: estimates must be positive")
    return out


def read_replicas(path):
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"missing {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != REPLICAS_COLUMNS:
            raise SchemaError(
                f"{path}: expected columns {REPLICAS_COLUMNS}, got {header}"
            )
        rows = [row for row in reader if row]
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return {
        "N": np.array([int(r[0]) for r in rows]),
        "seed": np.array([int(r[1]) for r in rows]),
        "sup_lq": np.array([float(r[2]) for r in rows]),
        "cutoff_ok": np.array([bool(int(r[3])) for r in rows]),
        "kr0": np.array([float(r[4]) for r in rows]),
    }


def read_summary(path):
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"missing {path}")
    with open(path) as fh:
        summary = json.load(fh)
    missing = [k for k in SUMMARY_KEYS if k not in summary]
    if missing:
        raise SchemaError(f"{path}: summary is missing keys {missing}")
    return summary


def read_field_dump(path):
    """Flat binary dump -> (d, M, times, frames (count, M^d))."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"missing {path}")
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise SchemaError(f"{path}: truncated header")
        magic, d, M, count = _HEADER.unpack(raw)
        if magic != FIELD_MAGIC:
            raise SchemaError(f"{path}: unknown dump header {magic!r}")
        times = np.empty(count)
        frames = np.empty((count, M**d))
        frame_bytes = 8 * M**d
        for c in range(count):
            chunk = fh.read(8 + frame_bytes)
            if len(chunk) != 8 + frame_bytes:
                raise SchemaError(f"{path}: truncated frame {c}")
            times[c] = struct.unpack("<d", chunk[:8])[0]
            frames[c] = np.frombuffer(chunk[8:], dtype="<f8")
    return d, M, times, frames


def read_field_csv(path):
    """CSV dump (t, node_index_1..d, rho) -> (d, M, times, frames)."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "t" or header[-1] != "rho":
            raise SchemaError(f"{path}: unknown CSV dump header {header}")
        d = len(header) - 2
        by_time = {}
        max_idx = 0
        for row in reader:
            if not row:
                continue
            t = float(row[0])
            idx = tuple(int(v) for v in row[1:-1])
            max_idx = max(max_idx, *idx)
            by_time.setdefault(t, []).append((idx, float(row[-1])))
    M = max_idx + 1
    times = np.array(sorted(by_time))
    frames = np.zeros((times.size, M**d))
    strides = [M**a for a in range(d - 1, -1, -1)]
    for c, t in enumerate(times):
        for idx, v in by_time[t]:
            frames[c][sum(i * s for i, s in zip(idx, strides))] = v
    return d, M, times, frames
