"""Snapshot dump formats.

Field dumps come in two interchangeable flavors:

  * CSV with header  t,node_index_1[,node_index_2[,node_index_3]],rho
    (one row per node per frame), and
  * a flat binary: a 32-byte header -- magic b"TORUSFLD" (8 bytes), then
    little-endian uint32 d, M, frame count, then 12 zero pad bytes --
    followed by `count` frames, each a little-endian float64 time stamp
    and M^d little-endian float64 values in C (row-major) order.

Particle dumps are CSV with header  t,i,x_1[,x_2[,x_3]].
"""
import csv
import struct

import numpy as np

from .errors import DumpFormatError

FIELD_MAGIC = b"TORUSFLD"
_HEADER = struct.Struct("<8sIII12x")
assert _HEADER.size == 32


def write_field_dump(path, d, M, times, frames):
    """Write the flat binary field dump."""
    times = np.asarray(times, dtype="<f8")
    if len(times) != len(frames):
        raise ValueError("one time stamp per frame required")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FIELD_MAGIC, d, M, len(frames)))
        for t, frame in zip(times, frames):
            frame = np.ascontiguousarray(frame, dtype="<f8")
            if frame.size != M**d:
                raise ValueError(f"frame has {frame.size} values, expected {M**d}")
            fh.write(struct.pack("<d", float(t)))
            fh.write(frame.tobytes())


def read_field_dump(path):
    """Read the flat binary field dump -> (d, M, times, values (count, M^d))."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise DumpFormatError(f"{path}: truncated header")
        magic, d, M, count = _HEADER.unpack(header)
        if magic != FIELD_MAGIC:
            raise DumpFormatError(f"{path}: unknown dump header {magic!r}")
        times = np.empty(count)
        values = np.empty((count, M**d))
        for c in range(count):
            raw = fh.read(8 + 8 * M**d)
            if len(raw) != 8 + 8 * M**d:
                raise DumpFormatError(f"{path}: truncated frame {c}")
            times[c] = struct.unpack("<d", raw[:8])[0]
            values[c] = np.frombuffer(raw[8:], dtype="<f8")
    return d, M, times, values


def write_field_csv(path, d, M, times, frames):
    """Write the CSV field dump (one row per node per frame)."""
    index_cols = [f"node_index_{a + 1}" for a in range(d)]
    grids = np.meshgrid(*([np.arange(M)] * d), indexing="ij")
    flat_idx = [g.reshape(-1) for g in grids]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + index_cols + ["rho"])
        for t, frame in zip(times, frames):
            frame = np.asarray(frame).reshape(-1)
            for row in range(frame.size):
                w.writerow([repr(float(t))]
                           + [int(fi[row]) for fi in flat_idx]
                           + [repr(float(frame[row]))])


def read_field_csv(path):
    """Read the CSV field dump -> (d, M, times, values (count, M^d))."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if not header or header[0] != "t" or header[-1] != "rho":
            raise DumpFormatError(f"{path}: unknown CSV dump header {header!r}")
        d = len(header) - 2
        frames = {}
        max_idx = 0
        for row in r:
            t = float(row[0])
            idx = tuple(int(v) for v in row[1:-1])
            max_idx = max(max_idx, *idx)
            frames.setdefault(t, []).append((idx, float(row[-1])))
    M = max_idx + 1
    times = np.array(sorted(frames))
    values = np.empty((times.size, M**d))
    strides = [M**a for a in range(d - 1, -1, -1)]
    for c, t in enumerate(times):
        for idx, v in frames[t]:
            values[c][sum(i * s for i, s in zip(idx, strides))] = v
    return d, M, times, values


def write_particle_csv(path, d, rows):
    """Write particle positions: rows of (t, i, x_1..x_d)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "i"] + [f"x_{a + 1}" for a in range(d)])
        for t, i, x in rows:
            w.writerow([repr(float(t)), int(i)] + [repr(float(c)) for c in np.atleast_1d(x)])
