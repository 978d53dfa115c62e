"""DSWF binary snapshot format for wave fields, plus the real-field variant.

Layout (little endian throughout):

    magic 'DSWF'           4 bytes
    format version         u16   (currently 1)
    dim                    u16
    points per axis        u32 * dim
    bounds per axis        f64 pairs (lo, hi) * dim
    hbar                   f64
    mass                   f64
    frame tag              u8    (0 = laboratory, 1 = center-of-mass)
    payload                interleaved (re, im) f64, row-major

The real-field variant ('DSRF' magic, same header) carries a single f64
channel and is used for classical action/density snapshots.
"""

from __future__ import annotations

import struct

import numpy as np

from .grids import (
    FRAME_CENTER_OF_MASS,
    FRAME_LABORATORY,
    ConfigurationError,
    Grid,
    WaveField,
    make_grid,
)

MAGIC_WAVE = b"DSWF"
MAGIC_REAL = b"DSRF"
FORMAT_VERSION = 1

_FRAME_CODE = {FRAME_LABORATORY: 0, FRAME_CENTER_OF_MASS: 1}
_FRAME_NAME = {v: k for k, v in _FRAME_CODE.items()}


class FormatError(ValueError):
    """Malformed or unexpected snapshot bytes."""


def _pack_header(magic: bytes, grid: Grid, hbar: float, mass: float, frame: str) -> bytes:
    parts = [magic, struct.pack("<HH", FORMAT_VERSION, grid.dim)]
    parts.append(struct.pack(f"<{grid.dim}I", *[int(n) for n in grid.npoints]))
    for a in range(grid.dim):
        parts.append(struct.pack("<dd", float(grid.lower[a]), float(grid.upper[a])))
    parts.append(struct.pack("<ddB", float(hbar), float(mass), _FRAME_CODE[frame]))
    return b"".join(parts)


def _unpack_header(buf: bytes, expect_magic: bytes):
    if buf[:4] != expect_magic:
        raise FormatError(f"bad magic {buf[:4]!r}, expected {expect_magic!r}")
    version, dim = struct.unpack_from("<HH", buf, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")
    off = 8
    npoints = struct.unpack_from(f"<{dim}I", buf, off)
    off += 4 * dim
    bounds = []
    for _ in range(dim):
        lo, hi = struct.unpack_from("<dd", buf, off)
        bounds.append((lo, hi))
        off += 16
    hbar, mass, frame_code = struct.unpack_from("<ddB", buf, off)
    off += 17
    if frame_code not in _FRAME_NAME:
        raise FormatError(f"unknown frame code {frame_code}")
    grid = make_grid(dim, bounds, npoints)
    return grid, hbar, mass, _FRAME_NAME[frame_code], off


def dump_wave(f: WaveField) -> bytes:
    header = _pack_header(MAGIC_WAVE, f.grid, f.hbar, f.mass, f.frame)
    inter = np.empty(f.amplitudes.size * 2, dtype="<f8")
    flat = f.amplitudes.reshape(-1)
    inter[0::2] = flat.real
    inter[1::2] = flat.imag
    return header + inter.tobytes()


def load_wave(buf: bytes) -> WaveField:
    grid, hbar, mass, frame, off = _unpack_header(buf, MAGIC_WAVE)
    count = int(np.prod(grid.shape)) * 2
    payload = np.frombuffer(buf, dtype="<f8", count=count, offset=off)
    if payload.size != count:
        raise FormatError("truncated DSWF payload")
    amps = (payload[0::2] + 1j * payload[1::2]).reshape(grid.shape)
    return WaveField(grid=grid, amplitudes=amps, hbar=hbar, mass=mass, frame=frame)


def dump_real(values: np.ndarray, grid: Grid, hbar: float, mass: float,
              frame: str = FRAME_LABORATORY) -> bytes:
    if values.shape != grid.shape:
        raise ConfigurationError("value shape does not match grid")
    header = _pack_header(MAGIC_REAL, grid, hbar, mass, frame)
    return header + np.ascontiguousarray(values, dtype="<f8").tobytes()


def load_real(buf: bytes):
    grid, hbar, mass, frame, off = _unpack_header(buf, MAGIC_REAL)
    count = int(np.prod(grid.shape))
    payload = np.frombuffer(buf, dtype="<f8", count=count, offset=off)
    if payload.size != count:
        raise FormatError("truncated DSRF payload")
    return payload.reshape(grid.shape).copy(), grid, hbar, mass, frame


def write_wave(path, f: WaveField) -> None:
    with open(path, "wb") as fh:
        fh.write(dump_wave(f))


def read_wave(path) -> WaveField:
    with open(path, "rb") as fh:
        return load_wave(fh.read())
