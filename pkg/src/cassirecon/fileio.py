"""Binary artifact formats. All integers u32 little-endian, payloads float32.

  CubeFile  "MSIC" | version=1 | H | W | B | B x f32 wavelengths | H*W*B f32 band-major
  MaskFile  "MASK" | version=1 | H | W | H*W f32
  MeasFile  "MEAS" | version=1 | H | W' | u32 shift_step | f32 noise_sigma | H*W' f32

Round trips are lossless at 32-bit precision.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .core import CodedMask, Measurement, SpectralCube
from .exceptions import FormatError

CUBE_MAGIC = b"MSIC"
MASK_MAGIC = b"MASK"
MEAS_MAGIC = b"MEAS"
FORMAT_VERSION = 1

_MAX_DIM = 1 << 20  # dimension sanity bound against corrupt headers


class _Reader:
    def __init__(self, path):
        self.path = Path(path)
        try:
            self.buf = self.path.read_bytes()
        except OSError as exc:
            raise FormatError(f"cannot read {path}: {exc}") from exc
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise FormatError(
                f"{self.path}: truncated file (expected {self.pos + n} bytes, have {len(self.buf)})"
            )
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def magic(self, expected: bytes) -> None:
        got = self.take(4)
        if got != expected:
            raise FormatError(f"{self.path}: bad magic {got!r}, expected {expected!r}")
        (version,) = struct.unpack("<I", self.take(4))
        if version != FORMAT_VERSION:
            raise FormatError(f"{self.path}: unsupported version {version}")

    def u32(self) -> int:
        (v,) = struct.unpack("<I", self.take(4))
        return v

    def f32(self) -> float:
        (v,) = struct.unpack("<f", self.take(4))
        return v

    def dim(self, name: str) -> int:
        v = self.u32()
        if not 1 <= v <= _MAX_DIM:
            raise FormatError(f"{self.path}: {name}={v} out of sane range")
        return v

    def f32_array(self, count: int) -> np.ndarray:
        raw = self.take(count * 4)
        return np.frombuffer(raw, dtype="<f4").astype(np.float64)

    def done(self) -> None:
        if self.pos != len(self.buf):
            raise FormatError(
                f"{self.path}: {len(self.buf) - self.pos} trailing bytes after payload"
            )


def _header(magic: bytes) -> bytes:
    return magic + struct.pack("<I", FORMAT_VERSION)


def write_cube(cube: SpectralCube, path) -> None:
    parts = [
        _header(CUBE_MAGIC),
        struct.pack("<III", cube.height, cube.width, cube.bands),
        np.asarray(cube.wavelengths, dtype="<f4").tobytes(),
        np.ascontiguousarray(cube.data, dtype="<f4").tobytes(),
    ]
    Path(path).write_bytes(b"".join(parts))


def read_cube(path) -> SpectralCube:
    r = _Reader(path)
    r.magic(CUBE_MAGIC)
    h, w, b = r.dim("H"), r.dim("W"), r.dim("B")
    wavelengths = r.f32_array(b)
    data = r.f32_array(h * w * b).reshape(b, h, w)
    r.done()
    return SpectralCube(data, wavelengths)


def write_mask(mask: CodedMask, path) -> None:
    parts = [
        _header(MASK_MAGIC),
        struct.pack("<II", mask.height, mask.width),
        np.ascontiguousarray(mask.data, dtype="<f4").tobytes(),
    ]
    Path(path).write_bytes(b"".join(parts))


def read_mask(path) -> CodedMask:
    r = _Reader(path)
    r.magic(MASK_MAGIC)
    h, w = r.dim("H"), r.dim("W")
    data = r.f32_array(h * w).reshape(h, w)
    r.done()
    return CodedMask(data)


def write_measurement(meas: Measurement, path) -> None:
    parts = [
        _header(MEAS_MAGIC),
        struct.pack("<II", meas.height, meas.width),
        struct.pack("<I", meas.shift_step),
        struct.pack("<f", meas.noise_sigma),
        np.ascontiguousarray(meas.data, dtype="<f4").tobytes(),
    ]
    Path(path).write_bytes(b"".join(parts))


def read_measurement(path) -> Measurement:
    r = _Reader(path)
    r.magic(MEAS_MAGIC)
    h, w = r.dim("H"), r.dim("W")
    d = r.u32()
    sigma = r.f32()
    data = r.f32_array(h * w).reshape(h, w)
    r.done()
    return Measurement(data, d, sigma)
