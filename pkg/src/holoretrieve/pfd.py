"""PFD: a minimal bit-exact container for real images and complex fields.

Layout (little-endian)::

    magic     4 bytes  b"PFD1"
    version   u32
    width     u32
    height    u32
    channels  u32      1 = real, 2 = complex interleaved (re, im)
    dtype     u32      0 = float32, 1 = float64
    pixel_size f64     meters
    payload   row-major samples, exactly width*height*channels values
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .field import ComplexField, RealImage

MAGIC = b"PFD1"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIId")
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


class PfdFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PfdFile:
    """Raw file contents; ``samples`` has shape ``(height, width, channels)`` in the stored dtype."""

    samples: np.ndarray
    pixel_size: float
    dtype_code: int = 1

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def channels(self) -> int:
        return self.samples.shape[2]

    def to_bytes(self) -> bytes:
        if self.dtype_code not in _DTYPES:
            raise PfdFormatError(f"unknown dtype code {self.dtype_code}")
        if self.channels not in (1, 2):
            raise PfdFormatError(f"channels must be 1 or 2, got {self.channels}")
        head = _HEADER.pack(MAGIC, VERSION, self.width, self.height, self.channels, self.dtype_code, self.pixel_size)
        payload = np.ascontiguousarray(self.samples, dtype=_DTYPES[self.dtype_code])
        return head + payload.tobytes()

    @classmethod
    def from_bytes(cls, buf: bytes) -> PfdFile:
        if len(buf) < _HEADER.size:
            raise PfdFormatError("truncated header")
        magic, version, w, h, c, code, px = _HEADER.unpack_from(buf)
        if magic != MAGIC:
            raise PfdFormatError(f"bad magic {magic!r}")
        if version != VERSION:
            raise PfdFormatError(f"unsupported version {version}")
        if code not in _DTYPES or c not in (1, 2):
            raise PfdFormatError(f"bad dtype code {code} or channel count {c}")
        dt = _DTYPES[code]
        expected = w * h * c * dt.itemsize
        if len(buf) - _HEADER.size != expected:
            raise PfdFormatError(f"payload is {len(buf) - _HEADER.size} bytes, expected {expected}")
        samples = np.frombuffer(buf, dtype=dt, offset=_HEADER.size).reshape(h, w, c)
        return cls(samples, px, code)

    def to_field(self) -> ComplexField | RealImage:
        s = self.samples.astype(np.float64)
        if self.channels == 2:
            return ComplexField(s[..., 0] + 1j * s[..., 1], self.pixel_size)
        return RealImage(s[..., 0], self.pixel_size)


def from_field(f: ComplexField | RealImage | np.ndarray, pixel_size: float | None = None,
               dtype_code: int = 1) -> PfdFile:
    if isinstance(f, ComplexField):
        samples = np.stack([f.data.real, f.data.imag], axis=-1)
        pixel_size = f.pixel_size
    elif isinstance(f, RealImage):
        samples = f.data[..., None]
        pixel_size = f.pixel_size
    else:
        arr = np.asarray(f)
        if pixel_size is None:
            raise ValueError("pixel_size required for raw arrays")
        if np.iscomplexobj(arr):
            samples = np.stack([arr.real, arr.imag], axis=-1)
        else:
            samples = arr[..., None]
    return PfdFile(samples.astype(_DTYPES[dtype_code]), float(pixel_size), dtype_code)


def atomic_write(path: str | Path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def save(path: str | Path, f: ComplexField | RealImage | PfdFile, dtype_code: int = 1) -> None:
    pf = f if isinstance(f, PfdFile) else from_field(f, dtype_code=dtype_code)
    try:
        atomic_write(path, pf.to_bytes())
    except OSError as e:
        raise OSError(f"cannot write {path}: {e}") from e


def read(path: str | Path) -> PfdFile:
    try:
        buf = Path(path).read_bytes()
    except OSError as e:
        raise OSError(f"cannot read {path}: {e}") from e
    try:
        return PfdFile.from_bytes(buf)
    except PfdFormatError as e:
        raise PfdFormatError(f"{path}: {e}") from e


def load(path: str | Path) -> ComplexField | RealImage:
    return read(path).to_field()
