"""Grid-based complex wavefields and real images.

Arrays are stored row-major with shape ``(height, width)``; pixel ``(0, 0)``
is the top-left corner. All physics runs in double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ShapeError(ValueError):
    """Raised when grids disagree in size, kind or pixel size."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


def _check_grid(data: np.ndarray, pixel_size: float) -> None:
    if data.ndim != 2:
        raise ShapeError(f"expected a 2D grid, got shape {data.shape}")
    h, w = data.shape
    if h < 2 or w < 2:
        raise ShapeError(f"grid must be at least 2x2, got {w}x{h}")
    if not (pixel_size > 0 and math.isfinite(pixel_size)):
        raise ValueError(f"pixel_size must be positive, got {pixel_size}")
    if not np.all(np.isfinite(data)):
        raise ValueError("grid contains non-finite values")


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Discretized complex wavefront on a square-pixel grid."""

    data: np.ndarray
    pixel_size: float

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.complex128)
        _check_grid(data, self.pixel_size)
        object.__setattr__(self, "data", _freeze(data))
        object.__setattr__(self, "pixel_size", float(self.pixel_size))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def amplitude(self) -> RealImage:
        return RealImage(np.abs(self.data), self.pixel_size)

    def phase(self) -> RealImage:
        return RealImage(np.angle(self.data), self.pixel_size)

    def with_data(self, data: np.ndarray) -> ComplexField:
        return ComplexField(data, self.pixel_size)


@dataclass(frozen=True, eq=False)
class RealImage:
    """Real 2D map: intensity, thickness or phase.

    ``nonnegative=True`` tags intensity and thickness maps and enforces
    ``data >= 0``.
    """

    data: np.ndarray
    pixel_size: float
    nonnegative: bool = field(default=False)

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        _check_grid(data, self.pixel_size)
        if self.nonnegative and np.any(data < 0):
            raise ValueError("image tagged nonnegative contains negative values")
        object.__setattr__(self, "data", _freeze(data))
        object.__setattr__(self, "pixel_size", float(self.pixel_size))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def with_data(self, data: np.ndarray, nonnegative: bool | None = None) -> RealImage:
        tag = self.nonnegative if nonnegative is None else nonnegative
        return RealImage(data, self.pixel_size, tag)


@dataclass(frozen=True)
class OpticsConfig:
    """Wavelength, propagation distance and pixel size, all in meters.

    A negative distance propagates backwards.
    """

    wavelength: float
    distance: float
    pixel_size: float

    def __post_init__(self) -> None:
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")
        if not self.pixel_size > 0:
            raise ValueError(f"pixel_size must be positive, got {self.pixel_size}")
        if not math.isfinite(self.distance):
            raise ValueError("distance must be finite")

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength

    def at_distance(self, distance: float) -> OpticsConfig:
        return OpticsConfig(self.wavelength, distance, self.pixel_size)


def check_same_grid(a, b) -> None:
    """Raise ShapeError unless ``a`` and ``b`` share dimensions and pixel size."""
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    if not math.isclose(a.pixel_size, b.pixel_size, rel_tol=1e-12):
        raise ShapeError(f"pixel size mismatch: {a.pixel_size} vs {b.pixel_size}")


def from_amp_phase(amplitude: RealImage, phase: RealImage) -> ComplexField:
    """Build ``amplitude * exp(j * phase)`` pixelwise."""
    check_same_grid(amplitude, phase)
    if np.any(amplitude.data < 0):
        raise ValueError("amplitude must be nonnegative")
    return ComplexField(amplitude.data * np.exp(1j * phase.data), amplitude.pixel_size)


def intensity(field: ComplexField) -> RealImage:
    d = field.data
    return RealImage(d.real**2 + d.imag**2, field.pixel_size, nonnegative=True)


def energy(field: ComplexField) -> float:
    d = field.data
    return float(np.sum(d.real**2 + d.imag**2))
