"""Paraxial Fresnel propagation on a periodic grid.

Propagation multiplies the unnormalized forward DFT of the field by the
transfer function ``H(f) = exp(-j*pi*wavelength*z*|f|^2)`` and applies the
inverse DFT (which carries the ``1/N`` factor). The constant ``exp(j*k*z)``
is omitted. No padding is applied: boundaries are circular.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .field import ComplexField, OpticsConfig, RealImage, ShapeError, intensity

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TransferFunction:
    """Pure-phase factor sampled on the unshifted DFT frequency grid."""

    data: np.ndarray

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def frequency_grid(width: int, height: int, pixel_size: float) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(fx, fy)`` in 1/m with shape ``(height, width)``, negative frequencies wrapped."""
    fx = np.fft.fftfreq(width, d=pixel_size)
    fy = np.fft.fftfreq(height, d=pixel_size)
    return np.meshgrid(fx, fy, indexing="xy")


@lru_cache(maxsize=64)
def _transfer_data(wavelength: float, distance: float, pixel_size: float, width: int, height: int) -> np.ndarray:
    fx, fy = frequency_grid(width, height, pixel_size)
    data = np.exp(-1j * math.pi * wavelength * distance * (fx**2 + fy**2))
    data.setflags(write=False)
    return data


def transfer_function(cfg: OpticsConfig, width: int, height: int) -> TransferFunction:
    return TransferFunction(_transfer_data(cfg.wavelength, cfg.distance, cfg.pixel_size, width, height))


def propagate(field: ComplexField, cfg: OpticsConfig) -> ComplexField:
    """Advance ``field`` by ``cfg.distance`` (negative values back-propagate)."""
    if not math.isclose(field.pixel_size, cfg.pixel_size, rel_tol=1e-12):
        raise ShapeError(f"field pixel size {field.pixel_size} != optics pixel size {cfg.pixel_size}")
    h = transfer_function(cfg, field.width, field.height)
    out = np.fft.ifft2(np.fft.fft2(field.data) * h.data)
    return ComplexField(out, field.pixel_size)


def forward_intensity(field: ComplexField, cfg: OpticsConfig) -> RealImage:
    return intensity(propagate(field, cfg))


@dataclass(frozen=True)
class FresnelReport:
    sampling_ratio: float
    fresnel_number: float
    npix: int
    ok: bool
    warnings: list[str] = field(default_factory=list)


def fresnel_check(cfg: OpticsConfig, width: int) -> FresnelReport:
    """Check the transfer-function sampling criterion ``wavelength*|z|/dx^2 <= N``.

    Out-of-regime settings produce warnings in the report and the log, never
    an exception.
    """
    lz = cfg.wavelength * abs(cfg.distance)
    ratio = lz / cfg.pixel_size**2
    fresnel_number = math.inf if lz == 0 else cfg.pixel_size**2 / lz
    msgs = []
    if ratio > width:
        msgs.append(
            f"transfer function undersampled: lambda*z/dx^2 = {ratio:.4g} exceeds N = {width}; "
            "expect aliasing"
        )
    for m in msgs:
        logger.warning(m)
    return FresnelReport(ratio, fresnel_number, width, not msgs, msgs)
