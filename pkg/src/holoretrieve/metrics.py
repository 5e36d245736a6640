"""Reconstruction quality metrics: L2, DSSIM and FRCM, plus the FRC curve.

Complex inputs are compared channelwise for L2 and DSSIM. The FRC of a
complex field uses its DFT directly and keeps the real part of the
normalized ring cross-correlation, so a sign-flipped (twin-like)
reconstruction scores -1.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .field import ComplexField, RealImage, ShapeError


def _as_array(x) -> np.ndarray:
    if isinstance(x, (ComplexField, RealImage)):
        return x.data
    return np.asarray(x)


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a, b = _as_array(a), _as_array(b)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    if np.iscomplexobj(a) != np.iscomplexobj(b):
        raise ShapeError("cannot compare a complex field with a real image")
    return a, b


def _channels(x: np.ndarray) -> list[np.ndarray]:
    if np.iscomplexobj(x):
        return [x.real, x.imag]
    return [x.astype(np.float64)]


def l2_metric(a, b) -> float:
    """Mean squared difference over pixels (and real/imag channels)."""
    a, b = _pair(a, b)
    d = a - b
    if np.iscomplexobj(d):
        return float(np.mean(np.stack([d.real**2, d.imag**2])))
    return float(np.mean(d.astype(np.float64) ** 2))


# --- SSIM -----------------------------------------------------------------------

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


def _gauss_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2
    g = np.exp(-(r**2) / (2 * sigma**2))
    return g / g.sum()


def _filter_valid(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    # separable correlation restricted to windows fully inside the image
    n = len(g)
    rows = sum(g[i] * x[i : x.shape[0] - n + 1 + i, :] for i in range(n))
    return sum(g[j] * rows[:, j : x.shape[1] - n + 1 + j] for j in range(n))


def ssim(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> float:
    """Mean SSIM over all fully-contained 11x11 Gaussian windows (sigma 1.5)."""
    if min(a.shape) < SSIM_WINDOW:
        raise ShapeError(f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.shape}")
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    g = _gauss_window()
    mu_a = _filter_valid(a, g)
    mu_b = _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a**2
    var_b = _filter_valid(b * b, g) - mu_b**2
    cov = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def _dssim_real(a: np.ndarray, b: np.ndarray) -> float:
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if hi - lo == 0:
        return 0.0
    a = (a - lo) / (hi - lo)
    b = (b - lo) / (hi - lo)
    return (1.0 - ssim(a, b, 1.0)) / 2.0


def dssim(a, b) -> float:
    """Structural dissimilarity ``(1 - SSIM) / 2`` after joint min/max rescaling to [0, 1]."""
    a, b = _pair(a, b)
    vals = [_dssim_real(x, y) for x, y in zip(_channels(a), _channels(b))]
    return float(np.mean(vals))


# --- Fourier ring correlation ---------------------------------------------------------


@lru_cache(maxsize=32)
def ring_indices(height: int, width: int) -> tuple[np.ndarray, int]:
    """Integer ring index per DFT bin (-1 beyond the last ring) and the ring count.

    Radii are measured in units of the fundamental frequency of the shorter
    side and rounded to the nearest integer.
    """
    m = min(height, width)
    fy = np.fft.fftfreq(height) * m
    fx = np.fft.fftfreq(width) * m
    r = np.rint(np.hypot(fy[:, None], fx[None, :])).astype(np.int64)
    n_rings = m // 2 + 1
    r[r >= n_rings] = -1
    r.setflags(write=False)
    return r, n_rings


@dataclass
class FrcCurve:
    ring_values: np.ndarray
    ring_counts: np.ndarray
    # True where both inputs carry no power in the ring
    undefined: np.ndarray

    @property
    def valid(self) -> np.ndarray:
        return (self.ring_counts > 0) & ~self.undefined


def _unit_peak(x: np.ndarray) -> np.ndarray:
    peak = np.max(np.abs(x))
    return x / peak if peak > 0 else x


def frc(a, b) -> FrcCurve:
    a, b = _pair(a, b)
    if a.ndim != 2:
        raise ShapeError("FRC needs 2D inputs")
    idx, n_rings = ring_indices(*a.shape)
    # FRC is invariant to positive rescaling; normalizing avoids power underflow
    fa = np.fft.fft2(_unit_peak(a))
    fb = np.fft.fft2(_unit_peak(b))
    keep = idx >= 0
    ring = idx[keep]
    cross = np.bincount(ring, (fa * np.conj(fb)).real[keep], minlength=n_rings)
    # same arithmetic as the cross term so that frc(a, a) is exactly 1
    pa = np.bincount(ring, (fa * np.conj(fa)).real[keep], minlength=n_rings)
    pb = np.bincount(ring, (fb * np.conj(fb)).real[keep], minlength=n_rings)
    counts = np.bincount(ring, minlength=n_rings)
    den = np.sqrt(pa * pb)
    values = np.zeros(n_rings)
    np.divide(cross, den, out=values, where=den > 0)
    undefined = (pa == 0) & (pb == 0)
    return FrcCurve(values, counts, undefined)


def frcm(a, b) -> float:
    """Mean over populated, defined rings of ``(1 - FRC)^2``."""
    curve = frc(a, b)
    v = curve.ring_values[curve.valid]
    if v.size == 0:
        return 0.0
    return float(np.mean((1.0 - v) ** 2))


# --- aggregation ------------------------------------------------------------------------


@dataclass
class FrameMetrics:
    index: int
    l2: float
    dssim: float
    frcm: float


@dataclass
class MetricReport:
    frames: list[FrameMetrics]
    mean: dict[str, float]
    config: dict = field(default_factory=dict)

    @property
    def l2(self) -> float:
        return self.mean["l2"]

    @property
    def dssim(self) -> float:
        return self.mean["dssim"]

    @property
    def frcm(self) -> float:
        return self.mean["frcm"]

    def to_dict(self) -> dict:
        return {"frames": [asdict(f) for f in self.frames], "mean": dict(self.mean), "config": self.config}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


class IndexMismatchError(ValueError):
    pass


def evaluate(reconstructions: Sequence, references: Sequence, config: dict | None = None) -> MetricReport:
    """Per-frame metrics for index-aligned sequences, with means summed in index order."""
    if len(reconstructions) != len(references):
        raise IndexMismatchError(f"{len(reconstructions)} reconstructions vs {len(references)} references")
    if not reconstructions:
        raise IndexMismatchError("no frames to evaluate")
    frames = [
        FrameMetrics(i, l2_metric(r, t), dssim(r, t), frcm(r, t))
        for i, (r, t) in enumerate(zip(reconstructions, references))
    ]
    n = len(frames)
    mean = {}
    for key in ("l2", "dssim", "frcm"):
        total = 0.0
        for f in frames:
            total += getattr(f, key)
        mean[key] = total / n
    for key, value in mean.items():
        if not math.isfinite(value):
            raise ValueError(f"non-finite mean {key}")
    return MetricReport(frames, mean, config or {})
