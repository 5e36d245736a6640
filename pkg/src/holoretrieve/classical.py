"""Non-learned baselines: single-material TIE (Paganin) retrieval, TV-L1
denoising, and Gerchberg-Saxton style alternating projections."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .field import ComplexField, OpticsConfig, RealImage, ShapeError, check_same_grid
from .optics import frequency_grid, propagate

logger = logging.getLogger(__name__)

HC_KEV_NM = 1.23984198


def wavelength_from_kev(energy_kev: float) -> float:
    """Photon wavelength in meters for an energy in keV."""
    return HC_KEV_NM / energy_kev * 1e-9


# --- Paganin ----------------------------------------------------------------------------


@dataclass(frozen=True)
class PaganinConfig:
    """Single-material retrieval parameters.

    The retrieved phase and attenuation depend only on ``delta_over_beta``;
    ``delta`` sets the thickness scale through ``mu = 2*k*beta``.
    """

    distance: float
    wavelength: float
    delta_over_beta: float = 1e3
    delta: float = 1e-3

    def __post_init__(self) -> None:
        for name in ("distance", "wavelength", "delta_over_beta", "delta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def beta(self) -> float:
        return self.delta / self.delta_over_beta

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def mu(self) -> float:
        return 2.0 * self.wavenumber * self.beta

    @classmethod
    def aps(cls, delta: float = 1e-3) -> PaganinConfig:
        """25.7 keV photons, 5 mm propagation, delta/beta = 1000."""
        return cls(distance=5e-3, wavelength=wavelength_from_kev(25.7), delta_over_beta=1e3, delta=delta)


@dataclass
class PaganinResult:
    thickness: RealImage
    phase: RealImage
    amplitude: RealImage
    n_clamped: int = 0

    def object_field(self) -> ComplexField:
        return ComplexField(self.amplitude.data * np.exp(1j * self.phase.data), self.thickness.pixel_size)


def paganin_filter(cfg: PaganinConfig, width: int, height: int, pixel_size: float) -> np.ndarray:
    fx, fy = frequency_grid(width, height, pixel_size)
    k2 = (2 * math.pi) ** 2 * (fx**2 + fy**2)
    return 1.0 / (1.0 + cfg.delta_over_beta * cfg.wavelength * cfg.distance / (4 * math.pi) * k2)


def paganin_reconstruct(image: RealImage, flat: RealImage, cfg: PaganinConfig) -> PaganinResult:
    """Thickness, phase and attenuation of a homogeneous object from one hologram."""
    check_same_grid(image, flat)
    if np.any(image.data < 0):
        raise ValueError("intensity must be nonnegative")
    if np.any(flat.data <= 0):
        raise ValueError("flat field must be positive")
    h = paganin_filter(cfg, image.width, image.height, image.pixel_size)
    filtered = np.fft.ifft2(np.fft.fft2(image.data / flat.data) * h).real
    bad = filtered <= 0
    n_bad = int(np.count_nonzero(bad))
    if n_bad:
        logger.warning("paganin: %d nonpositive filtered values clamped", n_bad)
    t = np.zeros_like(filtered)
    good = ~bad
    t[good] = np.maximum(-np.log(filtered[good]) / cfg.mu, 0.0)
    # nonpositive transmission means "infinitely thick"; cap at the largest finite value
    if n_bad:
        t[bad] = t[good].max() if good.any() else 0.0
    k = cfg.wavenumber
    px = image.pixel_size
    return PaganinResult(
        thickness=RealImage(t, px, nonnegative=True),
        phase=RealImage(-k * cfg.delta * t, px),
        amplitude=RealImage(np.exp(-k * cfg.beta * t), px, nonnegative=True),
        n_clamped=n_bad,
    )


# --- TV-L1 ------------------------------------------------------------------------------


def _grad(u: np.ndarray) -> np.ndarray:
    g = np.zeros((2,) + u.shape)
    g[0, :-1, :] = u[1:, :] - u[:-1, :]
    g[1, :, :-1] = u[:, 1:] - u[:, :-1]
    return g


def _div(p: np.ndarray) -> np.ndarray:
    # negative adjoint of _grad
    py, px = p
    d = np.zeros(py.shape)
    d[0, :] += py[0, :]
    d[1:-1, :] += py[1:-1, :] - py[:-2, :]
    d[-1, :] -= py[-2, :]
    d[:, 0] += px[:, 0]
    d[:, 1:-1] += px[:, 1:-1] - px[:, :-2]
    d[:, -1] -= px[:, -2]
    return d


def total_variation(u: np.ndarray) -> float:
    g = _grad(u)
    return float(np.sum(np.sqrt(g[0] ** 2 + g[1] ** 2)))


def tv_l1_objective(u: np.ndarray, f: np.ndarray, lam: float) -> float:
    return total_variation(u) + lam * float(np.sum(np.abs(u - f)))


@dataclass
class TVResult:
    image: RealImage
    # objective of the returned estimate after each iteration (non-increasing)
    objective: list[float] = field(default_factory=list)
    # objective of the raw primal iterate, which primal-dual steps do not keep monotone
    iterate_objective: list[float] = field(default_factory=list)


def tv_denoise_l1(img: RealImage, lam: float = 1.5, iterations: int = 100) -> TVResult:
    """Minimize ``TV(u) + lam * ||u - img||_1`` with the Chambolle-Pock primal-dual scheme.

    Isotropic TV with forward differences; steps ``tau = sigma = 1/sqrt(8)``.
    The best primal iterate seen so far is returned.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    f = img.data
    tau = sigma = 1.0 / math.sqrt(8.0)
    u = f.copy()
    ubar = u.copy()
    p = np.zeros((2,) + f.shape)
    best, best_obj = f, tv_l1_objective(f, f, lam)
    trace, raw = [], []
    for _ in range(iterations):
        p += sigma * _grad(ubar)
        p /= np.maximum(1.0, np.sqrt(p[0] ** 2 + p[1] ** 2))
        u_old = u
        v = u + tau * _div(p)
        # prox of tau*lam*|u - f|_1
        u = f + np.sign(v - f) * np.maximum(np.abs(v - f) - tau * lam, 0.0)
        ubar = 2 * u - u_old
        obj = tv_l1_objective(u, f, lam)
        raw.append(obj)
        if obj <= best_obj:
            best, best_obj = u, obj
        trace.append(best_obj)
    return TVResult(img.with_data(best), trace, raw)


# --- alternating projections ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class IterativeConfig:
    iterations: int = 200
    support: np.ndarray | None = None  # bool mask, True inside the object
    amplitude_bounds: tuple[float, float] | None = None
    relaxation: float = 1.0
    background: complex = 1.0 + 0.0j  # object-plane value outside the support

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0 < self.relaxation <= 1:
            raise ValueError("relaxation must be in (0, 1]")
        if self.amplitude_bounds is not None and self.amplitude_bounds[0] > self.amplitude_bounds[1]:
            raise ValueError("amplitude_bounds must be ordered (min, max)")


@dataclass
class RetrievalResult:
    field: ComplexField
    residuals: list[float]


def detector_projection(psi_det: np.ndarray, amplitude: np.ndarray) -> np.ndarray:
    """Replace the modulus by ``amplitude`` and keep the phase (phase 0 where the field vanishes)."""
    mag = np.abs(psi_det)
    unit = np.ones_like(psi_det)
    np.divide(psi_det, mag, out=unit, where=mag > 0)
    return amplitude * unit


def object_projection(psi: np.ndarray, cfg: IterativeConfig) -> np.ndarray:
    out = psi
    if cfg.amplitude_bounds is not None:
        lo, hi = cfg.amplitude_bounds
        mag = np.abs(out)
        clipped = np.clip(mag, lo, hi)
        unit = np.ones_like(out)
        np.divide(out, mag, out=unit, where=mag > 0)
        out = clipped * unit
    if cfg.support is not None:
        out = np.where(cfg.support, out, cfg.background)
    return out


def alternating_projection_retrieve(
    image: RealImage, cfg: OpticsConfig, it_cfg: IterativeConfig, seed: int = 0
) -> RetrievalResult:
    """Cycle between detector-modulus and object constraints.

    Starts at the detector plane from modulus ``sqrt(image)`` and uniformly
    random phase. ``residuals[i]`` is ``||(|P psi|^2 - image)||_2`` for the
    object estimate of iteration ``i`` before its detector projection. The
    returned object field is the back-propagation of the final
    detector-projected wave.
    """
    if np.any(image.data < 0):
        raise ValueError("intensity must be nonnegative")
    if it_cfg.support is not None and it_cfg.support.shape != image.shape:
        raise ShapeError(f"support shape {it_cfg.support.shape} != image shape {image.shape}")
    amp = np.sqrt(image.data)
    rng = np.random.default_rng(seed)
    det = amp * np.exp(2j * math.pi * rng.random(image.shape))
    back = cfg.at_distance(-cfg.distance)
    px = image.pixel_size
    residuals = []
    for _ in range(it_cfg.iterations):
        obj = propagate(ComplexField(det, px), back).data
        obj = obj + it_cfg.relaxation * (object_projection(obj, it_cfg) - obj)
        fwd = propagate(ComplexField(obj, px), cfg).data
        residuals.append(float(np.linalg.norm(np.abs(fwd) ** 2 - image.data)))
        det = detector_projection(fwd, amp)
    final = propagate(ComplexField(det, px), back)
    return RetrievalResult(final, residuals)
