"""Synthetic inline holograms of random rectangle/circle phantoms.

Objects follow the projection approximation with complex refractive index
``n = 1 - delta + j*beta``; the vacuum phase term is dropped, so a thickness
``t`` gives amplitude ``exp(-k*beta*t)`` and phase ``-k*delta*t``.
Holograms add a smooth random illumination (flat field), Fresnel
propagation and Poisson photon noise.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from . import pfd
from .field import ComplexField, OpticsConfig, RealImage, check_same_grid
from .optics import forward_intensity

FORMAT_VERSION = 1

# seed streams derived from the dataset seed
_STREAM_OBJECT = 0
_STREAM_HOLOGRAM = 1
_STREAM_FLAT = 2
_STREAM_NOISE = 3


@dataclass(frozen=True)
class MaterialSpec:
    delta: float = 1e-3
    beta: float = 1e-6

    def __post_init__(self) -> None:
        if self.delta < 0 or self.beta < 0:
            raise ValueError("delta and beta must be nonnegative")


@dataclass(frozen=True)
class ShapeSpec:
    kind: Literal["rectangle", "circle"]
    center: tuple[float, float]  # (x, y) in pixels
    half_extents: tuple[float, float]  # circle: (radius, radius)
    thickness: float

    def covers(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        cx, cy = self.center
        if self.kind == "rectangle":
            return (np.abs(x - cx) <= self.half_extents[0]) & (np.abs(y - cy) <= self.half_extents[1])
        r = self.half_extents[0]
        return (x - cx) ** 2 + (y - cy) ** 2 <= r * r


@dataclass(frozen=True)
class SceneParams:
    n_max: int = 25
    t_max: float = 1e-8
    frame: int = 256
    pixel_size: float = 1e-6
    min_extent: float = 4.0
    max_extent: float | None = None  # None: frame / 4

    def __post_init__(self) -> None:
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if self.frame < 2:
            raise ValueError("frame must be >= 2")
        if not self.min_extent > 0:
            raise ValueError("min_extent must be positive")
        if self.max_extent is not None and self.max_extent < self.min_extent:
            raise ValueError("max_extent must be >= min_extent")

    @property
    def extent_range(self) -> tuple[float, float]:
        # small frames: frame / 4 may fall below min_extent
        hi = max(self.frame / 4, self.min_extent) if self.max_extent is None else self.max_extent
        return float(self.min_extent), float(hi)


@dataclass(frozen=True)
class SceneSpec:
    frame: tuple[int, int]  # (height, width)
    pixel_size: float
    shapes: tuple[ShapeSpec, ...]
    seed: int


def sample_scene(seed: int, params: SceneParams = SceneParams()) -> SceneSpec:
    """Draw a random phantom; a pure function of ``(seed, params)``."""
    rng = np.random.default_rng(seed)
    lo, hi = params.extent_range
    n = int(rng.integers(1, params.n_max + 1))
    shapes = []
    for _ in range(n):
        kind = "rectangle" if rng.integers(2) == 0 else "circle"
        cx = float(rng.uniform(0, params.frame))
        cy = float(rng.uniform(0, params.frame))
        if kind == "rectangle":
            half = (float(rng.uniform(lo, hi)), float(rng.uniform(lo, hi)))
        else:
            r = float(rng.uniform(lo, hi))
            half = (r, r)
        # uniform on (0, t_max]
        t = float(params.t_max * (1.0 - rng.random()))
        shapes.append(ShapeSpec(kind, (cx, cy), half, t))
    return SceneSpec((params.frame, params.frame), params.pixel_size, tuple(shapes), seed)


def phase_clamp_thickness(material: MaterialSpec, wavelength: float) -> float:
    """Thickness at which the object phase reaches pi."""
    if material.delta == 0:
        return math.inf
    return wavelength / (2.0 * material.delta)


def render_thickness(scene: SceneSpec, max_thickness: float = math.inf) -> RealImage:
    """Sum shape thicknesses pixelwise, then clip to ``max_thickness``."""
    h, w = scene.frame
    y, x = np.mgrid[0:h, 0:w].astype(np.float64)
    t = np.zeros((h, w))
    for s in scene.shapes:
        t[s.covers(x, y)] += s.thickness
    np.minimum(t, max_thickness, out=t)
    return RealImage(t, scene.pixel_size, nonnegative=True)


def transmissivity(
    thickness: RealImage,
    material: MaterialSpec,
    wavelength: float,
    illumination: ComplexField | None = None,
) -> ComplexField:
    """Exit wave of a thin object under ``illumination`` (unit plane wave if omitted)."""
    t = thickness.data
    if np.any(t < 0):
        raise ValueError("thickness must be nonnegative")
    k = 2.0 * math.pi / wavelength
    obj = np.exp(-k * material.beta * t) * np.exp(-1j * k * material.delta * t)
    if illumination is None:
        return ComplexField(obj, thickness.pixel_size)
    check_same_grid(thickness, illumination)
    return ComplexField(illumination.data * obj, thickness.pixel_size)


# --- flat field -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FlatFieldModel:
    """Low-order cosine modes, orthonormal under the pixel sum inner product."""

    mode_images: np.ndarray  # (n_modes, height, width)
    coefficient_sigma: float
    pixel_size: float
    min_amplitude: float = 0.05

    @property
    def n_modes(self) -> int:
        return self.mode_images.shape[0]


def cosine_modes(width: int, height: int, n_modes: int = 15) -> np.ndarray:
    """DCT-II style products ``cos(pi*u*(x+1/2)/W) * cos(pi*v*(y+1/2)/H)``.

    ``(u, v) != (0, 0)``, ordered by ``u + v`` then ``u``; each normalized to
    unit L2 norm.
    """
    orders = []
    s = 1
    while len(orders) < n_modes:
        orders.extend((u, s - u) for u in range(s + 1) if u < width and s - u < height)
        s += 1
        if s > width + height:
            raise ValueError(f"grid {width}x{height} supports fewer than {n_modes} modes")
    x = (np.arange(width) + 0.5) / width
    y = (np.arange(height) + 0.5) / height
    modes = np.empty((n_modes, height, width))
    for m, (u, v) in enumerate(orders[:n_modes]):
        mode = np.outer(np.cos(math.pi * v * y), np.cos(math.pi * u * x))
        modes[m] = mode / np.linalg.norm(mode)
    return modes


def flat_field_model(
    width: int, height: int, pixel_size: float, n_modes: int = 15, coefficient_sigma: float = 0.05
) -> FlatFieldModel:
    return FlatFieldModel(cosine_modes(width, height, n_modes), coefficient_sigma, pixel_size)


def sample_flat_field(model: FlatFieldModel, seed: int) -> ComplexField:
    """Real, zero-phase illumination ``1 + sum(c_m * mode_m)``, floored at ``min_amplitude``."""
    rng = np.random.default_rng(seed)
    c = rng.normal(0.0, 1.0, model.n_modes) * model.coefficient_sigma
    amp = 1.0 + np.tensordot(c, model.mode_images, axes=1)
    np.maximum(amp, model.min_amplitude, out=amp)
    return ComplexField(amp.astype(np.complex128), model.pixel_size)


# --- detector ---------------------------------------------------------------


@dataclass(frozen=True)
class NoiseModel:
    total_photons: float = 6.6e7
    enabled: bool = True

    def __post_init__(self) -> None:
        if not self.total_photons > 0:
            raise ValueError("total_photons must be positive")


def photon_counts(expected: np.ndarray, seed: int) -> np.ndarray:
    # Philox is counter-based: the stream depends on the key only
    rng = np.random.Generator(np.random.Philox(key=seed))
    return rng.poisson(expected).astype(np.float64)


def simulate_hologram(psi: ComplexField, cfg: OpticsConfig, noise: NoiseModel, seed: int) -> RealImage:
    """Detector intensity with optional Poisson noise, returned on the noiseless intensity scale."""
    ideal = forward_intensity(psi, cfg)
    if not noise.enabled:
        return ideal
    total = float(np.sum(ideal.data))
    if total == 0:
        return ideal
    scale = noise.total_photons / total
    counts = photon_counts(ideal.data * scale, seed)
    return RealImage(counts / scale, ideal.pixel_size, nonnegative=True)


# --- datasets -----------------------------------------------------------------


@dataclass(frozen=True)
class SynthParams:
    optics: OpticsConfig = OpticsConfig(1e-10, 0.1, 1e-6)
    material: MaterialSpec = MaterialSpec()
    scene: SceneParams = SceneParams()
    flat_field_modes: int = 15
    flat_field_sigma: float = 0.05
    noise: NoiseModel = NoiseModel()
    clamp_phase: bool = True

    def to_dict(self) -> dict:
        return asdict(self)


def derive_seed(seed: int, stream: int, index: int) -> int:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(stream, index))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class FrameSeeds:
    object_scene: int
    hologram_scene: int
    flat_field: int
    noise: int


def frame_seeds(seed: int, index: int, pairing: str) -> FrameSeeds:
    obj = derive_seed(seed, _STREAM_OBJECT, index)
    holo = obj if pairing == "paired" else derive_seed(seed, _STREAM_HOLOGRAM, index)
    return FrameSeeds(obj, holo, derive_seed(seed, _STREAM_FLAT, index), derive_seed(seed, _STREAM_NOISE, index))


@dataclass
class Frame:
    obj: ComplexField  # object wave under unit illumination
    hologram: RealImage
    thickness: RealImage


def object_wave(scene_seed: int, params: SynthParams) -> tuple[ComplexField, RealImage]:
    scene = sample_scene(scene_seed, params.scene)
    cap = phase_clamp_thickness(params.material, params.optics.wavelength) if params.clamp_phase else math.inf
    t = render_thickness(scene, cap)
    return transmissivity(t, params.material, params.optics.wavelength), t


def hologram_from_scene(scene_seed: int, flat_seed: int, noise_seed: int, params: SynthParams,
                        flat: FlatFieldModel | None = None) -> RealImage:
    obj, _ = object_wave(scene_seed, params)
    if flat is None:
        n = params.scene.frame
        flat = flat_field_model(n, n, params.scene.pixel_size, params.flat_field_modes, params.flat_field_sigma)
    illum = sample_flat_field(flat, flat_seed)
    psi = obj.with_data(obj.data * illum.data)
    return simulate_hologram(psi, params.optics, params.noise, noise_seed)


def generate_dataset(
    out_dir: str | Path,
    n_frames: int,
    params: SynthParams = SynthParams(),
    seed: int = 0,
    pairing: Literal["paired", "unpaired"] = "paired",
    extra_manifest: dict | None = None,
) -> dict:
    """Write ``objects/``, ``holograms/`` and ``manifest.json`` under ``out_dir``.

    Paired frames share one scene. Unpaired frames draw objects and holograms
    from independent seed streams.
    """
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    if pairing not in ("paired", "unpaired"):
        raise ValueError(f"unknown pairing {pairing!r}")
    out = Path(out_dir)
    (out / "objects").mkdir(parents=True, exist_ok=True)
    (out / "holograms").mkdir(parents=True, exist_ok=True)

    n = params.scene.frame
    flat = flat_field_model(n, n, params.scene.pixel_size, params.flat_field_modes, params.flat_field_sigma)
    frames = []
    for i in range(n_frames):
        seeds = frame_seeds(seed, i, pairing)
        obj, _ = object_wave(seeds.object_scene, params)
        holo = hologram_from_scene(seeds.hologram_scene, seeds.flat_field, seeds.noise, params, flat)
        name = f"{i:06d}.pfd"
        pfd.save(out / "objects" / name, obj)
        pfd.save(out / "holograms" / name, holo)
        frames.append(
            {
                "index": i,
                "object": f"objects/{name}",
                "hologram": f"holograms/{name}",
                "object_scene_seed": seeds.object_scene,
                "hologram_scene_seed": seeds.hologram_scene,
                "flat_field_seed": seeds.flat_field,
                "noise_seed": seeds.noise,
            }
        )
    manifest = {
        "format_version": FORMAT_VERSION,
        "pairing": pairing,
        "n_frames": n_frames,
        "seed": seed,
        "frame_shape": [n, n],
        "params": params.to_dict(),
        "frames": frames,
    }
    if extra_manifest:
        manifest.update(extra_manifest)
    write_json(out / "manifest.json", manifest)
    return manifest


def write_json(path: Path, obj) -> None:
    try:
        Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    except OSError as e:
        raise OSError(f"cannot write {path}: {e}") from e


def load_manifest(data_dir: str | Path) -> dict:
    path = Path(data_dir) / "manifest.json"
    try:
        return json.loads(path.read_text())
    except OSError as e:
        raise OSError(f"cannot read {path}: {e}") from e
