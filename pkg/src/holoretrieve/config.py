"""Run configuration files (TOML or JSON) with strict key checking.

Sections and their keys::

    seed                               integer, top level
    [optics]     wavelength, distance, pixel_size
    [material]   delta, beta
    [scene]      n_max, t_max, frame, min_extent, max_extent
    [synth]      frames, pairing, flat_field_modes, flat_field_sigma,
                 total_photons, noise, clamp_phase
    [train]      fields of TrainConfig except seed (taken from the top level)
    [loss]       fields of LossWeights
    [paganin]    delta_over_beta, delta, energy_kev, distance
    [iterative]  iterations, relaxation, amplitude_min, amplitude_max
    [paths]      data, out, checkpoint, input, flat, support

Missing keys take their defaults. ``paths`` entries are used only when the
matching command-line option is absent and are left out of the resolved echo.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .classical import IterativeConfig, PaganinConfig, wavelength_from_kev
from .field import OpticsConfig
from .synth import MaterialSpec, NoiseModel, SceneParams, SynthParams
from .training.losses import LossWeights
from .training.trainer import TrainConfig


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key or file."""


_SCENE_KEYS = ("n_max", "t_max", "frame", "min_extent", "max_extent")
_SYNTH_KEYS = ("frames", "pairing", "flat_field_modes", "flat_field_sigma", "total_photons", "noise", "clamp_phase")
_TRAIN_KEYS = tuple(f.name for f in fields(TrainConfig) if f.name != "seed")
_LOSS_KEYS = tuple(f.name for f in fields(LossWeights))
_PAGANIN_KEYS = ("delta_over_beta", "delta", "energy_kev", "distance")
_ITERATIVE_KEYS = ("iterations", "relaxation", "amplitude_min", "amplitude_max")
_PATH_KEYS = ("data", "out", "checkpoint", "input", "flat", "support")

SECTIONS = {
    "optics": ("wavelength", "distance", "pixel_size"),
    "material": ("delta", "beta"),
    "scene": _SCENE_KEYS,
    "synth": _SYNTH_KEYS,
    "train": _TRAIN_KEYS,
    "loss": _LOSS_KEYS,
    "paganin": _PAGANIN_KEYS,
    "iterative": _ITERATIVE_KEYS,
    "paths": _PATH_KEYS,
}


@dataclass(frozen=True)
class PaganinSettings:
    delta_over_beta: float = 1e3
    delta: float = 1e-3
    energy_kev: float | None = None  # None: use the optics wavelength
    distance: float | None = None  # None: use the optics distance

    def resolve(self, optics: OpticsConfig, aps: bool = False) -> PaganinConfig:
        if aps:
            return PaganinConfig.aps(self.delta)
        wl = wavelength_from_kev(self.energy_kev) if self.energy_kev else optics.wavelength
        z = optics.distance if self.distance is None else self.distance
        return PaganinConfig(z, wl, self.delta_over_beta, self.delta)


@dataclass(frozen=True)
class IterativeSettings:
    iterations: int = 200
    relaxation: float = 1.0
    amplitude_min: float | None = None
    amplitude_max: float | None = None

    def resolve(self, support=None) -> IterativeConfig:
        bounds = None
        if self.amplitude_min is not None or self.amplitude_max is not None:
            lo = 0.0 if self.amplitude_min is None else self.amplitude_min
            hi = math.inf if self.amplitude_max is None else self.amplitude_max
            bounds = (lo, hi)
        return IterativeConfig(self.iterations, support, bounds, self.relaxation)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    synth: SynthParams = SynthParams()
    frames: int = 16
    pairing: str = "unpaired"
    train: TrainConfig = TrainConfig()
    loss: LossWeights = LossWeights()
    paganin: PaganinSettings = PaganinSettings()
    iterative: IterativeSettings = IterativeSettings()
    paths: dict = field(default_factory=dict)

    @property
    def optics(self) -> OpticsConfig:
        return self.synth.optics

    def to_dict(self) -> dict:
        """Resolved configuration in the same layout the loader accepts (paths omitted)."""
        s = self.synth
        scene = {k: getattr(s.scene, k) for k in _SCENE_KEYS}
        return {
            "seed": self.seed,
            "optics": asdict(s.optics),
            "material": asdict(s.material),
            "scene": scene,
            "synth": {
                "frames": self.frames,
                "pairing": self.pairing,
                "flat_field_modes": s.flat_field_modes,
                "flat_field_sigma": s.flat_field_sigma,
                "total_photons": s.noise.total_photons,
                "noise": s.noise.enabled,
                "clamp_phase": s.clamp_phase,
            },
            "train": {k: getattr(self.train, k) for k in _TRAIN_KEYS},
            "loss": asdict(self.loss),
            "paganin": asdict(self.paganin),
            "iterative": asdict(self.iterative),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _check_keys(section: str, table, allowed) -> dict:
    if not isinstance(table, dict):
        raise ConfigError(f"[{section}] must be a table")
    for k in table:
        if k not in allowed:
            raise ConfigError(f"unknown key {section}.{k}")
    return table


def from_dict(raw: dict) -> RunConfig:
    for k in raw:
        if k != "seed" and k not in SECTIONS:
            raise ConfigError(f"unknown key {k}")
    sec = {name: _check_keys(name, raw.get(name, {}), keys) for name, keys in SECTIONS.items()}
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("seed must be a non-negative integer")

    def build(section, factory, **kw):
        try:
            return factory(**kw)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"[{section}] {e}") from e

    base = SynthParams()
    optics = build("optics", OpticsConfig, **{**asdict(base.optics), **sec["optics"]})
    material = build("material", MaterialSpec, **{**asdict(base.material), **sec["material"]})
    scene = build("scene", SceneParams, **{**sec["scene"], "pixel_size": optics.pixel_size})
    sy = sec["synth"]
    noise = build("synth", NoiseModel, total_photons=sy.get("total_photons", 6.6e7), enabled=sy.get("noise", True))
    synth = SynthParams(
        optics,
        material,
        scene,
        sy.get("flat_field_modes", base.flat_field_modes),
        sy.get("flat_field_sigma", base.flat_field_sigma),
        noise,
        sy.get("clamp_phase", base.clamp_phase),
    )
    frames = sy.get("frames", 16)
    if not isinstance(frames, int) or frames < 1:
        raise ConfigError("synth.frames must be a positive integer")
    pairing = sy.get("pairing", "unpaired")
    if pairing not in ("paired", "unpaired"):
        raise ConfigError(f"synth.pairing must be 'paired' or 'unpaired', got {pairing!r}")
    return RunConfig(
        seed=seed,
        synth=synth,
        frames=frames,
        pairing=pairing,
        train=build("train", TrainConfig, seed=seed, **sec["train"]),
        loss=build("loss", LossWeights, **sec["loss"]),
        paganin=build("paganin", PaganinSettings, **sec["paganin"]),
        iterative=build("iterative", IterativeSettings, **sec["iterative"]),
        paths=dict(sec["paths"]),
    )


def parse_text(text: str, suffix: str = ".toml") -> dict:
    try:
        if suffix == ".json":
            return json.loads(text)
        return tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"cannot parse config: {e}") from e


def load_config(path: str | Path | None) -> RunConfig:
    """Read a TOML or JSON (by ``.json`` suffix) run configuration; ``None`` gives defaults."""
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise OSError(f"cannot read config {path}: {e}") from e
    try:
        raw = parse_text(text, path.suffix.lower())
    except ConfigError as e:
        raise ConfigError(f"{path}: {e}") from e
    return from_dict(raw)


def with_mode(cfg: RunConfig, mode: str) -> RunConfig:
    try:
        return replace(cfg, train=replace(cfg.train, mode=mode))
    except ValueError as e:
        raise ConfigError(str(e)) from e
