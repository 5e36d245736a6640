"""Load synthetic datasets into tensors for training."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .. import pfd
from ..field import ComplexField, OpticsConfig, RealImage
from ..synth import load_manifest


class DatasetModeError(ValueError):
    """Dataset pairing is incompatible with the requested training mode."""


PAIRED_MODES = ("paired", "pix2pix")
MODES = ("paired", "pix2pix", "cyclegan", "phasegan")


@dataclass
class TensorDataset:
    objects: torch.Tensor  # (N, 2, H, W)
    holograms: torch.Tensor  # (N, 1, H, W)
    paired: bool
    optics: OpticsConfig | None
    manifest: dict

    def __len__(self) -> int:
        return self.objects.shape[0]


def center_crop(arr: np.ndarray, multiple: int) -> np.ndarray:
    """Crop the trailing two axes to the largest size divisible by ``multiple``."""
    h, w = arr.shape[-2:]
    nh, nw = h - h % multiple, w - w % multiple
    if nh == 0 or nw == 0:
        raise ValueError(f"frame {h}x{w} is smaller than {multiple}")
    top, left = (h - nh) // 2, (w - nw) // 2
    return arr[..., top : top + nh, left : left + nw]


def field_to_array(f: ComplexField | RealImage) -> np.ndarray:
    if isinstance(f, ComplexField):
        return np.stack([f.data.real, f.data.imag])
    return f.data[None]


def optics_from_manifest(manifest: dict) -> OpticsConfig | None:
    o = manifest.get("params", {}).get("optics")
    if not o:
        return None
    return OpticsConfig(o["wavelength"], o["distance"], o["pixel_size"])


def load_dataset(data_dir: str | Path, mode: str, multiple: int = 1, dtype: torch.dtype = torch.float32) -> TensorDataset:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    data_dir = Path(data_dir)
    manifest = load_manifest(data_dir)
    paired = manifest.get("pairing") == "paired"
    if mode in PAIRED_MODES and not paired:
        raise DatasetModeError(f"mode {mode!r} needs a paired dataset, {data_dir} is {manifest.get('pairing')!r}")
    objs, holos = [], []
    for fr in manifest["frames"]:
        objs.append(center_crop(field_to_array(pfd.load(data_dir / fr["object"])), multiple))
        holos.append(center_crop(field_to_array(pfd.load(data_dir / fr["hologram"])), multiple))
    return TensorDataset(
        torch.from_numpy(np.stack(objs)).to(dtype),
        torch.from_numpy(np.stack(holos)).to(dtype),
        paired,
        optics_from_manifest(manifest),
        manifest,
    )
