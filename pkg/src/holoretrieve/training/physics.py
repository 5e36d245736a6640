"""Differentiable physics for the training loop.

Complex fields cross the network boundary as two channels ``(real, imag)``
with layout ``(batch, 2, height, width)``; intensities are ``(batch, 1, H, W)``.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from ..field import OpticsConfig
from ..metrics import ring_indices
from ..optics import transfer_function


def to_complex(x: torch.Tensor) -> torch.Tensor:
    """``(B, 2, H, W)`` real/imag channels -> ``(B, H, W)`` complex."""
    return torch.complex(x[:, 0], x[:, 1])


def to_channels(z: torch.Tensor) -> torch.Tensor:
    return torch.stack([z.real, z.imag], dim=1)


class FresnelPropagator(nn.Module):
    """Fixed Fresnel transfer-function propagator acting on two-channel fields."""

    def __init__(self, cfg: OpticsConfig, height: int, width: int, dtype: torch.dtype = torch.float32):
        super().__init__()
        self.cfg = cfg
        h = transfer_function(cfg, width, height).data
        cdtype = torch.complex128 if dtype == torch.float64 else torch.complex64
        self.register_buffer("transfer", torch.from_numpy(np.array(h)).to(cdtype), persistent=False)

    def forward(self, psi: torch.Tensor) -> torch.Tensor:
        z = to_complex(psi)
        out = torch.fft.ifft2(torch.fft.fft2(z) * self.transfer)
        return to_channels(out)

    def intensity(self, psi: torch.Tensor) -> torch.Tensor:
        """``|P psi|^2`` as a one-channel image."""
        d = self.forward(psi)
        return (d[:, 0:1] ** 2 + d[:, 1:2] ** 2)


def _as_spectrum(x: torch.Tensor) -> torch.Tensor:
    if x.shape[1] == 2:
        return torch.fft.fft2(to_complex(x))
    if x.shape[1] == 1:
        return torch.fft.fft2(x[:, 0])
    raise ValueError(f"expected 1 or 2 channels, got {x.shape[1]}")


def frc_torch(a: torch.Tensor, b: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Batched FRC with the same ring convention as :func:`holoretrieve.metrics.frc`.

    Returns ``(values, valid)`` of shape ``(B, n_rings)``. Rings where both
    inputs carry no power are invalid and hold 0. Ring assignment is hard;
    gradients flow through the ring sums.
    """
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")
    bsz, _, h, w = a.shape
    idx_np, n_rings = ring_indices(h, w)
    keep = torch.from_numpy(np.flatnonzero(idx_np.ravel() >= 0))
    ring = torch.from_numpy(idx_np.ravel()[keep.numpy()])
    fa = _as_spectrum(a).reshape(bsz, -1)[:, keep]
    fb = _as_spectrum(b).reshape(bsz, -1)[:, keep]

    def ring_sum(v: torch.Tensor) -> torch.Tensor:
        return torch.zeros(bsz, n_rings, dtype=v.dtype, device=v.device).index_add(1, ring, v)

    cross = ring_sum((fa * fb.conj()).real)
    pa = ring_sum((fa * fa.conj()).real)
    pb = ring_sum((fb * fb.conj()).real)
    den2 = pa * pb
    with torch.no_grad():
        positive = den2 > 0
        valid = ~((pa == 0) & (pb == 0))
    safe = torch.where(positive, den2, torch.ones_like(den2))
    values = torch.where(positive, cross / torch.sqrt(safe), torch.zeros_like(cross))
    return values, valid


def frc_distance(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Per-sample ``||1 - FRC(a, b)||_2`` over valid rings, shape ``(B,)``."""
    values, valid = frc_torch(a, b)
    sq = torch.where(valid, (1.0 - values) ** 2, torch.zeros_like(values)).sum(dim=1)
    # sqrt has no derivative at 0; a perfect match contributes value and gradient 0
    nz = sq > 0
    return torch.where(nz, torch.sqrt(torch.where(nz, sq, torch.ones_like(sq))), torch.zeros_like(sq))
