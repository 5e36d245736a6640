"""U-Net generators and PatchGAN discriminators."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
from torch import nn


@dataclass(frozen=True)
class GeneratorSpec:
    in_channels: int = 1
    out_channels: int = 2
    depth: int = 3
    base_channels: int = 16

    @classmethod
    def full_scale(cls, in_channels: int = 1, out_channels: int = 2) -> GeneratorSpec:
        return cls(in_channels, out_channels, depth=5, base_channels=64)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DiscriminatorSpec:
    in_channels: int = 1
    layers: int = 3
    base_filters: int = 16

    @classmethod
    def full_scale(cls, in_channels: int = 1) -> DiscriminatorSpec:
        return cls(in_channels, layers=4, base_filters=64)

    def to_dict(self) -> dict:
        return asdict(self)


def _conv_block(cin: int, cout: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, padding=1),
        nn.ReLU(inplace=True),
        nn.Conv2d(cout, cout, 3, padding=1),
        nn.ReLU(inplace=True),
    )


class UNetGenerator(nn.Module):
    """Contracting path of 3x3 conv/ReLU blocks with 2x2 max pooling, expansive
    path of 2x2 transposed convolutions concatenated with the matching skip."""

    def __init__(self, spec: GeneratorSpec = GeneratorSpec()):
        super().__init__()
        self.spec = spec
        c = spec.base_channels
        self.encoders = nn.ModuleList()
        cin = spec.in_channels
        for level in range(spec.depth):
            self.encoders.append(_conv_block(cin, c * 2**level))
            cin = c * 2**level
        self.pool = nn.MaxPool2d(2)
        self.bottleneck = _conv_block(cin, c * 2**spec.depth)
        self.ups = nn.ModuleList()
        self.decoders = nn.ModuleList()
        for level in reversed(range(spec.depth)):
            width = c * 2**level
            self.ups.append(nn.ConvTranspose2d(width * 2, width, 2, stride=2))
            self.decoders.append(_conv_block(width * 2, width))
        self.head = nn.Conv2d(c, spec.out_channels, 1)
        init_weights(self)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        factor = 2**self.spec.depth
        if x.shape[-1] % factor or x.shape[-2] % factor:
            raise ValueError(f"spatial size {tuple(x.shape[-2:])} not divisible by {factor}")
        skips = []
        for enc in self.encoders:
            x = enc(x)
            skips.append(x)
            x = self.pool(x)
        x = self.bottleneck(x)
        for up, dec, skip in zip(self.ups, self.decoders, reversed(skips)):
            x = dec(torch.cat([up(x), skip], dim=1))
        return self.head(x)


class PatchDiscriminator(nn.Module):
    """PatchGAN classifier returning a map of real/fake logits.

    ``layers - 1`` stride-2 convolutions and one stride-1 convolution, filters
    doubling per layer, then a stride-1 one-channel output convolution. All
    kernels are 4x4 with padding 1; every conv but the first is batch
    normalized; activations are leaky ReLU with slope 0.2.
    """

    def __init__(self, spec: DiscriminatorSpec = DiscriminatorSpec()):
        super().__init__()
        self.spec = spec
        f = spec.base_filters
        mods: list[nn.Module] = [nn.Conv2d(spec.in_channels, f, 4, stride=2, padding=1), nn.LeakyReLU(0.2, True)]
        cin = f
        for i in range(1, spec.layers):
            stride = 2 if i < spec.layers - 1 else 1
            cout = f * 2**i
            mods += [nn.Conv2d(cin, cout, 4, stride=stride, padding=1), nn.BatchNorm2d(cout), nn.LeakyReLU(0.2, True)]
            cin = cout
        mods.append(nn.Conv2d(cin, 1, 4, stride=1, padding=1))
        self.model = nn.Sequential(*mods)
        init_weights(self)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.model(x)


def patch_map_size(size: int, layers: int) -> int:
    """Output side length of :class:`PatchDiscriminator` for a ``size`` x ``size`` input."""
    strides = [2] * (layers - 1) + [1, 1]
    for s in strides:
        size = (size - 4 + 2) // s + 1
    return size


def init_weights(module: nn.Module) -> None:
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
            nn.init.kaiming_normal_(m.weight, a=0.2 if isinstance(module, PatchDiscriminator) else 0.0)
            nn.init.zeros_(m.bias)
        elif isinstance(m, nn.BatchNorm2d):
            nn.init.ones_(m.weight)
            nn.init.zeros_(m.bias)


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())
