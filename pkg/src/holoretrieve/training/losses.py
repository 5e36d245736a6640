"""Loss terms for paired, pix2pix, CycleGAN and physics-in-the-loop cycle training.

Discriminators return logits; probabilities are ``sigmoid(logit)``. Each
discriminator term is ``(BCE(real, 1) + BCE(fake, 0)) / 2`` averaged over
patches and batch, and generators use the non-saturating ``BCE(fake, 1)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable, Optional

import torch
import torch.nn.functional as F

from .physics import FresnelPropagator, frc_distance

Net = Callable[[torch.Tensor], torch.Tensor]


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class LossWeights:
    lambda_cyc: float = 20.0
    lambda_frc: float = 10.0
    lambda_mse: float = 100.0
    cyclegan_first_term_weight: float = 2.5
    cyclegan_lambda_frc: float = 4.0

    def __post_init__(self) -> None:
        for k, v in asdict(self).items():
            if v < 0:
                raise ValueError(f"{k} must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


def _bce(logits: torch.Tensor, target: float) -> torch.Tensor:
    return F.binary_cross_entropy_with_logits(logits, torch.full_like(logits, target))


def discriminator_term(d: Net, real: torch.Tensor, fake: torch.Tensor) -> torch.Tensor:
    return 0.5 * (_bce(d(real), 1.0) + _bce(d(fake.detach()), 0.0))


def generator_term(d: Net, fake: torch.Tensor) -> torch.Tensor:
    return _bce(d(fake), 1.0)


def loss_gan(d_obj: Net, d_det: Net, psi_real, i_real, psi_fake, i_fake) -> tuple[torch.Tensor, torch.Tensor]:
    """Adversarial loss for both domains: ``(generator term, discriminator term)``.

    ``psi_fake = G_O(I)`` is judged by ``d_obj``; ``i_fake = G_D|P psi|^2`` by ``d_det``.
    """
    g = generator_term(d_det, i_fake) + generator_term(d_obj, psi_fake)
    d = discriminator_term(d_obj, psi_real, psi_fake) + discriminator_term(d_det, i_real, i_fake)
    return g, d


@dataclass
class CycleOutputs:
    psi_fake: torch.Tensor  # G_O(I)
    i_fake: torch.Tensor  # G_D|P psi|^2, or G_D(psi) without a propagator
    psi_cycled: torch.Tensor  # G_O(i_fake)
    i_cycled: torch.Tensor  # G_D|P psi_fake|^2


def run_cycles(g_obj: Net, g_det: Net, propagator: Optional[FresnelPropagator], psi, intensity) -> CycleOutputs:
    """Both cycles. With ``propagator=None`` (CycleGAN) ``g_det`` maps fields to intensities directly."""

    def to_detector(field):
        return g_det(field if propagator is None else propagator.intensity(field))

    i_fake = to_detector(psi)
    psi_fake = g_obj(intensity)
    return CycleOutputs(psi_fake, i_fake, g_obj(i_fake), to_detector(psi_fake))


def cycle_term(out: CycleOutputs, psi, intensity, psi_weight: float = 1.0) -> torch.Tensor:
    return psi_weight * (out.psi_cycled - psi).abs().mean() + (out.i_cycled - intensity).abs().mean()


def frc_term(out: CycleOutputs, psi, intensity, psi_weight: float = 1.0) -> torch.Tensor:
    return psi_weight * frc_distance(out.psi_cycled, psi).mean() + frc_distance(out.i_cycled, intensity).mean()


def loss_cycle(g_obj: Net, g_det: Net, propagator, psi, intensity, psi_weight: float = 1.0) -> torch.Tensor:
    """Mean-L1 cycle consistency over both cycles."""
    return cycle_term(run_cycles(g_obj, g_det, propagator, psi, intensity), psi, intensity, psi_weight)


def loss_frc(g_obj: Net, g_det: Net, propagator, psi, intensity, psi_weight: float = 1.0) -> torch.Tensor:
    """Batch mean of ``||1 - FRC(cycled, original)||_2`` for both cycles."""
    return frc_term(run_cycles(g_obj, g_det, propagator, psi, intensity), psi, intensity, psi_weight)


def loss_paired(g_obj: Net, psi, intensity) -> torch.Tensor:
    return ((g_obj(intensity) - psi) ** 2).mean()


@dataclass
class Objective:
    generator: torch.Tensor
    discriminator: Optional[torch.Tensor]
    components: dict[str, torch.Tensor]


def loss_pix2pix(g_obj: Net, d_obj: Net, psi, intensity, lambda_mse: float = 100.0, paired: bool = True) -> Objective:
    if not paired:
        raise ConfigurationError("pix2pix needs paired (object, hologram) batches")
    psi_fake = g_obj(intensity)
    adv = generator_term(d_obj, psi_fake)
    mse = ((psi_fake - psi) ** 2).mean()
    disc = discriminator_term(d_obj, psi, psi_fake)
    return Objective(adv + lambda_mse * mse, disc, {"gan": adv, "mse": mse, "disc": disc})


@dataclass
class Nets:
    g_obj: Net
    g_det: Optional[Net] = None
    d_obj: Optional[Net] = None
    d_det: Optional[Net] = None


def cycle_objective(
    nets: Nets,
    weights: LossWeights,
    psi,
    intensity,
    propagator: Optional[FresnelPropagator],
) -> Objective:
    """Generator and discriminator objectives for the two cyclic modes.

    With a propagator this is the physics-in-the-loop objective
    ``L_gan + lambda_cyc * L_cyc + lambda_frc * L_frc``; without one it is
    CycleGAN, which uses ``cyclegan_lambda_frc`` and up-weights the field
    cycle by ``cyclegan_first_term_weight``.
    """
    if propagator is None:
        psi_w, lam_frc = weights.cyclegan_first_term_weight, weights.cyclegan_lambda_frc
    else:
        psi_w, lam_frc = 1.0, weights.lambda_frc
    out = run_cycles(nets.g_obj, nets.g_det, propagator, psi, intensity)
    gan, disc = loss_gan(nets.d_obj, nets.d_det, psi, intensity, out.psi_fake, out.i_fake)
    cyc = cycle_term(out, psi, intensity, psi_w)
    frc = frc_term(out, psi, intensity, psi_w)
    total = gan + weights.lambda_cyc * cyc + lam_frc * frc
    return Objective(total, disc, {"gan": gan, "cyc": cyc, "frc": frc, "disc": disc})


def total_phasegan_objective(nets: Nets, weights: LossWeights, psi, intensity, propagator: FresnelPropagator) -> Objective:
    if propagator is None:
        raise ConfigurationError("the physics-in-the-loop objective needs a propagator")
    return cycle_objective(nets, weights, psi, intensity, propagator)
