"""Training loop, checkpoint I/O and single-pass reconstruction."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import torch
from torch import nn

from ..field import ComplexField, OpticsConfig, RealImage, ShapeError
from .checkpoint import Checkpoint, config_hash, pack_module, pack_optimizer, unpack_module, unpack_optimizer
from .data import MODES, TensorDataset, load_dataset
from .losses import (
    LossWeights,
    Nets,
    cycle_objective,
    discriminator_term,
    loss_paired,
    loss_pix2pix,
    run_cycles,
)
from .networks import DiscriminatorSpec, GeneratorSpec, PatchDiscriminator, UNetGenerator
from .physics import FresnelPropagator

logger = logging.getLogger(__name__)

_TORCH_DTYPES = {"float32": torch.float32, "float64": torch.float64}


class NonFiniteLossError(RuntimeError):
    def __init__(self, epoch: int, batch: int, values: dict):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}: {values}")
        self.epoch = epoch
        self.batch = batch


@dataclass(frozen=True)
class TrainConfig:
    mode: str = "phasegan"
    epochs: int = 70
    batch_size: int = 16
    gen_lr: float = 2e-4
    disc_lr: float = 1e-4
    lr_decay_every: int = 30
    lr_decay_factor: float = 0.1
    beta1: float = 0.5
    beta2: float = 0.999
    seed: int = 0
    depth: int = 3
    base_channels: int = 16
    disc_layers: int = 3
    disc_filters: int = 16
    dtype: str = "float32"

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if not (self.gen_lr > 0 and self.disc_lr > 0):
            raise ValueError("learning rates must be positive")
        if self.dtype not in _TORCH_DTYPES:
            raise ValueError(f"dtype must be one of {list(_TORCH_DTYPES)}")

    @property
    def torch_dtype(self) -> torch.dtype:
        return _TORCH_DTYPES[self.dtype]

    def to_dict(self) -> dict:
        return asdict(self)


def lr_schedule(base: float, epochs: int, every: int = 30, factor: float = 0.1) -> list[float]:
    """Learning rate per epoch (index 0 is epoch 1), multiplied by ``factor`` every ``every`` epochs."""
    lrs, lr = [], base
    for epoch in range(1, epochs + 1):
        if epoch > 1 and (epoch - 1) % every == 0:
            lr = lr * factor
        lrs.append(lr)
    return lrs


def architecture(cfg: TrainConfig) -> dict[str, dict]:
    gen = dict(depth=cfg.depth, base_channels=cfg.base_channels)
    disc = dict(layers=cfg.disc_layers, base_filters=cfg.disc_filters)
    arch = {"g_obj": {"kind": "generator", **GeneratorSpec(1, 2, **gen).to_dict()}}
    if cfg.mode in ("cyclegan", "phasegan"):
        in_det = 2 if cfg.mode == "cyclegan" else 1
        arch["g_det"] = {"kind": "generator", **GeneratorSpec(in_det, 1, **gen).to_dict()}
        arch["d_det"] = {"kind": "discriminator", **DiscriminatorSpec(1, **disc).to_dict()}
    if cfg.mode != "paired":
        arch["d_obj"] = {"kind": "discriminator", **DiscriminatorSpec(2, **disc).to_dict()}
    return arch


def build_network(spec: dict) -> nn.Module:
    spec = dict(spec)
    kind = spec.pop("kind")
    if kind == "generator":
        return UNetGenerator(GeneratorSpec(**spec))
    return PatchDiscriminator(DiscriminatorSpec(**spec))


class Trainer:
    """Networks, optimizers and per-batch update rules for one training mode."""

    def __init__(self, cfg: TrainConfig, weights: LossWeights = LossWeights(),
                 optics: OpticsConfig | None = None, frame_shape: tuple[int, int] | None = None):
        self.cfg = cfg
        self.weights = weights
        self.optics = optics
        self.frame_shape = frame_shape
        torch.manual_seed(cfg.seed)
        self.arch = architecture(cfg)
        dt = cfg.torch_dtype
        self.modules: dict[str, nn.Module] = {k: build_network(v).to(dt) for k, v in self.arch.items()}
        self.propagator = None
        if cfg.mode == "phasegan":
            if optics is None or frame_shape is None:
                raise ValueError("phasegan mode needs optics and frame_shape")
            self.propagator = FresnelPropagator(optics, frame_shape[0], frame_shape[1], dt)
        gen_params = [p for k in ("g_obj", "g_det") if k in self.modules for p in self.modules[k].parameters()]
        disc_params = [p for k in ("d_obj", "d_det") if k in self.modules for p in self.modules[k].parameters()]
        betas = (cfg.beta1, cfg.beta2)
        self.opt_gen = torch.optim.Adam(gen_params, lr=cfg.gen_lr, betas=betas)
        self.opt_disc = torch.optim.Adam(disc_params, lr=cfg.disc_lr, betas=betas) if disc_params else None
        self.epoch = 0
        self.history: list[dict] = []

    @property
    def nets(self) -> Nets:
        m = self.modules
        return Nets(m["g_obj"], m.get("g_det"), m.get("d_obj"), m.get("d_det"))

    def _discriminators(self) -> list[nn.Module]:
        return [self.modules[k] for k in ("d_obj", "d_det") if k in self.modules]

    def set_lr(self, gen_lr: float, disc_lr: float) -> None:
        for g in self.opt_gen.param_groups:
            g["lr"] = gen_lr
        if self.opt_disc is not None:
            for g in self.opt_disc.param_groups:
                g["lr"] = disc_lr

    def train_mode(self, on: bool = True) -> None:
        for m in self.modules.values():
            m.train(on)

    # --- losses -----------------------------------------------------------------

    def discriminator_loss(self, psi, intensity) -> torch.Tensor:
        nets = self.nets
        with torch.no_grad():
            if self.cfg.mode == "pix2pix":
                psi_fake = nets.g_obj(intensity)
            else:
                out = run_cycles(nets.g_obj, nets.g_det, self.propagator, psi, intensity)
                i_fake, psi_fake = out.i_fake, out.psi_fake
        d = discriminator_term(nets.d_obj, psi, psi_fake)
        if self.cfg.mode != "pix2pix":
            d = d + discriminator_term(nets.d_det, intensity, i_fake)
        return d

    def generator_objective(self, psi, intensity) -> tuple[torch.Tensor, dict[str, torch.Tensor]]:
        nets = self.nets
        mode = self.cfg.mode
        if mode == "paired":
            mse = loss_paired(nets.g_obj, psi, intensity)
            return mse, {"mse": mse}
        if mode == "pix2pix":
            obj = loss_pix2pix(nets.g_obj, nets.d_obj, psi, intensity, self.weights.lambda_mse)
        else:
            obj = cycle_objective(nets, self.weights, psi, intensity, self.propagator)
        comps = {k: v for k, v in obj.components.items() if k != "disc"}
        return obj.generator, comps

    def step(self, psi, intensity, batch_index: int = 0) -> dict[str, float]:
        """One alternating update: discriminators first, then generators."""
        record = {}
        if self.opt_disc is not None:
            self.opt_disc.zero_grad(set_to_none=True)
            d = self.discriminator_loss(psi, intensity)
            self._check({"disc": d}, batch_index)
            d.backward()
            self.opt_disc.step()
            record["disc"] = d.item()
        for m in self._discriminators():
            m.requires_grad_(False)
        try:
            self.opt_gen.zero_grad(set_to_none=True)
            total, comps = self.generator_objective(psi, intensity)
            self._check({"total": total, **comps}, batch_index)
            total.backward()
            self.opt_gen.step()
        finally:
            for m in self._discriminators():
                m.requires_grad_(True)
        record["total"] = total.item()
        record.update({k: v.item() for k, v in comps.items()})
        return record

    def _check(self, values: dict[str, torch.Tensor], batch_index: int) -> None:
        if not all(torch.isfinite(v).all() for v in values.values()):
            raise NonFiniteLossError(self.epoch, batch_index, {k: v.item() for k, v in values.items()})

    @torch.no_grad()
    def evaluate(self, psi, intensity) -> dict[str, float]:
        """All loss components in eval mode (batch-norm running statistics)."""
        self.train_mode(False)
        try:
            total, comps = self.generator_objective(psi, intensity)
            out = {"total": total.item(), **{k: v.item() for k, v in comps.items()}}
            if self.opt_disc is not None:
                out["disc"] = self.discriminator_loss(psi, intensity).item()
        finally:
            self.train_mode(True)
        return out

    # --- checkpoints --------------------------------------------------------------

    def header(self) -> dict:
        config = {
            "train": self.cfg.to_dict(),
            "loss_weights": self.weights.to_dict(),
            "optics": asdict(self.optics) if self.optics else None,
            "frame_shape": list(self.frame_shape) if self.frame_shape else None,
        }
        return {
            "kind": "holoretrieve-checkpoint",
            "epoch": self.epoch,
            "architecture": self.arch,
            "config": config,
            "config_hash": config_hash(config),
            "history": self.history,
        }

    def to_checkpoint(self) -> Checkpoint:
        tensors: dict[str, torch.Tensor] = {}
        for name, m in self.modules.items():
            pack_module(f"net.{name}", m, tensors)
        header = self.header()
        header["optimizers"] = {"gen": pack_optimizer("opt.gen", self.opt_gen, tensors)}
        if self.opt_disc is not None:
            header["optimizers"]["disc"] = pack_optimizer("opt.disc", self.opt_disc, tensors)
        return Checkpoint(header, tensors)

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint) -> Trainer:
        c = ckpt.header["config"]
        optics = OpticsConfig(**c["optics"]) if c["optics"] else None
        frame = tuple(c["frame_shape"]) if c["frame_shape"] else None
        tr = cls(TrainConfig(**c["train"]), LossWeights(**c["loss_weights"]), optics, frame)
        for name, m in tr.modules.items():
            unpack_module(f"net.{name}", m, ckpt.tensors)
        opts = ckpt.header["optimizers"]
        unpack_optimizer("opt.gen", tr.opt_gen, opts["gen"], ckpt.tensors)
        if tr.opt_disc is not None:
            unpack_optimizer("opt.disc", tr.opt_disc, opts["disc"], ckpt.tensors)
        tr.epoch = ckpt.header["epoch"]
        tr.history = list(ckpt.header["history"])
        return tr


@dataclass
class TrainResult:
    trainer: Trainer
    history: list[dict]
    checkpoints: list[Path] = field(default_factory=list)


def eval_batch(data: TensorDataset, batch_size: int) -> tuple[torch.Tensor, torch.Tensor]:
    n = min(batch_size, len(data))
    return data.objects[:n], data.holograms[:n]


def train(
    cfg: TrainConfig,
    data: TensorDataset | str | Path,
    out_dir: str | Path | None = None,
    weights: LossWeights = LossWeights(),
    optics: OpticsConfig | None = None,
) -> TrainResult:
    """Train ``cfg.mode`` on a dataset; checkpoint and log every epoch when ``out_dir`` is set.

    Each history record holds the epoch's mean training losses (``train``),
    the losses of the saved parameters on the first ``batch_size`` frames
    (``eval``), and the learning rates in effect.
    """
    if not isinstance(data, TensorDataset):
        data = load_dataset(data, cfg.mode, 2**cfg.depth, cfg.torch_dtype)
    optics = optics or data.optics
    frame = tuple(data.objects.shape[-2:])
    trainer = Trainer(cfg, weights, optics, frame)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "history.jsonl").write_text("")

    gen_lrs = lr_schedule(cfg.gen_lr, cfg.epochs, cfg.lr_decay_every, cfg.lr_decay_factor)
    disc_lrs = lr_schedule(cfg.disc_lr, cfg.epochs, cfg.lr_decay_every, cfg.lr_decay_factor)
    rng = torch.Generator().manual_seed(cfg.seed)
    paired_batches = cfg.mode in ("paired", "pix2pix")
    n = len(data)
    ev_psi, ev_int = eval_batch(data, cfg.batch_size)
    checkpoints = []
    trainer.train_mode(True)
    for epoch in range(1, cfg.epochs + 1):
        trainer.epoch = epoch
        trainer.set_lr(gen_lrs[epoch - 1], disc_lrs[epoch - 1])
        perm_obj = torch.randperm(n, generator=rng)
        perm_holo = perm_obj if paired_batches else torch.randperm(n, generator=rng)
        sums: dict[str, float] = {}
        n_batches = 0
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            io_ = perm_obj[start : start + cfg.batch_size]
            ih = perm_holo[start : start + cfg.batch_size]
            rec = trainer.step(data.objects[io_], data.holograms[ih], b)
            for k, v in rec.items():
                sums[k] = sums.get(k, 0.0) + v
            n_batches += 1
        record = {
            "epoch": epoch,
            "mode": cfg.mode,
            "lr_gen": gen_lrs[epoch - 1],
            "lr_disc": disc_lrs[epoch - 1],
            "n_batches": n_batches,
            "train": {k: v / n_batches for k, v in sums.items()},
            "eval": trainer.evaluate(ev_psi, ev_int),
        }
        trainer.history.append(record)
        logger.info("epoch %d: %s", epoch, json.dumps(record["train"], sort_keys=True))
        if out is not None:
            with open(out / "history.jsonl", "a") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")
            path = out / f"checkpoint_{epoch:04d}.pgck"
            trainer.to_checkpoint().save(path)
            checkpoints.append(path)
    return TrainResult(trainer, trainer.history, checkpoints)


def load_trainer(path: str | Path) -> Trainer:
    return Trainer.from_checkpoint(Checkpoint.load(path))


def evaluate_checkpoint(path: str | Path, data: TensorDataset | str | Path) -> dict[str, float]:
    """Recompute the ``eval`` losses logged for the checkpoint's epoch."""
    tr = load_trainer(path)
    if not isinstance(data, TensorDataset):
        data = load_dataset(data, tr.cfg.mode, 2**tr.cfg.depth, tr.cfg.torch_dtype)
    return tr.evaluate(*eval_batch(data, tr.cfg.batch_size))


@torch.no_grad()
def reconstruct(trainer_or_path: Trainer | str | Path, image: RealImage) -> ComplexField:
    """Single forward pass of the phase-retrieval generator."""
    tr = trainer_or_path if isinstance(trainer_or_path, Trainer) else load_trainer(trainer_or_path)
    g = tr.modules["g_obj"]
    factor = 2**tr.cfg.depth
    h, w = image.shape
    if h % factor or w % factor:
        raise ShapeError(f"input {w}x{h} not divisible by {factor}")
    g.eval()
    x = torch.from_numpy(np.array(image.data)).to(tr.cfg.torch_dtype)[None, None]
    y = g(x)[0].to(torch.float64).numpy()
    return ComplexField(y[0] + 1j * y[1], image.pixel_size)
