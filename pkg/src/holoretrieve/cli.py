"""Command-line entry point: ``holoretrieve <command> [options]``.

Commands: gen-data, train, reconstruct, baseline, eval. Diagnostics go to
stderr; stdout carries one JSON object describing the outputs.

Exit codes:
    0  success
    2  configuration error (bad key, bad value, unparsable file)
    3  I/O error (missing, unreadable or malformed file)
    4  dataset/mode mismatch or misaligned evaluation sets
    5  non-finite training loss
    6  shape mismatch
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
from PIL import Image

from . import pfd
from .classical import alternating_projection_retrieve, paganin_reconstruct
from .config import ConfigError, RunConfig, load_config, with_mode
from .field import ComplexField, RealImage, ShapeError
from .metrics import IndexMismatchError, evaluate
from .synth import generate_dataset, write_json
from .training.checkpoint import CheckpointError
from .training.data import MODES, DatasetModeError
from .training.trainer import NonFiniteLossError, load_trainer, reconstruct, train

logger = logging.getLogger("holoretrieve")

EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DATASET = 4
EXIT_NONFINITE = 5
EXIT_SHAPE = 6

CONFIG_ECHO = "config.json"


def _path(arg, cfg: RunConfig, key: str, required: bool = True) -> Path | None:
    value = arg if arg is not None else cfg.paths.get(key)
    if value is None:
        if required:
            raise ConfigError(f"no {key} path given (option or paths.{key})")
        return None
    return Path(value)


def _echo(out: Path, cfg: RunConfig) -> None:
    out.mkdir(parents=True, exist_ok=True)
    pfd.atomic_write(out / CONFIG_ECHO, cfg.to_json().encode())


def _emit(obj: dict) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True) + "\n")


def _input_files(path: Path, subdir: str) -> list[Path]:
    """A single PFD file, a directory of them, or a dataset directory (uses ``subdir``)."""
    if path.is_file():
        return [path]
    if not path.is_dir():
        raise FileNotFoundError(f"no such file or directory: {path}")
    if (path / "manifest.json").is_file() and (path / subdir).is_dir():
        path = path / subdir
    files = sorted(p for p in path.iterdir() if p.suffix == ".pfd")
    if not files:
        raise FileNotFoundError(f"no .pfd files in {path}")
    return files


def _as_intensity(f, path: Path) -> RealImage:
    if isinstance(f, ComplexField):
        raise ShapeError(f"{path}: expected a real intensity image, found 2 channels")
    return f


def to_png16(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Map ``[lo, hi]`` linearly onto ``[0, 65535]`` (clipped, rounded)."""
    scaled = (np.asarray(values, dtype=np.float64) - lo) / (hi - lo) * 65535.0
    return np.clip(np.rint(scaled), 0, 65535).astype(np.uint16)


def write_previews(out: Path, stem: str, f: ComplexField) -> list[Path]:
    amp = f.amplitude().data
    top = float(amp.max()) or 1.0
    paths = [out / f"{stem}_phase.png", out / f"{stem}_amplitude.png"]
    Image.fromarray(to_png16(f.phase().data, -math.pi, math.pi)).save(paths[0])
    Image.fromarray(to_png16(amp, 0.0, top)).save(paths[1])
    return paths


# --- commands ---------------------------------------------------------------------


def cmd_gen_data(args) -> dict:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed, train=replace(cfg.train, seed=args.seed))
    if args.frames is not None:
        if args.frames < 1:
            raise ConfigError("--frames must be >= 1")
        cfg = replace(cfg, frames=args.frames)
    if args.pairing is not None:
        cfg = replace(cfg, pairing=args.pairing)
    out = _path(args.out, cfg, "out")
    _echo(out, cfg)
    generate_dataset(out, cfg.frames, cfg.synth, cfg.seed, cfg.pairing)
    return {"out": str(out), "frames": cfg.frames, "pairing": cfg.pairing}


def cmd_train(args) -> dict:
    cfg = load_config(args.config)
    if args.mode is not None:
        cfg = with_mode(cfg, args.mode)
    data = _path(args.data, cfg, "data")
    out = _path(args.out, cfg, "out")
    _echo(out, cfg)
    result = train(cfg.train, data, out, cfg.loss)
    return {
        "out": str(out),
        "mode": cfg.train.mode,
        "epochs": len(result.history),
        "checkpoints": [str(p) for p in result.checkpoints],
        "history": str(out / "history.jsonl"),
    }


def cmd_reconstruct(args) -> dict:
    cfg = load_config(args.config)
    ckpt = _path(args.checkpoint, cfg, "checkpoint")
    inputs = _input_files(_path(args.input, cfg, "input"), "holograms")
    out = _path(args.out, cfg, "out")
    _echo(out, cfg)
    trainer = load_trainer(ckpt)
    written = []
    for path in inputs:
        image = _as_intensity(pfd.load(path), path)
        psi = reconstruct(trainer, image)
        target = out / path.name
        pfd.save(target, psi)
        written.append(str(target))
        if args.preview:
            write_previews(out, path.stem, psi)
    return {"out": str(out), "files": written}


def _load_support(path: Path | None, shape) -> np.ndarray | None:
    if path is None:
        return None
    mask = pfd.load(path)
    if isinstance(mask, ComplexField):
        raise ShapeError(f"{path}: support must be a real image")
    if mask.shape != shape:
        raise ShapeError(f"support {mask.shape} does not match input {shape}")
    return mask.data > 0.5


def cmd_baseline(args) -> dict:
    cfg = load_config(args.config)
    if args.iterations is not None:
        if args.iterations < 1:
            raise ConfigError("--iterations must be >= 1")
        cfg = replace(cfg, iterative=replace(cfg.iterative, iterations=args.iterations))
    inputs = _input_files(_path(args.input, cfg, "input"), "holograms")
    out = _path(args.out, cfg, "out")
    flat_path = _path(args.flat, cfg, "flat", required=False)
    support_path = _path(args.support, cfg, "support", required=False)
    _echo(out, cfg)
    written, extra = [], []
    for path in inputs:
        image = _as_intensity(pfd.load(path), path)
        target = out / path.name
        if args.method == "paganin":
            if flat_path is not None:
                flat = _as_intensity(pfd.load(flat_path), flat_path)
            else:
                flat = RealImage(np.ones(image.shape), image.pixel_size)
            res = paganin_reconstruct(image, flat, cfg.paganin.resolve(cfg.optics, args.aps))
            pfd.save(target, res.object_field())
            tpath = out / "thickness" / path.name
            tpath.parent.mkdir(exist_ok=True)
            pfd.save(tpath, res.thickness)
            extra.append(str(tpath))
            psi = res.object_field()
        else:
            optics = replace(cfg.optics, pixel_size=image.pixel_size)
            it = cfg.iterative.resolve(_load_support(support_path, image.shape))
            res = alternating_projection_retrieve(image, optics, it, seed=cfg.seed)
            pfd.save(target, res.field)
            rpath = out / f"{path.stem}_residuals.json"
            write_json(rpath, {"method": "gs", "input": path.name, "residuals": res.residuals})
            extra.append(str(rpath))
            psi = res.field
        written.append(str(target))
        if args.preview:
            write_previews(out, path.stem, psi)
    return {"out": str(out), "method": args.method, "files": written, "extra": extra}


def cmd_eval(args) -> dict:
    recon = _input_files(Path(args.recon), "objects")
    refs = _input_files(Path(args.ref), "objects")
    rn, fn = [p.name for p in recon], [p.name for p in refs]
    if rn != fn:
        missing = sorted(set(rn) ^ set(fn))
        raise IndexMismatchError(f"reconstruction and reference files differ: {missing[:5]}")
    report = evaluate([pfd.load(p).data for p in recon], [pfd.load(p).data for p in refs])
    doc = report.to_dict()
    doc["format_version"] = 1
    doc["names"] = rn
    out = Path(args.out)
    if out.parent:
        out.parent.mkdir(parents=True, exist_ok=True)
    pfd.atomic_write(out, (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode())
    return {"out": str(out), "mean": report.mean}


# --- parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="holoretrieve", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="simulate a dataset of objects and holograms")
    g.add_argument("--config")
    g.add_argument("--out")
    g.add_argument("--frames", type=int)
    pair = g.add_mutually_exclusive_group()
    pair.add_argument("--paired", dest="pairing", action="store_const", const="paired")
    pair.add_argument("--unpaired", dest="pairing", action="store_const", const="unpaired")
    g.add_argument("--seed", type=int)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train a phase-retrieval network")
    t.add_argument("--config")
    t.add_argument("--data")
    t.add_argument("--mode", choices=MODES)
    t.add_argument("--out")
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("reconstruct", help="apply a trained generator to intensity images")
    r.add_argument("--config")
    r.add_argument("--checkpoint")
    r.add_argument("--input")
    r.add_argument("--out")
    r.add_argument("--preview", action="store_true", help="also write 16-bit PNG phase/amplitude previews")
    r.set_defaults(func=cmd_reconstruct)

    b = sub.add_parser("baseline", help="non-learned reconstruction (Paganin or alternating projections)")
    b.add_argument("--method", choices=("paganin", "gs"), required=True)
    b.add_argument("--config")
    b.add_argument("--input")
    b.add_argument("--out")
    b.add_argument("--flat", help="flat-field intensity PFD (paganin)")
    b.add_argument("--support", help="support mask PFD, >0.5 inside (gs)")
    b.add_argument("--aps", action="store_true", help="paganin preset: 25.7 keV, z=5 mm, delta/beta=1000")
    b.add_argument("--iterations", type=int)
    b.add_argument("--preview", action="store_true")
    b.set_defaults(func=cmd_baseline)

    e = sub.add_parser("eval", help="L2 / DSSIM / FRCM report for aligned reconstructions")
    e.add_argument("--recon", required=True)
    e.add_argument("--ref", required=True)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eval)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        _emit(args.func(args))
    except ConfigError as e:
        return _fail(EXIT_CONFIG, f"config error: {e}")
    except (DatasetModeError, IndexMismatchError) as e:
        return _fail(EXIT_DATASET, str(e))
    except NonFiniteLossError as e:
        return _fail(EXIT_NONFINITE, str(e))
    except ShapeError as e:
        return _fail(EXIT_SHAPE, f"shape error: {e}")
    except (OSError, pfd.PfdFormatError, CheckpointError) as e:
        return _fail(EXIT_IO, f"I/O error: {e}")
    return 0


def _fail(code: int, msg: str) -> int:
    print(f"holoretrieve: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
