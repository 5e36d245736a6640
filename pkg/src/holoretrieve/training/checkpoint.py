"""PGCK checkpoint container.

Layout (little-endian)::

    magic        b"PGCK"
    version      u32
    header_len   u32, followed by a UTF-8 JSON header (sorted keys)
    n_blobs      u32
    per blob:    name_len u32, name, dtype u32, ndim u32, shape u64 * ndim,
                 nbytes u64, raw data

The header carries architecture, configuration, its hash, the epoch, loss
history and optimizer hyperparameters; the blobs carry network tensors and
optimizer state.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..pfd import atomic_write

MAGIC = b"PGCK"
VERSION = 1

_DTYPES = {
    0: (torch.float32, np.dtype("<f4")),
    1: (torch.float64, np.dtype("<f8")),
    2: (torch.int64, np.dtype("<i8")),
    3: (torch.int32, np.dtype("<i4")),
}
_CODES = {t: c for c, (t, _) in _DTYPES.items()}


class CheckpointError(ValueError):
    pass


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


@dataclass
class Checkpoint:
    header: dict
    tensors: dict[str, torch.Tensor] = field(default_factory=dict)

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        head = canonical_json(self.header).encode()
        buf.write(MAGIC)
        buf.write(struct.pack("<II", VERSION, len(head)))
        buf.write(head)
        buf.write(struct.pack("<I", len(self.tensors)))
        for name, t in self.tensors.items():
            t = t.detach().cpu().contiguous()
            if t.dtype not in _CODES:
                raise CheckpointError(f"unsupported dtype {t.dtype} for {name}")
            code = _CODES[t.dtype]
            raw = t.numpy().astype(_DTYPES[code][1], copy=False).tobytes()
            nb = name.encode()
            buf.write(struct.pack("<I", len(nb)))
            buf.write(nb)
            buf.write(struct.pack("<II", code, t.dim()))
            buf.write(struct.pack(f"<{t.dim()}Q", *t.shape))
            buf.write(struct.pack("<Q", len(raw)))
            buf.write(raw)
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> Checkpoint:
        mv = memoryview(data)
        if bytes(mv[:4]) != MAGIC:
            raise CheckpointError("not a PGCK checkpoint")
        version, hlen = struct.unpack_from("<II", mv, 4)
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        pos = 12
        header = json.loads(bytes(mv[pos : pos + hlen]).decode())
        pos += hlen
        (n,) = struct.unpack_from("<I", mv, pos)
        pos += 4
        tensors = {}
        for _ in range(n):
            (ln,) = struct.unpack_from("<I", mv, pos)
            pos += 4
            name = bytes(mv[pos : pos + ln]).decode()
            pos += ln
            code, ndim = struct.unpack_from("<II", mv, pos)
            pos += 8
            shape = struct.unpack_from(f"<{ndim}Q", mv, pos)
            pos += 8 * ndim
            (nbytes,) = struct.unpack_from("<Q", mv, pos)
            pos += 8
            if code not in _DTYPES:
                raise CheckpointError(f"unknown dtype code {code} for {name}")
            arr = np.frombuffer(data, dtype=_DTYPES[code][1], count=nbytes // _DTYPES[code][1].itemsize, offset=pos)
            pos += nbytes
            tensors[name] = torch.from_numpy(arr.copy()).reshape(shape)
        if pos != len(data):
            raise CheckpointError(f"{len(data) - pos} trailing bytes")
        return cls(header, tensors)

    def save(self, path: str | Path) -> None:
        try:
            atomic_write(path, self.to_bytes())
        except OSError as e:
            raise OSError(f"cannot write {path}: {e}") from e

    @classmethod
    def load(cls, path: str | Path) -> Checkpoint:
        try:
            data = Path(path).read_bytes()
        except OSError as e:
            raise OSError(f"cannot read {path}: {e}") from e
        return cls.from_bytes(data)


def pack_module(prefix: str, module: torch.nn.Module, out: dict[str, torch.Tensor]) -> None:
    for k, v in module.state_dict().items():
        out[f"{prefix}.{k}"] = v


def unpack_module(prefix: str, module: torch.nn.Module, tensors: dict[str, torch.Tensor]) -> None:
    sd = {k[len(prefix) + 1 :]: v for k, v in tensors.items() if k.startswith(prefix + ".")}
    module.load_state_dict(sd)


def pack_optimizer(prefix: str, opt: torch.optim.Optimizer, out: dict[str, torch.Tensor]) -> dict:
    """Store per-parameter state as blobs; return JSON-able hyperparameters."""
    sd = opt.state_dict()
    for idx in sorted(sd["state"]):
        for key, val in sorted(sd["state"][idx].items()):
            out[f"{prefix}.{idx}.{key}"] = torch.as_tensor(val)
    groups = []
    for g in sd["param_groups"]:
        groups.append({k: list(v) if isinstance(v, tuple) else v for k, v in g.items()})
    return {"param_groups": groups}


def unpack_optimizer(prefix: str, opt: torch.optim.Optimizer, meta: dict, tensors: dict[str, torch.Tensor]) -> None:
    state: dict[int, dict] = {}
    for name, t in tensors.items():
        if not name.startswith(prefix + "."):
            continue
        idx, key = name[len(prefix) + 1 :].split(".", 1)
        state.setdefault(int(idx), {})[key] = t
    groups = []
    for g in meta["param_groups"]:
        g = dict(g)
        if "betas" in g:
            g["betas"] = tuple(g["betas"])
        groups.append(g)
    opt.load_state_dict({"state": state, "param_groups": groups})
