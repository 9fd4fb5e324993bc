"""Binary checkpoints.

Layout (little-endian)::

    b"SPFG"  u32 version  u32 header_len  header (UTF-8 JSON, sorted keys)
    u32 n_tensors
    n_tensors x [u16 name_len, name, u8 dtype (0=f32, 1=f64), u8 ndim, u32 dims...]
    raw tensor data in table order
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..autodiff.optim import Adam
from .correctors import build_from_config
from .data import Resources

MAGIC = b"SPFG"
FORMAT_VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1}


class CheckpointError(Exception):
    code = 1


class CheckpointFormatError(CheckpointError):
    code = 2


class CheckpointVersionError(CheckpointError):
    code = 3


class CheckpointHashError(CheckpointError):
    code = 4


class CheckpointTruncatedError(CheckpointError):
    code = 5


@dataclass
class Checkpoint:
    header: dict
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def config(self) -> dict:
        return self.header["config"]

    @property
    def step(self) -> int:
        return self.header.get("step", 0)


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    header = json.dumps(ckpt.header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    out = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(header)), header,
           struct.pack("<I", len(ckpt.tensors))]
    for name, arr in ckpt.tensors.items():
        nb = name.encode("utf-8")
        out.append(struct.pack("<H", len(nb)) + nb)
        out.append(struct.pack("<BB", _CODES[arr.dtype], arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
    for arr in ckpt.tensors.values():
        out.append(np.ascontiguousarray(arr, dtype=_DTYPES[_CODES[arr.dtype]]).tobytes())
    return b"".join(out)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf, self.pos = buf, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointTruncatedError(
                f"checkpoint truncated: needed {n} bytes at offset {self.pos}, "
                f"file has {len(self.buf)}"
            )
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_checkpoint(buf: bytes) -> Checkpoint:
    r = _Reader(buf)
    if r.take(4) != MAGIC:
        raise CheckpointFormatError("not a spellforge checkpoint (bad magic)")
    version, hlen = r.unpack("<II")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint format version {version}, this build reads {FORMAT_VERSION}"
        )
    try:
        header = json.loads(r.take(hlen).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointFormatError(f"corrupt checkpoint header: {e}") from None
    (n,) = r.unpack("<I")
    table = []
    for _ in range(n):
        (nlen,) = r.unpack("<H")
        name = r.take(nlen).decode("utf-8")
        code, ndim = r.unpack("<BB")
        if code not in _DTYPES:
            raise CheckpointFormatError(f"unknown dtype code {code} for {name}")
        table.append((name, _DTYPES[code], r.unpack(f"<{ndim}I")))
    tensors = {}
    for name, dtype, shape in table:
        size = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        arr = np.frombuffer(r.take(size), dtype=dtype).reshape(shape)
        tensors[name] = arr.astype(dtype.newbyteorder("="))
    if r.pos != len(buf):
        raise CheckpointFormatError(f"{len(buf) - r.pos} trailing bytes after tensor data")
    return Checkpoint(header, tensors)


def model_checkpoint(model, step: int = 0, optimizer: Adam | None = None,
                     extra: dict | None = None) -> Checkpoint:
    header = {"config": model.config_dict(), "digests": model.resources.digests(),
              "step": step, "max_word_len": model.resources.max_word_len}
    if extra:
        header["extra"] = extra
    tensors = dict(model.state_dict())
    if optimizer is not None:
        s = optimizer.state
        header["optimizer"] = {"step": s.step, "base_lr": s.base_lr,
                               "total_steps": s.total_steps, "skipped": s.skipped}
        for name in s.m:
            tensors[f"optimizer.m.{name}"] = s.m[name]
            tensors[f"optimizer.v.{name}"] = s.v[name]
    return Checkpoint(header, tensors)


def save_checkpoint(model, path, step: int = 0, optimizer: Adam | None = None,
                    extra: dict | None = None) -> None:
    Path(path).write_bytes(encode_checkpoint(model_checkpoint(model, step, optimizer, extra)))


def read_checkpoint(path) -> Checkpoint:
    return decode_checkpoint(Path(path).read_bytes())


def load_checkpoint(path, resources: Resources):
    """Rebuild the model stored at ``path``; vocabularies must match the saved digests."""
    ckpt = read_checkpoint(path)
    have = resources.digests()
    for key, digest in ckpt.header["digests"].items():
        if have.get(key) != digest:
            raise CheckpointHashError(f"{key} does not match the vocabulary the model was trained on")
    model = build_from_config(ckpt.config, resources)
    params = {k: v for k, v in ckpt.tensors.items() if not k.startswith("optimizer.")}
    model.load_state_dict(params)
    model.eval()
    return model
