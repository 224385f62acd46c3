"""Binary checkpoints: NAPCKPT magic, config text block, named float32 tensors."""

from __future__ import annotations

import struct
from dataclasses import fields
from pathlib import Path

import numpy as np

from .errors import CompatibilityError
from .model import NapConfig, NapModel

MAGIC = b"NAPCKPT"
VERSION = 1


def config_to_text(config, seed, meta=None):
    lines = [f"seed = {seed}"]
    for f in fields(NapConfig):
        value = getattr(config, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{f.name} = {value}")
    for key in sorted(meta or {}):
        lines.append(f"meta.{key} = {meta[key]}")
    return "\n".join(lines) + "\n"


def config_from_text(text):
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CompatibilityError(f"checkpoint config line {lineno}: missing '='")
        key, value = (part.strip() for part in line.split("=", 1))
        raw[key] = value
    meta = {k[len("meta."):]: raw.pop(k) for k in list(raw) if k.startswith("meta.")}
    seed = int(raw.pop("seed", "0"))
    kwargs = {}
    for f in fields(NapConfig):
        if f.name not in raw:
            continue
        value = raw.pop(f.name)
        if f.type == "bool":
            kwargs[f.name] = value.lower() in ("true", "1", "yes")
        elif f.type == "int":
            kwargs[f.name] = int(value)
        else:
            kwargs[f.name] = value
    if raw:
        raise CompatibilityError(f"unknown checkpoint config keys: {sorted(raw)}")
    return NapConfig(**kwargs), seed, meta


def save_checkpoint(model, path, meta=None):
    """Write magic, version, config block, then every named tensor as float32 LE."""
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", VERSION)
    if meta is None:
        meta = getattr(model, "meta", None)
    cfg_bytes = config_to_text(model.config, model.seed, meta).encode("utf-8")
    blob += struct.pack("<Q", len(cfg_bytes))
    blob += cfg_bytes
    names = model.store.names()
    blob += struct.pack("<I", len(names))
    for name in names:
        data = model.store.params[name].data.astype("<f4")
        name_bytes = name.encode("utf-8")
        blob += struct.pack("<I", len(name_bytes))
        blob += name_bytes
        blob += struct.pack("<I", data.ndim)
        for extent in data.shape:
            blob += struct.pack("<I", extent)
        blob += data.tobytes()
    Path(path).write_bytes(bytes(blob))


class _Reader:
    def __init__(self, buf, path):
        self.buf = buf
        self.pos = 0
        self.path = path

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise CompatibilityError(f"{self.path}: truncated checkpoint")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]

    def u64(self):
        return struct.unpack("<Q", self.take(8))[0]


def load_checkpoint(path):
    """Parse and validate a checkpoint fully, then build the model."""
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise CompatibilityError(f"cannot read checkpoint {path}: {exc}") from exc
    r = _Reader(buf, path)
    if r.take(len(MAGIC)) != MAGIC:
        raise CompatibilityError(f"{path}: bad magic, not a NAPCKPT file")
    version = r.u32()
    if version != VERSION:
        raise CompatibilityError(f"{path}: unsupported checkpoint version {version}")
    config, seed, meta = config_from_text(r.take(r.u64()).decode("utf-8"))
    n_tensors = r.u32()
    tensors = {}
    for _ in range(n_tensors):
        name = r.take(r.u32()).decode("utf-8")
        rank = r.u32()
        shape = tuple(r.u32() for _ in range(rank))
        count = int(np.prod(shape, dtype=np.int64)) if rank else 1
        data = np.frombuffer(r.take(count * 4), dtype="<f4").reshape(shape)
        tensors[name] = data
    if r.pos != len(buf):
        raise CompatibilityError(f"{path}: {len(buf) - r.pos} trailing bytes")

    model = NapModel(config, seed=seed, dtype=np.float32)
    expected = set(model.store.names())
    got = set(tensors)
    if expected != got:
        missing = sorted(expected - got)
        extra = sorted(got - expected)
        raise CompatibilityError(f"{path}: tensor set mismatch "
                                 f"(missing {missing}, unexpected {extra})")
    for name, data in tensors.items():
        param = model.store.params[name]
        if param.data.shape != data.shape:
            raise CompatibilityError(f"{path}: tensor '{name}' shape {data.shape} "
                                     f"!= expected {param.data.shape}")
        param.data[...] = data
    model.meta = meta
    return model
