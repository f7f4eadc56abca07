"""Flat binary parameter container plus a JSON text manifest of the model config.

Layout (little endian)::

    b"MGCK" | u32 version | u32 count
    repeat count times:
        u32 path_len | path (utf-8) | u32 ndim | u64 * ndim shape | f64 * prod(shape) values
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import torch

from ..core import ContractViolation
from .models import GMSDH, GMSEB, ModelConfig

__all__ = ["MAGIC", "VERSION", "save_checkpoint", "load_checkpoint", "read_tensors", "write_tensors"]

MAGIC = b"MGCK"
VERSION = 1
MODEL_TYPES = {"gms-eb": GMSEB, "gms-dh": GMSDH}


def write_tensors(path, tensors: dict) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<II", VERSION, len(tensors)))
        for name, t in tensors.items():
            arr = np.asarray(t.detach().cpu().numpy(), dtype="<f8", order="C")  # keeps 0-d shapes
            key = name.encode("utf-8")
            fh.write(struct.pack("<I", len(key)) + key)
            fh.write(struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes())


def read_tensors(path) -> dict:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ContractViolation(f"{path}: not a parameter container")
    version, count = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise ContractViolation(f"{path}: unsupported container version {version}")
    try:
        out, pos = _parse(data, count)
    except (struct.error, ValueError) as exc:
        raise ContractViolation(f"{path}: truncated or corrupt container ({exc})") from None
    if pos != len(data):
        raise ContractViolation(f"{path}: trailing bytes after {count} tensors")
    return out


def _parse(data: bytes, count: int) -> tuple[dict, int]:
    pos = 12
    out = {}
    for _ in range(count):
        (klen,) = struct.unpack_from("<I", data, pos)
        pos += 4
        name = data[pos : pos + klen].decode("utf-8")
        pos += klen
        (ndim,) = struct.unpack_from("<I", data, pos)
        pos += 4
        shape = struct.unpack_from(f"<{ndim}Q", data, pos)
        pos += 8 * ndim
        size = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(data, dtype="<f8", count=size, offset=pos).reshape(shape)
        pos += 8 * size
        out[name] = torch.from_numpy(arr.astype(np.float64))
    return out, pos


def _manifest_path(path) -> Path:
    return Path(str(path) + ".json")


def save_checkpoint(model, path, extra: dict | None = None) -> None:
    kind = "gms-eb" if isinstance(model, GMSEB) else "gms-dh"
    write_tensors(path, dict(model.state_dict()))
    manifest = {"format": "MGCK", "version": VERSION, "model": kind, "config": model.cfg.to_dict()}
    if extra:
        manifest.update(extra)
    _manifest_path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_checkpoint(path):
    mpath = _manifest_path(path)
    if not mpath.exists():
        raise ContractViolation(f"{path}: manifest {mpath.name} not found")
    manifest = json.loads(mpath.read_text())
    kind = manifest.get("model")
    if kind not in MODEL_TYPES:
        raise ContractViolation(f"{mpath}: unknown model type {kind!r}")
    model = MODEL_TYPES[kind](ModelConfig(**manifest["config"]))
    tensors = read_tensors(path)
    state = model.state_dict()
    missing = set(state) - set(tensors)
    unknown = set(tensors) - set(state)
    if missing or unknown:
        raise ContractViolation(f"{path}: parameter mismatch (missing {sorted(missing)}, unknown {sorted(unknown)})")
    for k, v in tensors.items():
        if tuple(v.shape) != tuple(state[k].shape):
            raise ContractViolation(f"{path}: shape mismatch for {k}")
    model.load_state_dict(tensors)
    return model
