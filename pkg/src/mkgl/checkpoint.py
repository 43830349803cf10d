"""Versioned binary checkpoint of named f32 tensors.

Layout: magic, format version, tensor count, then per tensor a length-prefixed
UTF-8 name, rank, little-endian u32 dims, and the raw little-endian f32 payload
in C order. Deterministic byte-for-byte given the same mapping.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .autodiff import Tensor

MAGIC = b"MKGLCKPT"
VERSION = 1


def save_checkpoint(path, tensors):
    """Write {name: Tensor|ndarray} to `path` in name-sorted order."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(tensors)))
        for name in sorted(tensors):
            arr = tensors[name]
            data = arr.data if isinstance(arr, Tensor) else np.asarray(arr)
            data = np.ascontiguousarray(data, dtype="<f4")
            enc = name.encode("utf-8")
            fh.write(struct.pack("<H", len(enc)))
            fh.write(enc)
            fh.write(struct.pack("<B", data.ndim))
            fh.write(struct.pack(f"<{data.ndim}I", *data.shape))
            fh.write(data.tobytes())


def load_checkpoint(path):
    """Read a checkpoint back as {name: float32 ndarray}."""
    path = Path(path)
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        version, count = struct.unpack("<II", fh.read(8))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        out = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<H", fh.read(2))
            name = fh.read(nlen).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            n = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(fh.read(4 * n), dtype="<f4").reshape(shape)
            out[name] = data.astype(np.float32)
        return out


def load_into(path, tensors):
    """Load a checkpoint into existing Tensors, checking names and shapes."""
    stored = load_checkpoint(path)
    missing = set(tensors) - set(stored)
    extra = set(stored) - set(tensors)
    if missing or extra:
        raise ValueError(f"checkpoint mismatch: missing={sorted(missing)} extra={sorted(extra)}")
    for name, t in tensors.items():
        if stored[name].shape != t.data.shape:
            raise ValueError(f"checkpoint tensor '{name}': shape {stored[name].shape} != {t.data.shape}")
        t.data = stored[name].astype(t.data.dtype)
