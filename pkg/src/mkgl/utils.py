"""Shared helpers: stable seed derivation and parameter hashing."""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(root, *tags):
    """Stable 32-bit seed from a root seed and string/int tags.

    Uses sha256 so derived streams are identical across runs and platforms;
    never use Python's salted hash() for this.
    """
    h = hashlib.sha256()
    h.update(str(int(root)).encode())
    for tag in tags:
        h.update(b"/")
        h.update(str(tag).encode())
    return int.from_bytes(h.digest()[:4], "little")


def rng_for(root, *tags):
    return np.random.default_rng(derive_seed(root, *tags))


def tensor_fingerprint(tensors):
    """sha256 over the exact bytes of named arrays, order-independent."""
    h = hashlib.sha256()
    for name in sorted(tensors):
        arr = tensors[name]
        data = arr.data if hasattr(arr, "data") and not isinstance(arr, np.ndarray) else arr
        h.update(name.encode())
        h.update(np.ascontiguousarray(data).tobytes())
    return h.hexdigest()
