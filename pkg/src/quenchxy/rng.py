"""Counter-based random streams.

Every stream is a Philox generator whose key is derived from
``(master seed, tag)`` and whose counter block is offset by the stream
index, so streams never overlap and adding a new tag leaves the
existing ones untouched.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _key(seed: int, tag: str) -> np.ndarray:
    h = hashlib.blake2b(f"{int(seed)}/{tag}".encode(), digest_size=16).digest()
    return np.frombuffer(h, dtype=np.uint64).copy()


def bitgen(seed: int, tag: str = "", index: int = 0) -> np.random.Philox:
    if index < 0:
        raise ValueError("stream index must be nonnegative")
    counter = np.zeros(4, dtype=np.uint64)
    counter[2] = np.uint64(index)
    return np.random.Philox(key=_key(seed, tag), counter=counter)


def stream(seed: int, tag: str = "", index: int = 0) -> np.random.Generator:
    """Generator for stream ``index`` of family ``tag`` under ``seed``."""
    return np.random.Generator(bitgen(seed, tag, index))
