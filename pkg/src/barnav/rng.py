"""Named, independent random sub-streams derived from a single root seed."""
from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFF
    return zlib.crc32(str(part).encode("utf-8"))


def stream_seed(root: int, *names) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(root), spawn_key=tuple(_key(n) for n in names))


def substream(root: int, *names) -> np.random.Generator:
    """Generator for the stream ``names`` under ``root``; stable across runs and platforms."""
    return np.random.default_rng(stream_seed(root, *names))


def derive_seed(root: int, *names) -> int:
    return int(stream_seed(root, *names).generate_state(1, dtype=np.uint32)[0])
