from __future__ import annotations

import zlib

import numpy as np


def substream(seed: int, name: str, *ids: int) -> np.random.Generator:
    """Return an independent counter-based generator for (seed, name, *ids).

    The same arguments always yield the same stream, regardless of how many other
    streams were drawn before it, so serial and parallel callers agree bit-exactly.
    """

    entropy = [int(seed) & 0xFFFFFFFF, zlib.crc32(name.encode("utf-8"))]
    entropy.extend(int(value) & 0xFFFFFFFF for value in ids)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
