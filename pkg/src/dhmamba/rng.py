"""Seeded random streams split by purpose label.

``stream(seed, "mask", 3)`` always yields the same PCG64 generator, and
streams for different labels are statistically independent because the
label is hashed into the SeedSequence entropy. This keeps mask draws,
phantom draws and weight initialization from perturbing each other.
"""

from __future__ import annotations

import os
import zlib

import numpy as np

ENV_SEED = "DHMAMBA_SEED"


def _label_key(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def stream(seed: int, label: str, *extra: int) -> np.random.Generator:
    entropy = [int(seed) & 0xFFFFFFFF, _label_key(label), *(int(e) & 0xFFFFFFFF for e in extra)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def default_seed(fallback: int = 0) -> int:
    """Seed from the DHMAMBA_SEED environment variable, else ``fallback``."""
    value = os.environ.get(ENV_SEED)
    if value is None or value.strip() == "":
        return fallback
    return int(value)
