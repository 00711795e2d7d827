"""Synthetic (zero-filled input, ground truth) pairs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import rng as rng_mod
from ..mrisim import make_mask, phantom, to_channels, undersample


@dataclass
class PairSet:
    inputs: np.ndarray  # n x 2 x H x W zero-filled images
    targets: np.ndarray  # n x 2 x H x W ground truth
    seeds: np.ndarray  # per-image phantom/mask seeds

    def __len__(self) -> int:
        return self.inputs.shape[0]


def image_seeds(seed: int, split: str, n: int) -> np.ndarray:
    return rng_mod.stream(seed, f"data.{split}").integers(0, 2**31 - 1, size=n)


def make_pairs(n: int, size: int, mask_kind: str, af, seed: int, split: str, n_ellipses: int = 6) -> PairSet:
    """``n`` phantoms with independently drawn masks; ``split`` keeps train and
    held-out draws disjoint for the same base seed."""
    seeds = image_seeds(seed, split, n)
    xs, ys = [], []
    for s in seeds:
        ph = phantom(size, size, int(s), n_ellipses=n_ellipses)
        mask = make_mask(mask_kind, size, size, af, int(s))
        _, zf = undersample(ph.image, mask)
        xs.append(to_channels(zf))
        ys.append(to_channels(ph.image))
    return PairSet(np.stack(xs), np.stack(ys), seeds)
