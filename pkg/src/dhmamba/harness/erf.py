"""Effective receptive field maps: |d output[center] / d input| summed over channels."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..tensor import Tensor, conv2d
from ..tensor import functional as F


def erf_map(forward: Callable[[Tensor], Tensor], image, center: tuple[int, int]) -> np.ndarray:
    """Gradient magnitude map of the output at ``center`` w.r.t. a C x H x W input.

    All output channels at the center pixel are summed before differentiating;
    the absolute input gradient is then summed over input channels.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3:
        raise ValueError(f"expected a C x H x W image, got shape {image.shape}")
    _, h, w = image.shape
    i, j = center
    if not (0 <= i < h and 0 <= j < w):
        raise ValueError(f"center {center} outside the {h}x{w} grid")
    x = Tensor(image[None].copy(), requires_grad=True)
    out = forward(x)
    F.sum(out[0, :, i, j]).backward()
    return np.abs(x.grad[0]).sum(axis=0)


def support(erf: np.ndarray) -> int:
    """Number of pixels with a nonzero gradient."""
    return int(np.count_nonzero(erf))


def conv_control(channels: int = 2, seed: int = 0) -> Callable[[Tensor], Tensor]:
    """Single 3x3 convolution with an identity center tap plus random weights:
    its receptive field is exactly the 3x3 neighbourhood."""
    rng = np.random.default_rng(seed)
    w = rng.uniform(0.1, 1.0, size=(channels, channels, 3, 3))
    w[:, :, 1, 1] += np.eye(channels)
    wt = Tensor(w)
    return lambda x: conv2d(x, wt, padding=1)
