"""Undersampling of fully sampled images and the network input encoding."""

from __future__ import annotations

import numpy as np

from ..fourier import ComplexGrid, fft2_array, ifft2_array, ifftshift_array
from .masks import MaskSpec


def undersample(image, mask: MaskSpec | np.ndarray) -> tuple[ComplexGrid, np.ndarray]:
    """Return the masked spectrum K_s and the zero-filled image IFFT(K_s).

    ``mask`` lives on the centered spectrum and is unshifted before the
    elementwise product with the raw DFT.
    """
    image = np.asarray(image, dtype=np.complex128)
    m = mask.mask if isinstance(mask, MaskSpec) else np.asarray(mask, dtype=np.float64)
    if m.shape != image.shape:
        raise ValueError(f"mask shape {m.shape} does not match image shape {image.shape}")
    k = fft2_array(image)
    ks = ifftshift_array(m) * k
    return ComplexGrid.from_complex(ks), ifft2_array(ks)


def to_channels(z) -> np.ndarray:
    """Complex H x W -> 2 x H x W (real, imaginary)."""
    z = np.asarray(z)
    return np.stack([z.real, z.imag]).astype(np.float64)


def from_channels(x) -> np.ndarray:
    x = np.asarray(x)
    return x[0] + 1j * x[1]


def magnitude(x) -> np.ndarray:
    """Magnitude of a 2 x H x W channel pair (or of a complex array)."""
    x = np.asarray(x)
    if np.iscomplexobj(x):
        return np.abs(x)
    return np.sqrt(x[0] ** 2 + x[1] ** 2)
