"""2D discrete Fourier transforms between the image domain and k-space.

Convention: the forward transform is unnormalized, the inverse carries the
1/(H*W) factor. Power-of-two axis lengths go through a recursive radix-2
Cooley-Tukey split; every other length uses the direct O(N^2) DFT.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class ComplexGrid:
    """H x W complex grid stored as separate real and imaginary planes."""

    re: np.ndarray
    im: np.ndarray

    def __post_init__(self):
        re = np.asarray(self.re, dtype=np.float64)
        im = np.asarray(self.im, dtype=np.float64)
        if re.ndim != 2 or re.shape != im.shape:
            raise ValueError(f"re/im must be equal 2D shapes, got {re.shape} and {im.shape}")
        object.__setattr__(self, "re", re)
        object.__setattr__(self, "im", im)

    @property
    def height(self) -> int:
        return self.re.shape[0]

    @property
    def width(self) -> int:
        return self.re.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.re.shape

    def to_complex(self) -> np.ndarray:
        return self.re + 1j * self.im

    @classmethod
    def from_complex(cls, z) -> ComplexGrid:
        z = np.asarray(z)
        return cls(np.real(z).copy(), np.imag(z).copy())

    @classmethod
    def from_real(cls, x) -> ComplexGrid:
        x = np.asarray(x, dtype=np.float64)
        return cls(x.copy(), np.zeros_like(x))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.re)) and np.all(np.isfinite(self.im)))


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@lru_cache(maxsize=64)
def _dft_matrix(n: int, inverse: bool) -> np.ndarray:
    k = np.arange(n)
    sign = 1.0 if inverse else -1.0
    # reduce k*j mod n before scaling so large products keep full angular precision
    return np.exp(sign * 2j * np.pi * ((k[:, None] * k[None, :]) % n) / n)


@lru_cache(maxsize=64)
def _twiddles(n: int, inverse: bool) -> np.ndarray:
    sign = 1.0 if inverse else -1.0
    return np.exp(sign * 2j * np.pi * np.arange(n // 2) / n)


def _fft_pow2(z: np.ndarray, inverse: bool) -> np.ndarray:
    n = z.shape[-1]
    if n == 1:
        return z
    even = _fft_pow2(z[..., 0::2], inverse)
    odd = _fft_pow2(z[..., 1::2], inverse) * _twiddles(n, inverse)
    return np.concatenate([even + odd, even - odd], axis=-1)


def _fft_last_axis(z: np.ndarray, inverse: bool) -> np.ndarray:
    n = z.shape[-1]
    if _is_pow2(n):
        return _fft_pow2(z, inverse)
    return z @ _dft_matrix(n, inverse)  # symmetric matrix, so row-vector form is fine


def fft2_array(z, inverse: bool = False) -> np.ndarray:
    """Transform the last two axes of a (batched) complex array.

    Forward is unnormalized; ``inverse=True`` applies the 1/(H*W) factor.
    """
    z = np.asarray(z, dtype=np.complex128)
    if z.ndim < 2:
        raise ValueError("fft2_array needs at least 2 dimensions")
    h, w = z.shape[-2:]
    out = _fft_last_axis(z, inverse)
    out = np.swapaxes(_fft_last_axis(np.swapaxes(out, -1, -2), inverse), -1, -2)
    if inverse:
        out = out / (h * w)
    return out


def ifft2_array(z) -> np.ndarray:
    return fft2_array(z, inverse=True)


def fftshift_array(z) -> np.ndarray:
    """Move the DC bin at (0, 0) to (H//2, W//2) along the last two axes."""
    h, w = np.shape(z)[-2:]
    return np.roll(z, (h // 2, w // 2), axis=(-2, -1))


def ifftshift_array(z) -> np.ndarray:
    h, w = np.shape(z)[-2:]
    return np.roll(z, (-(h // 2), -(w // 2)), axis=(-2, -1))


def fft2(g: ComplexGrid) -> ComplexGrid:
    return ComplexGrid.from_complex(fft2_array(g.to_complex()))


def ifft2(g: ComplexGrid) -> ComplexGrid:
    return ComplexGrid.from_complex(ifft2_array(g.to_complex()))


def fftshift(g: ComplexGrid) -> ComplexGrid:
    return ComplexGrid(fftshift_array(g.re), fftshift_array(g.im))


def ifftshift(g: ComplexGrid) -> ComplexGrid:
    return ComplexGrid(ifftshift_array(g.re), ifftshift_array(g.im))


def naive_dft2(z, inverse: bool = False) -> np.ndarray:
    """Quadruple-loop DFT used as an independent reference in checks."""
    z = np.asarray(z, dtype=np.complex128)
    h, w = z.shape
    sign = 1.0 if inverse else -1.0
    out = np.zeros((h, w), dtype=np.complex128)
    for u in range(h):
        for v in range(w):
            acc = 0j
            for i in range(h):
                for j in range(w):
                    acc += z[i, j] * np.exp(sign * 2j * np.pi * (u * i / h + v * j / w))
            out[u, v] = acc
    if inverse:
        out /= h * w
    return out
