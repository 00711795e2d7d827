"""Seeded complex-valued ellipse phantoms."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import rng as rng_mod


@dataclass(frozen=True)
class Ellipse:
    intensity: float
    center: tuple[float, float]  # (x, y) in [-1, 1] image coordinates
    axes: tuple[float, float]  # semi-axes (a along the rotated x, b along the rotated y)
    angle: float = 0.0  # radians


@dataclass(frozen=True)
class Phantom:
    magnitude: np.ndarray
    phase: np.ndarray

    @property
    def image(self) -> np.ndarray:
        return self.magnitude * np.exp(1j * self.phase)

    @property
    def shape(self) -> tuple[int, int]:
        return self.magnitude.shape


def grid_coords(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Pixel-center coordinates in [-1, 1]; x runs along columns, y down the rows."""
    x = (np.arange(width) + 0.5) / width * 2.0 - 1.0
    y = (np.arange(height) + 0.5) / height * 2.0 - 1.0
    return np.meshgrid(x, y)


def ellipse_image(height: int, width: int, ellipses) -> np.ndarray:
    """Sum of filled ellipses, clipped to [0, 1]."""
    xx, yy = grid_coords(height, width)
    img = np.zeros((height, width))
    for e in ellipses:
        dx, dy = xx - e.center[0], yy - e.center[1]
        c, s = math.cos(e.angle), math.sin(e.angle)
        u = c * dx + s * dy
        v = -s * dx + c * dy
        inside = (u / e.axes[0]) ** 2 + (v / e.axes[1]) ** 2 <= 1.0
        img[inside] += e.intensity
    return np.clip(img, 0.0, 1.0)


def random_ellipses(rng: np.random.Generator, n: int) -> list[Ellipse]:
    """A bright outer 'head' ellipse followed by n - 1 interior structures."""
    out = [
        Ellipse(
            intensity=rng.uniform(0.6, 1.0),
            center=(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05)),
            axes=(rng.uniform(0.6, 0.85), rng.uniform(0.7, 0.95)),
            angle=rng.uniform(-0.3, 0.3),
        )
    ]
    for _ in range(n - 1):
        out.append(
            Ellipse(
                intensity=rng.uniform(-0.5, 0.5),
                center=(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)),
                axes=(rng.uniform(0.05, 0.35), rng.uniform(0.05, 0.35)),
                angle=rng.uniform(0.0, math.pi),
            )
        )
    return out


def smooth_phase(height: int, width: int, rng: np.random.Generator, scale: float = 0.5) -> np.ndarray:
    """Second-order polynomial phase in radians."""
    xx, yy = grid_coords(height, width)
    coef = rng.uniform(-scale, scale, size=6)
    return coef[0] + coef[1] * xx + coef[2] * yy + coef[3] * xx * yy + coef[4] * xx**2 + coef[5] * yy**2


def phantom(height: int, width: int, seed: int, n_ellipses: int = 6, ellipses=None) -> Phantom:
    """Deterministic complex phantom; explicit ``ellipses`` bypass the random draw."""
    if n_ellipses < 1:
        raise ValueError("n_ellipses must be >= 1")
    rng = rng_mod.stream(seed, "phantom", height, width)
    shapes = list(ellipses) if ellipses is not None else random_ellipses(rng, n_ellipses)
    mag = ellipse_image(height, width, shapes)
    phase = smooth_phase(height, width, rng)
    return Phantom(mag, phase)
