"""k-space undersampling masks.

All masks are defined on the centered spectrum (DC at (H//2, W//2)) and are
shifted back to the unshifted DFT layout only when applied.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .. import rng as rng_mod

CENTER_FRACTIONS = {4: 0.08, 8: 0.04}
RANDOM_CENTER_AREA = 0.04
CALIBRATION_TOLERANCE = 0.05


@dataclass(frozen=True)
class MaskSpec:
    kind: str
    height: int
    width: int
    af: float
    center_fraction: float
    seed: int
    mask: np.ndarray

    @property
    def sampled_fraction(self) -> float:
        return float(self.mask.mean())


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def center_slice(n: int, count: int) -> slice:
    """``count`` consecutive indices centered on n//2."""
    start = n // 2 - count // 2
    return slice(start, start + count)


def cartesian_mask(height: int, width: int, af: int, seed: int, center_fraction: float | None = None) -> MaskSpec:
    """Random 1D Cartesian mask over columns with a fully sampled center band.

    ``center_fraction`` overrides the per-AF default band width.
    """
    if af not in CENTER_FRACTIONS:
        raise ValueError(f"cartesian masks support AF in {sorted(CENTER_FRACTIONS)}, got {af}")
    if width < 8:
        raise ValueError("cartesian masks need width >= 8")
    frac = CENTER_FRACTIONS[af] if center_fraction is None else center_fraction
    n_center = round_half_up(frac * width)
    n_center = min(n_center, width)
    p = (width / af - n_center) / (width - n_center) if n_center < width else 0.0
    if p <= 0:
        warnings.warn(f"center band of {n_center} lines already exceeds W/AF; no random lines drawn")
        p = 0.0
    rng = rng_mod.stream(seed, "mask.cartesian", height, width, af)
    cols = rng.uniform(size=width) < p
    cols[center_slice(width, n_center)] = True
    mask = np.broadcast_to(cols[None, :], (height, width)).astype(np.float64)
    return MaskSpec("cartesian1d", height, width, af, frac, seed, mask)


def _line_pixels(height: int, width: int, angle: float, extent: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Rasterize the line through (H//2, W//2) at ``angle`` by half-pixel stepping.

    ``extent`` < 1 truncates the line to that fraction of the grid diagonal on
    each side of the center.
    """
    ci, cj = height // 2, width // 2
    reach = math.hypot(height, width) * extent
    t = np.arange(-reach, reach + 0.25, 0.5)
    i = np.rint(ci - t * math.sin(angle)).astype(int)
    j = np.rint(cj + t * math.cos(angle)).astype(int)
    keep = (i >= 0) & (i < height) & (j >= 0) & (j < width)
    return i[keep], j[keep]


def radial_spokes(height: int, width: int, n_spokes: int, offset: float = 0.0, extent: float = 1.0) -> np.ndarray:
    """Binary mask of ``n_spokes`` lines through the center spaced pi / n apart."""
    mask = np.zeros((height, width))
    for k in range(n_spokes):
        i, j = _line_pixels(height, width, offset + k * math.pi / n_spokes, extent)
        mask[i, j] = 1.0
    mask[height // 2, width // 2] = 1.0
    return mask


def _calibrated_spokes(height: int, width: int, target: float, offset: float) -> np.ndarray:
    def frac(n, extent=1.0):
        return radial_spokes(height, width, n, offset, extent).mean()

    hi = 1
    while frac(hi) < target and hi < 8 * max(height, width):
        hi *= 2
    lo = max(1, hi // 2)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if frac(mid) < target:
            lo = mid
        else:
            hi = mid
    best = min((lo, hi), key=lambda n: abs(frac(n) - target))
    mask = radial_spokes(height, width, best, offset)
    if abs(mask.mean() - target) > CALIBRATION_TOLERANCE * target and frac(hi) >= target:
        # one spoke too coarse a step: keep n = hi spokes and shorten them all
        a, b = 0.0, 1.0
        for _ in range(40):
            mid = 0.5 * (a + b)
            if frac(hi, mid) < target:
                a = mid
            else:
                b = mid
        ext = min((a, b), key=lambda e: abs(frac(hi, e) - target))
        mask = radial_spokes(height, width, hi, offset, ext)
    if abs(mask.mean() - target) > CALIBRATION_TOLERANCE * target:
        raise ValueError(f"radial mask cannot reach sampled fraction {target:.4f} on {height}x{width}")
    return mask


def radial_mask(height: int, width: int, af: float, seed: int) -> MaskSpec:
    """Equispaced spokes through the center, count binary-searched to hit 1/AF.

    The seed draws a global rotation of the spoke set. When no whole spoke
    count lands within 5% of 1/AF, the spokes are shortened symmetrically
    until it does.
    """
    if af < 1:
        raise ValueError("acceleration factor must be >= 1")
    if af == 1:
        return MaskSpec("radial", height, width, af, 1.0, seed, np.ones((height, width)))
    rng = rng_mod.stream(seed, "mask.radial", height, width)
    offset = rng.uniform(0.0, math.pi)
    mask = _calibrated_spokes(height, width, 1.0 / af, offset)
    return MaskSpec("radial", height, width, af, 0.0, seed, mask)


def random_mask(height: int, width: int, af: float, seed: int) -> MaskSpec:
    """Fully sampled central square (4% of the area) plus uniformly random points.

    Each outer point gets a uniform draw u; points with u below a threshold
    p are sampled, p chosen so the total count is round(H*W/AF).
    """
    if af < 1:
        raise ValueError("acceleration factor must be >= 1")
    if af == 1:
        return MaskSpec("random2d", height, width, af, 1.0, seed, np.ones((height, width)))
    side_h = max(1, round_half_up(math.sqrt(RANDOM_CENTER_AREA) * height))
    side_w = max(1, round_half_up(math.sqrt(RANDOM_CENTER_AREA) * width))
    mask = np.zeros((height, width))
    mask[center_slice(height, side_h), center_slice(width, side_w)] = 1.0
    target = round_half_up(height * width / af)
    need = target - int(mask.sum())
    if need < 0:
        raise ValueError(f"center square already exceeds the 1/AF budget for AF={af}")
    rng = rng_mod.stream(seed, "mask.random", height, width)
    u = rng.uniform(size=(height, width))
    u[mask > 0] = np.inf
    if need:
        flat = np.argsort(u, axis=None, kind="stable")[:need]
        mask.reshape(-1)[flat] = 1.0
    frac = mask.mean()
    if abs(frac - 1.0 / af) > CALIBRATION_TOLERANCE / af:
        raise ValueError(f"random mask cannot reach sampled fraction {1 / af:.4f} on {height}x{width}")
    return MaskSpec("random2d", height, width, af, side_h * side_w / (height * width), seed, mask)


MASK_KINDS = {"cartesian": cartesian_mask, "radial": radial_mask, "random": random_mask}


def make_mask(kind: str, height: int, width: int, af, seed: int) -> MaskSpec:
    try:
        fn = MASK_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown mask kind {kind!r}; expected one of {sorted(MASK_KINDS)}") from None
    return fn(height, width, af, seed)
