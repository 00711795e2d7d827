"""Scan paths that flatten H x W maps into sequences and back.

Two families of four paths each:

* raster paths (image domain): row-major forward/backward and
  column-major forward/backward;
* circular paths (k-space): positions grouped into square rings around the
  centered DC bin, low ring first, each ring traversed by angle. The four
  variants differ in start angle (0 or 180 degrees) and direction.

A :class:`ScanPath` stores ``order`` (grid position visited at step t) and
its inverse permutation so inversion is an exact gather.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor, conv2d
from .tensor import functional as F


@dataclass(frozen=True)
class ScanPath:
    height: int
    width: int
    order: np.ndarray
    inverse: np.ndarray = field(repr=False)
    name: str = ""

    @classmethod
    def from_order(cls, height: int, width: int, order, name: str = "") -> ScanPath:
        order = np.asarray(order, dtype=np.intp)
        n = height * width
        if order.shape != (n,) or not np.array_equal(np.sort(order), np.arange(n)):
            raise ValueError(f"order is not a permutation of 0..{n - 1}")
        inverse = np.empty(n, dtype=np.intp)
        inverse[order] = np.arange(n)
        order.setflags(write=False)
        inverse.setflags(write=False)
        return cls(height, width, order, inverse, name)

    @property
    def length(self) -> int:
        return self.height * self.width

    def positions(self) -> np.ndarray:
        """(L, 2) array of (i, j) visited at each step."""
        return np.stack(np.divmod(self.order, self.width), axis=1)


@dataclass(frozen=True)
class HierarchySpec:
    """Stride ``s`` and the number of low-resolution paths (the last ``n_lr`` of the four)."""

    stride: int = 2
    n_lr: int = 3

    def __post_init__(self):
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if not 0 <= self.n_lr <= 4:
            raise ValueError("n_lr must be in 0..4")

    @property
    def n_hr(self) -> int:
        return 4 - self.n_lr


def raster_paths(height: int, width: int) -> list[ScanPath]:
    if height < 1 or width < 1:
        raise ValueError("grid dimensions must be >= 1")
    row = np.arange(height * width)
    col = np.arange(height * width).reshape(height, width).T.reshape(-1)
    return [
        ScanPath.from_order(height, width, row, "row"),
        ScanPath.from_order(height, width, row[::-1], "row_rev"),
        ScanPath.from_order(height, width, col, "col"),
        ScanPath.from_order(height, width, col[::-1], "col_rev"),
    ]


CIRCULAR_VARIANTS = (
    ("ring_0_cw", 0.0, True),
    ("ring_0_ccw", 0.0, False),
    ("ring_180_cw", math.pi, True),
    ("ring_180_ccw", math.pi, False),
)


def ring_index(height: int, width: int) -> np.ndarray:
    """Chebyshev distance of every position from (H//2, W//2), as an H x W array."""
    ii, jj = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    return np.maximum(np.abs(ii - height // 2), np.abs(jj - width // 2))


def _angles(height: int, width: int) -> np.ndarray:
    ii, jj = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    # row index grows downward; flip it so counter-clockwise is the usual sense on screen
    up = (height // 2 - ii).astype(np.float64)
    right = (jj - width // 2).astype(np.float64)
    return np.arctan2(up, right)


def circular_path(height: int, width: int, start: float, clockwise: bool, name: str = "") -> ScanPath:
    """Ring-by-ring path on a centered spectrum, starting each ring at angle ``start``."""
    if height < 1 or width < 1:
        raise ValueError("grid dimensions must be >= 1")
    ring = ring_index(height, width).reshape(-1)
    theta = _angles(height, width).reshape(-1)
    rel = (start - theta) if clockwise else (theta - start)
    rel = np.mod(rel, 2 * math.pi)
    rel = np.where(np.isclose(rel, 2 * math.pi, rtol=0, atol=1e-12), 0.0, rel)
    ii, jj = np.divmod(np.arange(height * width), width)
    # lexsort: last key is primary
    order = np.lexsort((jj, ii, np.round(rel, 12), ring))
    return ScanPath.from_order(height, width, order, name)


def circular_paths(height: int, width: int) -> list[ScanPath]:
    return [circular_path(height, width, s, cw, name) for name, s, cw in CIRCULAR_VARIANTS]


def apply_path(f: Tensor, path: ScanPath) -> Tensor:
    """B x C x H x W -> B x C x L, element t taken from grid position ``order[t]``."""
    b, c, h, w = f.shape
    if (h, w) != (path.height, path.width):
        raise ValueError(f"path is {path.height}x{path.width}, feature map is {h}x{w}")
    return F.take(F.reshape(f, (b, c, h * w)), path.order, axis=2)


def invert_path(seq: Tensor, path: ScanPath) -> Tensor:
    """B x C x L -> B x C x H x W, the exact inverse of :func:`apply_path`."""
    b, c, n = seq.shape
    if n != path.length:
        raise ValueError(f"sequence length {n} does not match path length {path.length}")
    return F.reshape(F.take(seq, path.inverse, axis=2), (b, c, path.height, path.width))


def padded_size(n: int, s: int) -> int:
    return -(-n // s) * s


def hierarchical_downsample(f: Tensor, s: int, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Strided depthwise s x s convolution; odd sizes are edge-padded up to a multiple of s."""
    b, c, h, w = f.shape
    if weight.shape != (c, 1, s, s):
        raise ValueError(f"depthwise kernel must be ({c}, 1, {s}, {s}), got {weight.shape}")
    f = F.pad_replicate(f, padded_size(h, s) - h, padded_size(w, s) - w)
    return conv2d(f, weight, bias, stride=s, padding=0, groups=c)


def dump_rows(path: ScanPath) -> list[tuple[int, int, int, int]]:
    """(t, i, j, ring) rows for inspection; ring is the Chebyshev ring around the center."""
    ring = ring_index(path.height, path.width)
    return [(t, int(i), int(j), int(ring[i, j])) for t, (i, j) in enumerate(path.positions())]


def get_paths(kind: str, height: int, width: int) -> list[ScanPath]:
    if kind == "raster":
        return raster_paths(height, width)
    if kind == "circular":
        return circular_paths(height, width)
    raise ValueError(f"unknown path family {kind!r}")
