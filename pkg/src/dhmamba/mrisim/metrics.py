"""NMSE, PSNR and SSIM on magnitude images (fastMRI conventions)."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

PSNR_CAP = 100.0
SSIM_WIN = 7
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True)
class MetricsReport:
    nmse: float
    ssim: float
    psnr: float

    def as_dict(self) -> dict:
        return asdict(self)


def nmse(x_hat, x) -> float:
    x_hat, x = np.asarray(x_hat, dtype=np.float64), np.asarray(x, dtype=np.float64)
    ref = float(np.sum(x * x))
    if ref == 0.0:
        raise ValueError("NMSE is undefined for an all-zero reference")
    return float(np.sum((x_hat - x) ** 2) / ref)


def psnr(x_hat, x, cap: float = PSNR_CAP) -> float:
    """10 log10(max(x)^2 / MSE), capped so perfect reconstructions stay finite."""
    x_hat, x = np.asarray(x_hat, dtype=np.float64), np.asarray(x, dtype=np.float64)
    mse = float(np.mean((x_hat - x) ** 2))
    peak = float(x.max())
    if mse == 0.0:
        return cap
    if peak <= 0.0:
        raise ValueError("PSNR needs a positive reference maximum")
    return float(min(cap, 10.0 * np.log10(peak * peak / mse)))


def _box_sums(a: np.ndarray, win: int) -> np.ndarray:
    """Sum over every valid win x win window via a 2D cumulative sum."""
    c = np.zeros((a.shape[0] + 1, a.shape[1] + 1))
    c[1:, 1:] = a.cumsum(0).cumsum(1)
    return c[win:, win:] - c[:-win, win:] - c[win:, :-win] + c[:-win, :-win]


def ssim(x_hat, x, win: int = SSIM_WIN, data_range: float | None = None) -> float:
    """Mean SSIM over all valid windows, uniform weights and sample covariances."""
    x_hat, x = np.asarray(x_hat, dtype=np.float64), np.asarray(x, dtype=np.float64)
    if x_hat.shape != x.shape:
        raise ValueError(f"shape mismatch {x_hat.shape} vs {x.shape}")
    if min(x.shape) < win:
        raise ValueError(f"images must be at least {win}x{win} for SSIM")
    if data_range is None:
        data_range = float(x.max())
    np_ = win * win
    cov_norm = np_ / (np_ - 1.0)

    def mean_of(a):
        return _box_sums(a, win) / np_

    ux, uy = mean_of(x_hat), mean_of(x)
    uxx, uyy, uxy = mean_of(x_hat * x_hat), mean_of(x * x), mean_of(x_hat * x)
    vx = cov_norm * (uxx - ux * ux)
    vy = cov_norm * (uyy - uy * uy)
    vxy = cov_norm * (uxy - ux * uy)
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    s = ((2 * ux * uy + c1) * (2 * vxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
    return float(s.mean())


def metrics(x_hat, x) -> MetricsReport:
    return MetricsReport(nmse=nmse(x_hat, x), ssim=ssim(x_hat, x), psnr=psnr(x_hat, x))
