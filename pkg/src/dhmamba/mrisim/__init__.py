from .kspace import from_channels, magnitude, to_channels, undersample
from .masks import MaskSpec, cartesian_mask, make_mask, radial_mask, radial_spokes, random_mask
from .metrics import MetricsReport, metrics, nmse, psnr, ssim
from .phantom import Ellipse, Phantom, ellipse_image, phantom

__all__ = [
    "Ellipse",
    "MaskSpec",
    "MetricsReport",
    "Phantom",
    "cartesian_mask",
    "ellipse_image",
    "from_channels",
    "magnitude",
    "make_mask",
    "metrics",
    "nmse",
    "phantom",
    "psnr",
    "radial_mask",
    "radial_spokes",
    "random_mask",
    "ssim",
    "to_channels",
    "undersample",
]
