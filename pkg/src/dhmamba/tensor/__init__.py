from .core import Tensor, as_tensor, make_node, parameter
from . import functional
from .functional import (
    activation,
    channel_attention,
    concat,
    conv2d,
    einsum,
    gelu,
    l1_loss,
    layer_norm,
    pixel_shuffle,
    pixel_unshuffle,
    sigmoid,
    silu,
    softplus,
    upsample_nearest,
)
from .gradcheck import grad_check, numerical_grad

__all__ = [
    "Tensor",
    "activation",
    "as_tensor",
    "channel_attention",
    "concat",
    "conv2d",
    "einsum",
    "functional",
    "gelu",
    "grad_check",
    "l1_loss",
    "layer_norm",
    "make_node",
    "numerical_grad",
    "parameter",
    "pixel_shuffle",
    "pixel_unshuffle",
    "sigmoid",
    "silu",
    "softplus",
    "upsample_nearest",
]
