"""Differentiable primitives on :class:`~dhmamba.tensor.core.Tensor`.

Each primitive computes its forward value with numpy and registers a
closure returning one gradient per input. Broadcasting is limited to what
elementwise arithmetic needs (per-channel scales and biases).
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import special

from .. import fourier
from .core import Tensor, as_tensor, make_node

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---------------------------------------------------------------- arithmetic
def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return make_node(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
        "add",
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return make_node(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
        "sub",
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return make_node(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
        "mul",
    )


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data
    return make_node(
        out,
        (a, b),
        lambda g: (_unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)),
        "div",
    )


def add_n(tensors) -> Tensor:
    """Sum of equally shaped tensors as one tape node."""
    tensors = [as_tensor(t) for t in tensors]
    out = tensors[0].data.copy()
    for t in tensors[1:]:
        out = out + t.data
    return make_node(out, tensors, lambda g: [g] * len(tensors), "add_n")


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)
    return make_node(out, (x,), lambda g: (g * out,), "exp")


def log(x: Tensor) -> Tensor:
    return make_node(np.log(x.data), (x,), lambda g: (g / x.data,), "log")


def abs(x: Tensor) -> Tensor:  # noqa: A001
    return make_node(np.abs(x.data), (x,), lambda g: (g * np.sign(x.data),), "abs")


def square(x: Tensor) -> Tensor:
    return make_node(x.data * x.data, (x,), lambda g: (2.0 * g * x.data,), "square")


# ---------------------------------------------------------------- reductions
def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    out = np.sum(x.data, axis=axis, keepdims=keepdims)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return make_node(np.asarray(out), (x,), back, "sum")


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = np.mean(x.data, axis=axis, keepdims=keepdims)
    count = x.data.size / np.asarray(out).size

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, x.shape).copy(),)

    return make_node(np.asarray(out), (x,), back, "mean")


# ------------------------------------------------------------------- shaping
def reshape(x: Tensor, shape) -> Tensor:
    return make_node(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),), "reshape")


def transpose(x: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return make_node(
        np.ascontiguousarray(np.transpose(x.data, axes)),
        (x,),
        lambda g: (np.transpose(g, inv),),
        "transpose",
    )


def _is_basic_index(idx) -> bool:
    items = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(i, (slice, int, type(None), type(Ellipsis))) for i in items)


def getitem(x: Tensor, idx) -> Tensor:
    out = x.data[idx]
    basic = _is_basic_index(idx)

    def back(g):
        full = np.zeros_like(x.data)
        if basic:
            full[idx] += g
        else:
            np.add.at(full, idx, g)
        return (full,)

    return make_node(np.array(out), (x,), back, "getitem")


def take(x: Tensor, indices, axis: int) -> Tensor:
    """Gather along ``axis``; duplicate indices accumulate in the backward pass."""
    indices = np.asarray(indices, dtype=np.intp)
    axis = axis % x.ndim
    out = np.take(x.data, indices, axis=axis)
    n = x.shape[axis]
    unique = indices.ndim == 1 and np.bincount(indices, minlength=n).max(initial=0) <= 1

    def back(g):
        full = np.zeros_like(x.data)
        fm = np.moveaxis(full, axis, 0)
        gm = np.moveaxis(g, axis, 0)
        if unique:
            fm[indices] = gm
        else:
            np.add.at(fm, indices, gm)
        return (full,)

    return make_node(out, (x,), back, "take")


def concat(tensors, axis: int) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]
    return make_node(
        np.concatenate([t.data for t in tensors], axis=axis),
        tensors,
        lambda g: np.split(g, cuts, axis=axis),
        "concat",
    )


def split(x: Tensor, n: int, axis: int) -> list[Tensor]:
    size = x.shape[axis]
    if size % n:
        raise ValueError(f"cannot split axis of size {size} into {n} equal parts")
    step = size // n
    out = []
    for k in range(n):
        idx = [slice(None)] * x.ndim
        idx[axis] = slice(k * step, (k + 1) * step)
        out.append(getitem(x, tuple(idx)))
    return out


# ------------------------------------------------------------------ products
def einsum(spec: str, a: Tensor, b: Tensor) -> Tensor:
    """Two-operand einsum; every input index must appear in the other input or the output."""
    a, b = as_tensor(a), as_tensor(b)
    ins, out_s = spec.replace(" ", "").split("->")
    sa, sb = ins.split(",")
    for s, other in ((sa, sb), (sb, sa)):
        for ch in s:
            if ch not in out_s and ch not in other:
                raise ValueError(f"einsum index {ch!r} is summed within one operand: {spec}")
    out = np.einsum(spec, a.data, b.data, optimize=True)

    def back(g):
        ga = np.einsum(f"{out_s},{sb}->{sa}", g, b.data, optimize=True) if a.requires_grad else None
        gb = np.einsum(f"{out_s},{sa}->{sb}", g, a.data, optimize=True) if b.requires_grad else None
        return ga, gb

    return make_node(out, (a, b), back, "einsum")


# --------------------------------------------------------------- activations
def sigmoid(x: Tensor) -> Tensor:
    out = special.expit(x.data)
    return make_node(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def softplus(x: Tensor) -> Tensor:
    out = np.logaddexp(0.0, x.data)
    return make_node(out, (x,), lambda g: (g * special.expit(x.data),), "softplus")


def silu(x: Tensor) -> Tensor:
    s = special.expit(x.data)
    return make_node(x.data * s, (x,), lambda g: (g * (s + x.data * s * (1.0 - s)),), "silu")


def gelu(x: Tensor) -> Tensor:
    """Exact GELU, x * Phi(x)."""
    cdf = 0.5 * (1.0 + special.erf(x.data / _SQRT2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data * x.data)
    return make_node(x.data * cdf, (x,), lambda g: (g * (cdf + x.data * pdf),), "gelu")


ACTIVATIONS = {"gelu": gelu, "silu": silu, "sigmoid": sigmoid, "softplus": softplus}


def activation(kind: str, x: Tensor) -> Tensor:
    try:
        fn = ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}; expected one of {sorted(ACTIVATIONS)}") from None
    return fn(x)


# ------------------------------------------------------------- normalization
def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5, axis: int = 1) -> Tensor:
    """Normalize over ``axis`` (the channel axis of B x C x H x W maps)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    axis = axis % x.ndim
    c = x.shape[axis]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ValueError(f"gamma/beta must have shape ({c},), got {gamma.shape} and {beta.shape}")
    bshape = [1] * x.ndim
    bshape[axis] = c
    gb, bb = gamma.data.reshape(bshape), beta.data.reshape(bshape)

    mu = x.data.mean(axis=axis, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=axis, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gb + bb
    red = tuple(i for i in range(x.ndim) if i != axis)

    def back(g):
        gxhat = g * gb
        gx = inv * (
            gxhat
            - gxhat.mean(axis=axis, keepdims=True)
            - xhat * (gxhat * xhat).mean(axis=axis, keepdims=True)
        )
        return gx, (g * xhat).sum(axis=red), g.sum(axis=red)

    return make_node(out, (x, gamma, beta), back, "layer_norm")


# ------------------------------------------------------------- convolutions
def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Tensor | None = None,
    stride: int = 1,
    padding: int = 0,
    groups: int = 1,
) -> Tensor:
    """Zero-padded 2D cross-correlation on B x C x H x W input."""
    if x.ndim != 4 or weight.ndim != 4:
        raise ValueError(f"conv2d expects 4D input and weight, got {x.shape} and {weight.shape}")
    b, c, h, w = x.shape
    o, cg, kh, kw = weight.shape
    if c % groups or o % groups:
        raise ValueError(f"channels in={c} out={o} must both be divisible by groups={groups}")
    if cg != c // groups:
        raise ValueError(f"weight expects {cg} channels per group, input gives {c // groups}")
    if stride < 1 or padding < 0:
        raise ValueError("stride must be >= 1 and padding >= 0")
    hp, wp = h + 2 * padding, w + 2 * padding
    if kh > hp or kw > wp:
        raise ValueError(f"kernel {kh}x{kw} does not fit padded input {hp}x{wp}")
    if bias is not None and bias.shape != (o,):
        raise ValueError(f"bias must have shape ({o},), got {bias.shape}")
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    og = o // groups

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    if groups == 1:
        out = np.tensordot(win, weight.data, axes=([1, 4, 5], [1, 2, 3]))  # b,ho,wo,o
        out = np.ascontiguousarray(out.transpose(0, 3, 1, 2))
    else:
        wing = win.reshape(b, groups, cg, ho, wo, kh, kw)
        wg = weight.data.reshape(groups, og, cg, kh, kw)
        out = np.einsum("bgchwij,gocij->bgohw", wing, wg, optimize=True).reshape(b, o, ho, wo)
    if bias is not None:
        out = out + bias.data[None, :, None, None]

    parents = (x, weight) if bias is None else (x, weight, bias)

    def back(g):
        gw = gx = None
        if weight.requires_grad:
            if groups == 1:
                gw = np.tensordot(g, win, axes=([0, 2, 3], [0, 2, 3]))
            else:
                gg = g.reshape(b, groups, og, ho, wo)
                gw = np.einsum("bgohw,bgchwij->gocij", gg, wing, optimize=True).reshape(weight.shape)
        if x.requires_grad:
            gxp = np.zeros((b, c, hp, wp))
            hs = stride * (ho - 1) + 1
            ws = stride * (wo - 1) + 1
            for i in range(kh):
                for j in range(kw):
                    wij = weight.data[:, :, i, j]
                    if groups == 1:
                        contrib = np.einsum("bohw,oc->bchw", g, wij, optimize=True)
                    else:
                        contrib = np.einsum(
                            "bgohw,goc->bgchw", g.reshape(b, groups, og, ho, wo), wij.reshape(groups, og, cg)
                        ).reshape(b, c, ho, wo)
                    gxp[:, :, i : i + hs : stride, j : j + ws : stride] += contrib
            gx = gxp[:, :, padding : padding + h, padding : padding + w] if padding else gxp
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    return make_node(out, parents, back, "conv2d")


def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    """Depth-to-space: B x (C r^2) x H x W -> B x C x (H r) x (W r)."""
    b, c, h, w = x.shape
    if r < 1 or c % (r * r):
        raise ValueError(f"channel count {c} is not divisible by r^2={r * r}")
    co = c // (r * r)
    out = x.data.reshape(b, co, r, r, h, w).transpose(0, 1, 4, 2, 5, 3).reshape(b, co, h * r, w * r)

    def back(g):
        return (g.reshape(b, co, h, r, w, r).transpose(0, 1, 3, 5, 2, 4).reshape(x.shape),)

    return make_node(np.ascontiguousarray(out), (x,), back, "pixel_shuffle")


def pixel_unshuffle(x: Tensor, r: int) -> Tensor:
    """Space-to-depth, the inverse of :func:`pixel_shuffle`."""
    b, c, h, w = x.shape
    if r < 1 or h % r or w % r:
        raise ValueError(f"spatial size {h}x{w} is not divisible by r={r}")
    ho, wo = h // r, w // r
    out = x.data.reshape(b, c, ho, r, wo, r).transpose(0, 1, 3, 5, 2, 4).reshape(b, c * r * r, ho, wo)

    def back(g):
        return (g.reshape(b, c, r, r, ho, wo).transpose(0, 1, 4, 2, 5, 3).reshape(x.shape),)

    return make_node(np.ascontiguousarray(out), (x,), back, "pixel_unshuffle")


def upsample_nearest(x: Tensor, s: int) -> Tensor:
    """Replicate each pixel of a B x C x H x W map into an s x s block."""
    if s < 1:
        raise ValueError("upsampling factor must be >= 1")
    if s == 1:
        return x
    b, c, h, w = x.shape
    out = np.repeat(np.repeat(x.data, s, axis=2), s, axis=3)
    return make_node(out, (x,), lambda g: (g.reshape(b, c, h, s, w, s).sum(axis=(3, 5)),), "upsample_nearest")


def upsample_bilinear(x: Tensor, s: int) -> Tensor:
    """Bilinear upsampling with half-pixel centers and edge clamping."""
    if s < 1:
        raise ValueError("upsampling factor must be >= 1")
    if s == 1:
        return x
    h, w = x.shape[2:]
    mh, mw = _bilinear_matrix(h, s), _bilinear_matrix(w, s)
    t = einsum("bchw,Hh->bcHw", x, Tensor(mh))
    return einsum("bcHw,Ww->bcHW", t, Tensor(mw))


def _bilinear_matrix(n: int, s: int) -> np.ndarray:
    pos = (np.arange(n * s) + 0.5) / s - 0.5
    pos = np.clip(pos, 0, n - 1)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, n - 1)
    frac = pos - lo
    m = np.zeros((n * s, n))
    m[np.arange(n * s), lo] += 1.0 - frac
    m[np.arange(n * s), hi] += frac
    return m


def pad_replicate(x: Tensor, bottom: int, right: int) -> Tensor:
    """Extend the last row/column of a B x C x H x W map by edge replication."""
    if bottom == 0 and right == 0:
        return x
    h, w = x.shape[2:]
    out = np.pad(x.data, ((0, 0), (0, 0), (0, bottom), (0, right)), mode="edge")

    def back(g):
        g = g.copy()
        if right:
            g[:, :, :, w - 1] += g[:, :, :, w:].sum(axis=3)
        if bottom:
            g[:, :, h - 1, :] += g[:, :, h:, :].sum(axis=2)
        return (g[:, :, :h, :w],)

    return make_node(out, (x,), back, "pad_replicate")


def global_avg_pool(x: Tensor) -> Tensor:
    return mean(x, axis=(2, 3), keepdims=True)


def channel_attention(f: Tensor, w1: Tensor, b1: Tensor, w2: Tensor, b2: Tensor, act: str = "gelu") -> Tensor:
    """Scale each channel of ``f`` by sigmoid(W2 act(W1 pool(f))).

    ``w1`` is a (C/r) x C x 1 x 1 reduction and ``w2`` the C x (C/r) x 1 x 1
    expansion back to C channels.
    """
    c = f.shape[1]
    if w1.shape[1] != c or w2.shape[0] != c or w2.shape[1] != w1.shape[0]:
        raise ValueError(f"attention weights {w1.shape}/{w2.shape} do not fit {c} channels")
    z = global_avg_pool(f)
    z = activation(act, conv2d(z, w1, b1))
    scale = sigmoid(conv2d(z, w2, b2))
    return mul(f, scale)


def l1_loss(pred: Tensor, target) -> Tensor:
    target = as_tensor(target)
    if pred.shape != target.shape:
        raise ValueError(f"l1_loss shape mismatch: {pred.shape} vs {target.shape}")
    return mean(abs(sub(pred, target)))


# -------------------------------------------------------- spectral transforms
def fft2c(x: Tensor, inverse: bool = False) -> Tensor:
    """2D DFT of complex maps packed as B x 2C x H x W (real channels, then imaginary).

    Forward is unnormalized; the inverse carries 1/(H*W).
    """
    c2 = x.shape[1]
    if c2 % 2:
        raise ValueError("packed complex input needs an even channel count")
    c = c2 // 2
    h, w = x.shape[2:]
    z = x.data[:, :c] + 1j * x.data[:, c:]
    out_z = fourier.fft2_array(z, inverse=inverse)
    out = np.concatenate([out_z.real, out_z.imag], axis=1)

    def back(g):
        gz = g[:, :c] + 1j * g[:, c:]
        # transpose of the DFT matrix is its conjugate
        if inverse:
            gi = fourier.fft2_array(gz) / (h * w)
        else:
            gi = fourier.fft2_array(gz, inverse=True) * (h * w)
        return (np.concatenate([gi.real, gi.imag], axis=1),)

    return make_node(out, (x,), back, "ifft2c" if inverse else "fft2c")


def roll2d(x: Tensor, dh: int, dw: int) -> Tensor:
    out = np.roll(x.data, (dh, dw), axis=(-2, -1))
    return make_node(out, (x,), lambda g: (np.roll(g, (-dh, -dw), axis=(-2, -1)),), "roll2d")


def fftshift(x: Tensor) -> Tensor:
    h, w = x.shape[-2:]
    return roll2d(x, h // 2, w // 2)


def ifftshift(x: Tensor) -> Tensor:
    h, w = x.shape[-2:]
    return roll2d(x, -(h // 2), -(w // 2))
