"""Dual-domain hierarchical Mamba network for MRI reconstruction.

Pipeline: shallow 3x3 conv -> M groups of N blocks (each block: dual-domain
hierarchical Mamba + local enhancement module, both pre-normalized with
learnable per-channel skips) -> deep 3x3 conv -> reconstruction head
(conv, pixel shuffle, conv to two output channels) applied to the sum of
shallow and deep features.

Parameters live in a flat ``dict[str, Tensor]`` keyed by dotted names, which
is also the checkpoint layout.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import rng as rng_mod
from .scan import ScanPath, apply_path, get_paths, hierarchical_downsample, invert_path
from .ssm import S6Params, s6_scan
from .tensor import Tensor, conv2d, layer_norm, parameter, pixel_shuffle
from .tensor import functional as F

Params = dict  # str -> Tensor


@dataclass(frozen=True)
class ModelConfig:
    groups: int = 2  # M
    blocks: int = 2  # N, per group
    channels: int = 16  # C
    state_size: int = 8  # S6 hidden size
    stride: int = 2  # hierarchy stride s
    n_lr: int = 3  # low-resolution paths out of four
    shuffle: int = 1  # pixel-shuffle factor of the head
    seed: int = 0
    expand: int = 1  # optional channel expansion inside the dual-domain module
    dt_rank: int | None = None  # None: full C x C Delta projection
    upsample: str = "nearest"
    cab_ratio: int = 4
    in_channels: int = 2
    ln_eps: float = 1e-5
    kspace_norm: str = "forward"  # FFT scaling inside the dual-domain module

    def __post_init__(self):
        for name in ("channels", "state_size", "stride", "shuffle", "expand", "cab_ratio", "in_channels"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.groups < 0 or self.blocks < 0:
            raise ValueError("groups/blocks must be non-negative")
        if not 0 <= self.n_lr <= 4:
            raise ValueError("n_lr must be in 0..4")
        if self.channels % self.cab_ratio:
            raise ValueError(f"channels={self.channels} not divisible by cab_ratio={self.cab_ratio}")
        if self.upsample not in ("nearest", "bilinear"):
            raise ValueError(f"unknown upsample mode {self.upsample!r}")
        if self.kspace_norm not in KSPACE_NORMS:
            raise ValueError(f"kspace_norm must be one of {KSPACE_NORMS}")
        if self.dt_rank is not None and self.dt_rank < 1:
            raise ValueError("dt_rank must be positive or None")

    @property
    def n_hr(self) -> int:
        return 4 - self.n_lr

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> ModelConfig:
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def with_(self, **kw) -> ModelConfig:
        return replace(self, **kw)


KSPACE_NORMS = ("forward", "ortho", "backward")


PRESETS = {
    "desk": ModelConfig(),
    "paper": ModelConfig(groups=6, blocks=6, channels=64, state_size=16, stride=2, n_lr=3),
}


# --------------------------------------------------------------- initializers
def _uniform(rng: np.random.Generator, fan_in: int, shape) -> Tensor:
    bound = 1.0 / math.sqrt(fan_in)
    return parameter(rng.uniform(-bound, bound, size=shape))


def _conv(params: Params, name: str, rng, c_in: int, c_out: int, k: int, groups: int = 1, bias: bool = True):
    fan_in = (c_in // groups) * k * k
    params[f"{name}.w"] = _uniform(rng, fan_in, (c_out, c_in // groups, k, k))
    if bias:
        params[f"{name}.b"] = _uniform(rng, fan_in, (c_out,))


def _norm(params: Params, name: str, c: int):
    params[f"{name}.g"] = parameter(np.ones(c))
    params[f"{name}.b"] = parameter(np.zeros(c))


def _s6(params: Params, name: str, rng, c: int, cfg: ModelConfig):
    for key, t in S6Params.init(c, cfg.state_size, rng, dt_rank=cfg.dt_rank).named(f"{name}.").items():
        params[key] = t


def _branch(params: Params, name: str, rng, c: int, cfg: ModelConfig):
    if cfg.n_hr:
        _s6(params, f"{name}.hr", rng, c, cfg)
    if cfg.n_lr:
        _s6(params, f"{name}.lr", rng, c, cfg)
        s = cfg.stride
        # box-filter start for the learned downsampling kernels
        params[f"{name}.down.w"] = parameter(np.full((c, 1, s, s), 1.0 / (s * s)))


def init_params(cfg: ModelConfig) -> Params:
    """Deterministic initialization from ``cfg.seed``."""
    rng = rng_mod.stream(cfg.seed, "weights")
    c = cfg.channels
    ce = c * cfg.expand
    p: Params = {}
    _conv(p, "shallow", rng, cfg.in_channels, c, 3)
    for m in range(cfg.groups):
        for n in range(cfg.blocks):
            pre = f"g{m}.b{n}"
            _norm(p, f"{pre}.ln1", c)
            _norm(p, f"{pre}.ln2", c)
            p[f"{pre}.alpha"] = parameter(np.ones(c))
            p[f"{pre}.beta"] = parameter(np.ones(c))
            if cfg.expand > 1:
                _conv(p, f"{pre}.dhm.in", rng, c, ce, 1)
                _conv(p, f"{pre}.dhm.out", rng, ce, c, 1)
            _branch(p, f"{pre}.dhm.img", rng, ce, cfg)
            _branch(p, f"{pre}.dhm.k", rng, 2 * ce, cfg)
            _conv(p, f"{pre}.lem.expand", rng, c, 2 * c, 1)
            _conv(p, f"{pre}.lem.conv", rng, c, c, 1)
            _conv(p, f"{pre}.lem.dw", rng, c, c, 3, groups=c)
            cr = c // cfg.cab_ratio
            _conv(p, f"{pre}.lem.cab1", rng, c, cr, 1)
            _conv(p, f"{pre}.lem.cab2", rng, cr, c, 1)
            _norm(p, f"{pre}.lem.ln", c)
            _conv(p, f"{pre}.lem.out", rng, c, c, 1)
        _conv(p, f"g{m}.conv", rng, c, c, 3)
    _conv(p, "deep", rng, c, c, 3)
    r = cfg.shuffle
    _conv(p, "recon.conv1", rng, c, c * r * r, 3)
    _conv(p, "recon.conv2", rng, c, cfg.in_channels, 3)
    return p


def parameter_count(params: Params) -> int:
    return int(sum(t.size for t in params.values()))


def s6_from(params: Params, prefix: str) -> S6Params:
    return S6Params(
        A_log=params[f"{prefix}.A_log"],
        D=params[f"{prefix}.D"],
        W_B=params[f"{prefix}.W_B"],
        W_C=params[f"{prefix}.W_C"],
        W_dt=params[f"{prefix}.W_dt"],
        b_dt=params[f"{prefix}.b_dt"],
        W_dt_in=params.get(f"{prefix}.W_dt_in"),
    )


# ---------------------------------------------------------------- components
def _conv_apply(x: Tensor, params: Params, name: str, padding: int = 0, groups: int = 1) -> Tensor:
    return conv2d(x, params[f"{name}.w"], params.get(f"{name}.b"), padding=padding, groups=groups)


def _ln(x: Tensor, params: Params, name: str, eps: float) -> Tensor:
    return layer_norm(x, params[f"{name}.g"], params[f"{name}.b"], eps=eps)


def _upsample(x: Tensor, s: int, mode: str) -> Tensor:
    return F.upsample_nearest(x, s) if mode == "nearest" else F.upsample_bilinear(x, s)


def _run_s6(seqs: list[Tensor], s6: S6Params) -> list[Tensor]:
    """One S6 over several equally long sequences, batched along axis 0."""
    if len(seqs) == 1:
        return [s6_scan(seqs[0], s6)]
    b = seqs[0].shape[0]
    out = s6_scan(F.concat(seqs, axis=0), s6)
    return [out[k * b : (k + 1) * b] for k in range(len(seqs))]


def hi_scan(f: Tensor, family: str, cfg: ModelConfig, down_w: Tensor | None):
    """Split the four paths of ``family`` into HR sequences (full map) and LR
    sequences (depthwise-downsampled map).

    Returns ``(hr_seqs, hr_paths, lr_seqs, lr_paths)``.
    """
    h, w = f.shape[2:]
    paths = get_paths(family, h, w)[: cfg.n_hr]
    hr = [apply_path(f, p) for p in paths]
    lr, lr_paths = [], []
    if cfg.n_lr:
        f_lr = hierarchical_downsample(f, cfg.stride, down_w)
        hl, wl = f_lr.shape[2:]
        lr_paths = get_paths(family, hl, wl)[cfg.n_hr :]
        lr = [apply_path(f_lr, p) for p in lr_paths]
    return hr, paths, lr, lr_paths


def hire(
    hr_seqs: list[Tensor],
    lr_seqs: list[Tensor],
    hr_paths: list[ScanPath],
    lr_paths: list[ScanPath],
    s: int,
    s6_hr: S6Params | None,
    s6_lr: S6Params | None,
    out_hw: tuple[int, int],
    upsample: str = "nearest",
) -> Tensor:
    """Process HR/LR sequences with their own S6, scatter back to 2D, and fuse
    as ``sum(HR maps) + up(sum(LR maps))``."""
    if len(hr_seqs) != len(hr_paths) or len(lr_seqs) != len(lr_paths):
        raise ValueError("each sequence needs exactly one path")
    h, w = out_hw
    for seq, p in zip(hr_seqs + lr_seqs, hr_paths + lr_paths):
        if seq.shape[2] != p.length:
            raise ValueError(f"sequence of length {seq.shape[2]} does not match path {p.name} ({p.length})")
    maps = []
    if hr_seqs:
        outs = _run_s6(hr_seqs, s6_hr)
        maps += [invert_path(o, p) for o, p in zip(outs, hr_paths)]
    if lr_seqs:
        outs = _run_s6(lr_seqs, s6_lr)
        lr_maps = [invert_path(o, p) for o, p in zip(outs, lr_paths)]
        up = _upsample(F.add_n(lr_maps), s, upsample)
        if up.shape[2:] != (h, w):
            up = up[:, :, :h, :w]
        maps.append(up)
    if not maps:
        raise ValueError("no scan paths configured")
    return F.add_n(maps)


def _branch_forward(f: Tensor, params: Params, name: str, family: str, cfg: ModelConfig) -> Tensor:
    down_w = params.get(f"{name}.down.w")
    hr, hr_paths, lr, lr_paths = hi_scan(f, family, cfg, down_w)
    s6_hr = s6_from(params, f"{name}.hr") if cfg.n_hr else None
    s6_lr = s6_from(params, f"{name}.lr") if cfg.n_lr else None
    return hire(hr, lr, hr_paths, lr_paths, cfg.stride, s6_hr, s6_lr, f.shape[2:], cfg.upsample)


def _kspace_scale(h: int, w: int, norm: str) -> float:
    """Factor applied after the unnormalized forward FFT; the inverse undoes it."""
    if norm == "forward":
        return 1.0 / (h * w)
    if norm == "ortho":
        return 1.0 / math.sqrt(h * w)
    return 1.0


def to_kspace(x: Tensor, norm: str = "forward") -> Tensor:
    """Real B x C x H x W map -> centered spectrum packed as B x 2C x H x W."""
    h, w = x.shape[2:]
    packed = F.concat([x, Tensor(np.zeros(x.shape))], axis=1)
    return F.fftshift(F.mul(F.fft2c(packed), _kspace_scale(h, w, norm)))


def from_kspace(k: Tensor, norm: str = "forward") -> Tensor:
    """Inverse of :func:`to_kspace` keeping only the real part."""
    h, w = k.shape[2:]
    c = k.shape[1] // 2
    z = F.mul(F.fft2c(F.ifftshift(k), inverse=True), 1.0 / _kspace_scale(h, w, norm))
    return z[:, :c]


def dhm(s_in: Tensor, params: Params, prefix: str, cfg: ModelConfig) -> Tensor:
    """Dual-domain hierarchical Mamba: circular-scan k-space branch plus
    raster-scan image branch, summed in the image domain."""
    x = s_in
    if cfg.expand > 1:
        x = _conv_apply(x, params, f"{prefix}.in")
    s_out = _branch_forward(x, params, f"{prefix}.img", "raster", cfg)
    k_out = _branch_forward(to_kspace(x, cfg.kspace_norm), params, f"{prefix}.k", "circular", cfg)
    out = F.add(s_out, from_kspace(k_out, cfg.kspace_norm))
    if cfg.expand > 1:
        out = _conv_apply(out, params, f"{prefix}.out")
    return out


def lem(f: Tensor, params: Params, prefix: str, cfg: ModelConfig) -> Tensor:
    """Local enhancement: conv/depthwise/channel-attention coordinates gated by GELU(LN(.))."""
    c = f.shape[1]
    f1, f2 = F.split(_conv_apply(f, params, f"{prefix}.expand"), 2, axis=1)
    coords = _conv_apply(f1, params, f"{prefix}.conv")
    coords = _conv_apply(coords, params, f"{prefix}.dw", padding=1, groups=c)
    coords = F.channel_attention(
        coords,
        params[f"{prefix}.cab1.w"],
        params[f"{prefix}.cab1.b"],
        params[f"{prefix}.cab2.w"],
        params[f"{prefix}.cab2.b"],
    )
    gate = F.gelu(_ln(f2, params, f"{prefix}.ln", cfg.ln_eps))
    return _conv_apply(F.mul(gate, coords), params, f"{prefix}.out")


def _per_channel(t: Tensor) -> Tensor:
    return F.reshape(t, (1, t.shape[0], 1, 1))


def dhm_block(f: Tensor, params: Params, prefix: str, cfg: ModelConfig) -> Tensor:
    alpha = _per_channel(params[f"{prefix}.alpha"])
    beta = _per_channel(params[f"{prefix}.beta"])
    f1 = F.add(F.mul(alpha, f), dhm(_ln(f, params, f"{prefix}.ln1", cfg.ln_eps), params, f"{prefix}.dhm", cfg))
    return F.add(F.mul(beta, f1), lem(_ln(f1, params, f"{prefix}.ln2", cfg.ln_eps), params, f"{prefix}.lem", cfg))


def dhm_group(f: Tensor, params: Params, group: int, cfg: ModelConfig) -> Tensor:
    x = f
    for n in range(cfg.blocks):
        x = dhm_block(x, params, f"g{group}.b{n}", cfg)
    return F.add(f, _conv_apply(x, params, f"g{group}.conv", padding=1))


def network_forward(i_in: Tensor, params: Params, cfg: ModelConfig) -> Tensor:
    """B x 2 x H x W zero-filled image (real, imag) -> B x 2 x (H r) x (W r) reconstruction."""
    if i_in.ndim != 4 or i_in.shape[1] != cfg.in_channels:
        raise ValueError(f"expected B x {cfg.in_channels} x H x W input, got {i_in.shape}")
    w = params.get("shallow.w")
    if w is None or w.shape != (cfg.channels, cfg.in_channels, 3, 3):
        raise ValueError("weights do not match the model configuration")
    fs = _conv_apply(i_in, params, "shallow", padding=1)
    f = fs
    for m in range(cfg.groups):
        f = dhm_group(f, params, m, cfg)
    fd = _conv_apply(f, params, "deep", padding=1)
    x = _conv_apply(F.add(fs, fd), params, "recon.conv1", padding=1)
    x = pixel_shuffle(x, cfg.shuffle)
    return _conv_apply(x, params, "recon.conv2", padding=1)


def l1_loss(pred: Tensor, target) -> Tensor:
    return F.l1_loss(pred, target)


@dataclass
class DHMamba:
    """Configuration plus its parameter dictionary."""

    config: ModelConfig
    params: Params = field(default_factory=dict)

    @classmethod
    def create(cls, config: ModelConfig) -> DHMamba:
        return cls(config, init_params(config))

    def __call__(self, i_in) -> Tensor:
        return network_forward(i_in if isinstance(i_in, Tensor) else Tensor(i_in), self.params, self.config)

    def parameter_count(self) -> int:
        return parameter_count(self.params)

    def check_compatible(self) -> None:
        expected = init_params_shapes(self.config)
        got = {k: v.shape for k, v in self.params.items()}
        if expected != got:
            missing = sorted(set(expected) - set(got))
            extra = sorted(set(got) - set(expected))
            bad = sorted(k for k in set(expected) & set(got) if expected[k] != got[k])
            raise ValueError(f"weights do not match config: missing={missing[:5]} extra={extra[:5]} shape={bad[:5]}")


def init_params_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    return {k: v.shape for k, v in init_params(cfg).items()}
