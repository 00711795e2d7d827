"""Analytic parameter and multiply-accumulate (MAC) accounting.

Counted: convolutions (including 1x1 and depthwise), the S6 projections and
recurrence, the hierarchical downsampling, and the FFTs of the k-space branch
(one complex multiply = 4 real MACs). Elementwise work (norms, activations,
residual adds, upsampling by copy) is not counted. Parameter totals are exact
and match :func:`dhmamba.dhnet.init_params`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..dhnet import ModelConfig
from ..scan import padded_size

COLUMNS = ("layer", "kind", "params", "macs")


@dataclass
class CostRow:
    layer: str
    kind: str
    params: int
    macs: int


@dataclass
class CostReport:
    height: int
    width: int
    rows: list[CostRow] = field(default_factory=list)

    @property
    def params(self) -> int:
        return sum(r.params for r in self.rows)

    @property
    def macs(self) -> int:
        return sum(r.macs for r in self.rows)

    def add(self, layer: str, kind: str, params: int, macs: int) -> None:
        self.rows.append(CostRow(layer, kind, int(params), int(macs)))

    def csv_rows(self) -> list[list]:
        out = [[r.layer, r.kind, r.params, r.macs] for r in self.rows]
        out.append(["total", "", self.params, self.macs])
        return out


def conv_cost(c_in: int, c_out: int, k: int, h_out: int, w_out: int, groups: int = 1, bias: bool = True):
    per_out = (c_in // groups) * k * k
    params = c_out * per_out + (c_out if bias else 0)
    return params, c_out * per_out * h_out * w_out


def s6_cost(c: int, n: int, length: int, dt_rank: int | None):
    """Parameters and MACs of one S6 operator applied to one sequence of ``length``."""
    dt_params = c * c if dt_rank is None else 2 * c * dt_rank
    params = c * n + c + 2 * n * c + dt_params + c  # A_log, D, W_B, W_C, W_dt(_in), b_dt
    proj = length * (2 * n * c + dt_params)
    # per step and state: B-bar formation, A-bar h, B-bar x, C h; plus the D skip
    recur = length * (4 * c * n + c)
    return params, proj + recur


def fft_axis_cost(n: int) -> int:
    """Complex multiplies for one length-n transform (radix-2 or direct)."""
    if n & (n - 1) == 0:
        return (n // 2) * int(math.log2(n)) if n > 1 else 0
    return n * n


def fft2_cost(h: int, w: int) -> int:
    return 4 * (w * fft_axis_cost(h) + h * fft_axis_cost(w))


def _branch(rep: CostReport, name: str, c: int, h: int, w: int, cfg: ModelConfig) -> None:
    if cfg.n_hr:
        p, m = s6_cost(c, cfg.state_size, h * w, cfg.dt_rank)
        rep.add(f"{name}.hr", "s6", p, m * cfg.n_hr)
    if cfg.n_lr:
        s = cfg.stride
        hl, wl = padded_size(h, s) // s, padded_size(w, s) // s
        p, m = conv_cost(c, c, s, hl, wl, groups=c, bias=False)
        rep.add(f"{name}.down", "dwconv", p, m)
        p, m = s6_cost(c, cfg.state_size, hl * wl, cfg.dt_rank)
        rep.add(f"{name}.lr", "s6", p, m * cfg.n_lr)


def count_cost(cfg: ModelConfig, height: int, width: int) -> CostReport:
    h, w = height, width
    c = cfg.channels
    ce = c * cfg.expand
    rep = CostReport(h, w)
    rep.add("shallow", "conv3x3", *conv_cost(cfg.in_channels, c, 3, h, w))
    for m in range(cfg.groups):
        for n in range(cfg.blocks):
            pre = f"g{m}.b{n}"
            rep.add(f"{pre}.ln1", "norm", 2 * c, 0)
            rep.add(f"{pre}.ln2", "norm", 2 * c, 0)
            rep.add(f"{pre}.skip", "scale", 2 * c, 0)
            if cfg.expand > 1:
                rep.add(f"{pre}.dhm.in", "conv1x1", *conv_cost(c, ce, 1, h, w))
                rep.add(f"{pre}.dhm.out", "conv1x1", *conv_cost(ce, c, 1, h, w))
            _branch(rep, f"{pre}.dhm.img", ce, h, w, cfg)
            rep.add(f"{pre}.dhm.fft", "fft", 0, 2 * ce * fft2_cost(h, w))
            _branch(rep, f"{pre}.dhm.k", 2 * ce, h, w, cfg)
            rep.add(f"{pre}.lem.expand", "conv1x1", *conv_cost(c, 2 * c, 1, h, w))
            rep.add(f"{pre}.lem.conv", "conv1x1", *conv_cost(c, c, 1, h, w))
            rep.add(f"{pre}.lem.dw", "dwconv3x3", *conv_cost(c, c, 3, h, w, groups=c))
            cr = c // cfg.cab_ratio
            rep.add(f"{pre}.lem.cab1", "conv1x1", *conv_cost(c, cr, 1, 1, 1))
            rep.add(f"{pre}.lem.cab2", "conv1x1", *conv_cost(cr, c, 1, 1, 1))
            rep.add(f"{pre}.lem.ln", "norm", 2 * c, 0)
            rep.add(f"{pre}.lem.out", "conv1x1", *conv_cost(c, c, 1, h, w))
        rep.add(f"g{m}.conv", "conv3x3", *conv_cost(c, c, 3, h, w))
    rep.add("deep", "conv3x3", *conv_cost(c, c, 3, h, w))
    r = cfg.shuffle
    rep.add("recon.conv1", "conv3x3", *conv_cost(c, c * r * r, 3, h, w))
    rep.add("recon.conv2", "conv3x3", *conv_cost(c, cfg.in_channels, 3, h * r, w * r))
    return rep
