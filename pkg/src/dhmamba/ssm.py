"""Selective state-space (S6) operator.

Per channel c and state n, with Delta, B, C produced from the current token::

    Abar = exp(Delta * A)
    Bbar = (Delta * A)^-1 (exp(Delta * A) - 1) * Delta * B      (zero-order hold)
    h_k  = Abar_k * h_{k-1} + Bbar_k * x_k
    y_k  = C_k . h_k + D * x_k

A is diagonal and strictly negative (A = -exp(A_log)). The recurrence is run
sequentially; the LTI kernel form is kept as an independent oracle for the
frozen-parameter case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, make_node, parameter
from .tensor import functional as F

SERIES_THRESHOLD = 1e-8


# --------------------------------------------------------------- discretization
def _phi(z: np.ndarray) -> np.ndarray:
    """(exp(z) - 1) / z, with the first-order series near zero."""
    small = np.abs(z) < SERIES_THRESHOLD
    if not small.any():
        return np.expm1(z) / z
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 + 0.5 * z, np.expm1(safe) / safe)


def _dphi(z: np.ndarray, ez: np.ndarray, ph: np.ndarray) -> np.ndarray:
    """Derivative of :func:`_phi` given exp(z) and phi(z) already evaluated."""
    small = np.abs(z) < 1e-3
    if not small.any():
        return (ez - ph) / z
    safe = np.where(small, 1.0, z)
    zs = z[small]
    out = (ez - ph) / safe
    out[small] = 0.5 + zs / 3.0 + zs * zs / 8.0 + zs * zs * zs / 30.0
    return out


def discretize(A, B, delta) -> tuple[np.ndarray, np.ndarray]:
    """Zero-order-hold discretization for diagonal ``A``.

    Returns ``(Abar, Bbar)`` broadcast over the inputs.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    if np.any(delta <= 0):
        raise ValueError("timescale delta must be strictly positive")
    z = delta * A
    return np.exp(z), _phi(z) * delta * B


# -------------------------------------------------------------- fused scan op
def selective_scan(x: Tensor, delta: Tensor, A: Tensor, Bm: Tensor, Cm: Tensor, D: Tensor) -> Tensor:
    """Run the discretized recurrence over the sequence axis.

    Shapes: ``x``, ``delta``: (B, L, C); ``A``: (C, N); ``Bm``, ``Cm``:
    (B, L, N); ``D``: (C,). Returns y with shape (B, L, C). ``h(0) = 0``.
    """
    xs, ds, a, bm, cm, d = x.data, delta.data, A.data, Bm.data, Cm.data, D.data
    nb, L, c = xs.shape
    n = a.shape[1]
    if ds.shape != xs.shape or a.shape[0] != c or bm.shape != (nb, L, n) or cm.shape != (nb, L, n):
        raise ValueError(
            f"inconsistent scan shapes x={xs.shape} delta={ds.shape} A={a.shape} B={bm.shape} C={cm.shape}"
        )
    # time-major copies keep each step's slice contiguous
    dt = np.ascontiguousarray(ds.transpose(1, 0, 2))[..., None]  # L,B,C,1
    xt = np.ascontiguousarray(xs.transpose(1, 0, 2))  # L,B,C
    bt = np.ascontiguousarray(bm.transpose(1, 0, 2))[:, :, None, :]  # L,B,1,N
    ct = np.ascontiguousarray(cm.transpose(1, 0, 2))  # L,B,N
    z = dt * a  # L,B,C,N
    abar = np.exp(z)
    ph = _phi(z)
    bbar = dt * ph * bt
    u = bbar * xt[..., None]
    hs = np.empty_like(u)
    h = np.zeros((nb, c, n))
    for k in range(L):
        h = abar[k] * h + u[k]
        hs[k] = h
    yt = np.einsum("lbcn,lbn->lbc", hs, ct) + d * xt
    y = np.ascontiguousarray(yt.transpose(1, 0, 2))

    def back(g):
        gt = np.ascontiguousarray(g.transpose(1, 0, 2))  # L,B,C
        gD = np.einsum("lbc,lbc->c", gt, xt)
        gC = np.einsum("lbc,lbcn->lbn", gt, hs)
        gH = gt[..., None] * ct[:, :, None, :]
        acc = np.empty_like(gH)
        run = np.zeros((nb, c, n))
        for k in range(L - 1, -1, -1):
            run = gH[k] + run
            acc[k] = run
            run = run * abar[k]
        # acc[k] is dLoss/dh_k including propagation from later steps
        h_prev = np.empty_like(hs)
        h_prev[0] = 0.0
        h_prev[1:] = hs[:-1]
        g_abar = acc * h_prev
        g_bbar = acc * xt[..., None]
        gx = np.einsum("lbcn,lbcn->lbc", acc, bbar) + gt * d
        gB = np.einsum("lbcn,lbcn->lbn", g_bbar, dt * ph)
        gz = g_abar * abar + g_bbar * dt * bt * _dphi(z, abar, ph)
        gdt = np.einsum("lbcn,lbcn->lbc", g_bbar, ph * bt) + np.einsum("lbcn,cn->lbc", gz, a)
        gA = np.einsum("lbcn,lbc->cn", gz, dt[..., 0])
        return (
            np.ascontiguousarray(gx.transpose(1, 0, 2)),
            np.ascontiguousarray(gdt.transpose(1, 0, 2)),
            gA,
            np.ascontiguousarray(gB.transpose(1, 0, 2)),
            np.ascontiguousarray(gC.transpose(1, 0, 2)),
            gD,
        )

    return make_node(y, (x, delta, A, Bm, Cm, D), back, "selective_scan")


# ------------------------------------------------------------------ parameters
@dataclass
class S6Params:
    """Learnable parameters of one S6 operator over ``channels`` channels.

    ``W_dt`` is a full C x C projection unless ``W_dt_in`` is set, in which
    case Delta is produced through a rank-R bottleneck
    (``W_dt @ W_dt_in``, shapes C x R and R x C).
    """

    A_log: Tensor  # C x N
    D: Tensor  # C
    W_B: Tensor  # N x C
    W_C: Tensor  # N x C
    W_dt: Tensor  # C x C, or C x R
    b_dt: Tensor  # C
    W_dt_in: Tensor | None = None  # R x C

    @property
    def channels(self) -> int:
        return self.A_log.shape[0]

    @property
    def state_size(self) -> int:
        return self.A_log.shape[1]

    def named(self, prefix: str = "") -> dict[str, Tensor]:
        out = {
            f"{prefix}A_log": self.A_log,
            f"{prefix}D": self.D,
            f"{prefix}W_B": self.W_B,
            f"{prefix}W_C": self.W_C,
            f"{prefix}W_dt": self.W_dt,
            f"{prefix}b_dt": self.b_dt,
        }
        if self.W_dt_in is not None:
            out[f"{prefix}W_dt_in"] = self.W_dt_in
        return out

    def A(self) -> Tensor:
        return F.mul(F.exp(self.A_log), -1.0)

    @classmethod
    def init(cls, channels: int, state_size: int, rng: np.random.Generator, dt_rank: int | None = None,
             dt_min: float = 1e-3, dt_max: float = 1e-1) -> S6Params:
        c, n = channels, state_size
        a_log = np.log(np.tile(np.arange(1, n + 1, dtype=np.float64), (c, 1)))
        bound = 1.0 / math.sqrt(c)
        dt = np.exp(rng.uniform(math.log(dt_min), math.log(dt_max), size=c))
        b_dt = dt + np.log(-np.expm1(-dt))  # inverse softplus
        if dt_rank is None:
            w_dt = rng.uniform(-bound, bound, size=(c, c))
            w_dt_in = None
        else:
            w_dt_in = parameter(rng.uniform(-bound, bound, size=(dt_rank, c)))
            w_dt = rng.uniform(-1.0 / math.sqrt(dt_rank), 1.0 / math.sqrt(dt_rank), size=(c, dt_rank))
        return cls(
            A_log=parameter(a_log),
            D=parameter(np.ones(c)),
            W_B=parameter(rng.uniform(-bound, bound, size=(n, c))),
            W_C=parameter(rng.uniform(-bound, bound, size=(n, c))),
            W_dt=parameter(w_dt),
            b_dt=parameter(b_dt),
            W_dt_in=w_dt_in,
        )

    def count(self) -> int:
        return sum(t.size for t in self.named().values())


@dataclass
class SelectiveInputs:
    """Per-step Delta (B, L, C) and shared B, C projections (B, L, N)."""

    delta: Tensor
    B: Tensor
    C: Tensor


def selective_params(x: Tensor, params: S6Params) -> SelectiveInputs:
    """Project a B x C x L sequence to its per-step Delta, B and C."""
    xt = F.transpose(x, (0, 2, 1))  # B,L,C
    bm = F.einsum("blc,nc->bln", xt, params.W_B)
    cm = F.einsum("blc,nc->bln", xt, params.W_C)
    if params.W_dt_in is None:
        raw = F.einsum("blc,dc->bld", xt, params.W_dt)
    else:
        low = F.einsum("blc,rc->blr", xt, params.W_dt_in)
        raw = F.einsum("blr,dr->bld", low, params.W_dt)
    delta = F.softplus(F.add(raw, params.b_dt))
    return SelectiveInputs(delta, bm, cm)


def s6_scan(x: Tensor, params: S6Params, inputs: SelectiveInputs | None = None) -> Tensor:
    """S6 over a B x C x L sequence; ``inputs`` overrides the selective projections
    (used to freeze Delta, B, C)."""
    if x.ndim != 3 or x.shape[1] != params.channels:
        raise ValueError(f"expected B x {params.channels} x L input, got {x.shape}")
    if inputs is None:
        inputs = selective_params(x, params)
    xt = F.transpose(x, (0, 2, 1))
    y = selective_scan(xt, inputs.delta, params.A(), inputs.B, inputs.C, params.D)
    return F.transpose(y, (0, 2, 1))


def frozen_inputs(batch: int, length: int, delta, B, C) -> SelectiveInputs:
    """Time-invariant Delta (C,), B (N,), C (N,) broadcast over a batch of sequences."""
    delta = np.asarray(delta, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    return SelectiveInputs(
        Tensor(np.broadcast_to(delta, (batch, length, delta.size)).copy()),
        Tensor(np.broadcast_to(B, (batch, length, B.size)).copy()),
        Tensor(np.broadcast_to(C, (batch, length, C.size)).copy()),
    )


# --------------------------------------------------------------- LTI oracle
def lti_kernel(Abar, Bbar, C, length: int) -> np.ndarray:
    """K[k] = sum_n C[n] Abar[n]^k Bbar[n] for k = 0..length-1 (diagonal Abar).

    Leading axes of ``Abar``/``Bbar`` (e.g. channels) are kept: result shape is
    ``broadcast(Abar, Bbar, C).shape[:-1] + (length,)``.
    """
    Abar = np.asarray(Abar, dtype=np.float64)
    Bbar = np.asarray(Bbar, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    powers = Abar[..., None, :] ** np.arange(length)[:, None]  # ..., L, N
    return np.sum(C[..., None, :] * powers * Bbar[..., None, :], axis=-1)


def causal_conv(x, kernel) -> np.ndarray:
    """y[t] = sum_{k<=t} kernel[k] x[t-k] along the last axis."""
    x = np.asarray(x, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    L = x.shape[-1]
    y = np.zeros(np.broadcast_shapes(x.shape, kernel.shape[:-1] + (L,)))
    for k in range(L):
        y[..., k:] += kernel[..., k : k + 1] * x[..., : L - k]
    return y
