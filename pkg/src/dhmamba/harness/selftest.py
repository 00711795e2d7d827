"""Fast in-package oracle and invariant checks behind ``dhmamba selftest``.

Each check is independent and returns a short detail string; a raised
exception or a False verdict counts as a failure.
"""

from __future__ import annotations

import tempfile
import time
from pathlib import Path
from typing import Callable

import numpy as np

from .. import fourier, scan, ssm
from ..dhnet import DHMamba, ModelConfig, dhm_block, init_params, lem, network_forward, parameter_count
from ..mrisim import make_mask, metrics, phantom, undersample
from ..tensor import Tensor, conv2d, grad_check
from ..tensor import functional as F
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import TrainConfig
from .cost import count_cost
from .erf import conv_control, erf_map, support

CHECKS: list[tuple[str, Callable[[], tuple[bool, str]]]] = []


def check(name: str):
    def deco(fn):
        CHECKS.append((name, fn))
        return fn

    return deco


@check("fft-vs-naive-dft")
def _fft():
    r = np.random.default_rng(1)
    worst = 0.0
    for h, w in [(8, 8), (5, 7), (16, 3)]:
        z = r.normal(size=(h, w)) + 1j * r.normal(size=(h, w))
        worst = max(worst, float(np.max(np.abs(fourier.fft2_array(z) - fourier.naive_dft2(z)))))
    return worst < 1e-10, f"max err {worst:.2e}"


@check("fft-roundtrip-parseval")
def _fft_rt():
    r = np.random.default_rng(2)
    worst = 0.0
    for n in (1, 2, 3, 4, 8, 15, 16):
        z = r.normal(size=(n, n)) + 1j * r.normal(size=(n, n))
        X = fourier.fft2_array(z)
        worst = max(worst, float(np.max(np.abs(fourier.ifft2_array(X) - z))))
        worst = max(worst, abs(np.sum(np.abs(z) ** 2) - np.sum(np.abs(X) ** 2) / n**2))
    return worst < 1e-9, f"max err {worst:.2e}"


@check("scan-bijective-ring-order")
def _scan():
    for h in range(1, 10):
        for w in range(1, 10):
            ring = scan.ring_index(h, w).reshape(-1)
            x = np.arange(h * w, dtype=np.float64).reshape(1, 1, h, w)
            for p in scan.raster_paths(h, w) + scan.circular_paths(h, w):
                if not np.array_equal(scan.invert_path(scan.apply_path(Tensor(x), p), p).data, x):
                    return False, f"round-trip failed for {p.name} at {h}x{w}"
            for p in scan.circular_paths(h, w):
                if np.any(np.diff(ring[p.order]) < 0):
                    return False, f"ring order violated for {p.name} at {h}x{w}"
    return True, "81 grid sizes x 8 paths"


@check("s6-recurrence-vs-kernel")
def _s6():
    r = np.random.default_rng(3)
    worst = 0.0
    for _ in range(20):
        c, n, L = int(r.integers(1, 4)), int(r.integers(1, 9)), int(r.integers(1, 65))
        p = ssm.S6Params.init(c, n, r)
        p.A_log.data[:] = r.normal(size=(c, n))
        p.D.data[:] = r.normal(size=c)
        delta, B, C = r.uniform(0.01, 1, size=c), r.normal(size=n), r.normal(size=n)
        x = r.normal(size=(1, c, L))
        y = ssm.s6_scan(Tensor(x), p, ssm.frozen_inputs(1, L, delta, B, C)).data
        ab, bb = ssm.discretize(p.A().data, B[None, :], delta[:, None])
        ref = ssm.causal_conv(x, ssm.lti_kernel(ab, bb, C[None, :], L)[None]) + p.D.data[None, :, None] * x
        worst = max(worst, float(np.max(np.abs(y - ref))))
    return worst < 1e-8, f"max err {worst:.2e}"


@check("s6-causality")
def _causal():
    r = np.random.default_rng(4)
    p = ssm.S6Params.init(3, 4, r)
    x = r.normal(size=(1, 3, 24))
    y0 = ssm.s6_scan(Tensor(x), p).data
    x[0, :, 10] += 1.0
    y1 = ssm.s6_scan(Tensor(x), p).data
    return bool(np.array_equal(y0[..., :10], y1[..., :10]) and not np.array_equal(y0, y1)), "perturb t=10"


@check("conv-oracle")
def _conv():
    r = np.random.default_rng(5)
    x, w, b = r.normal(size=(1, 4, 6, 5)), r.normal(size=(4, 2, 3, 3)), r.normal(size=4)
    y = conv2d(Tensor(x), Tensor(w), Tensor(b), stride=2, padding=1, groups=2).data
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    ref = np.zeros_like(y)
    for o in range(4):
        g = o // 2
        for i in range(y.shape[2]):
            for j in range(y.shape[3]):
                ref[0, o, i, j] = b[o] + np.sum(w[o] * xp[0, 2 * g : 2 * g + 2, 2 * i : 2 * i + 3, 2 * j : 2 * j + 3])
    err = float(np.max(np.abs(y - ref)))
    return err < 1e-12, f"max err {err:.2e}"


@check("gradients-primitives")
def _grads():
    r = np.random.default_rng(6)
    cases = [
        (lambda a, b: F.mul(a, b), [r.normal(size=(2, 3)), r.normal(size=(1, 3))]),
        (F.gelu, [r.normal(size=6)]),
        (F.softplus, [r.normal(size=6)]),
        (lambda x, g, b: F.layer_norm(x, g, b), [r.normal(size=(1, 3, 2, 2)), r.normal(size=3), r.normal(size=3)]),
        (lambda x, w: conv2d(x, w, padding=1), [r.normal(size=(1, 2, 4, 4)), r.normal(size=(2, 2, 3, 3))]),
        (lambda x: F.fft2c(x), [r.normal(size=(1, 2, 4, 3))]),
        (F.fftshift, [r.normal(size=(1, 1, 3, 4))]),
    ]
    worst = 0.0
    for fn, arrays in cases:
        leaves = [Tensor(a) for a in arrays]
        wts = r.normal(size=fn(*leaves).shape)
        worst = max(worst, grad_check(lambda: F.sum(F.mul(fn(*leaves), wts)), leaves))
    return worst < 1e-4, f"worst rel err {worst:.2e}"


@check("gradients-composites")
def _grads_big():
    cfg = ModelConfig(groups=1, blocks=1, channels=4, state_size=3)
    p = init_params(cfg)
    r = np.random.default_rng(7)
    x = Tensor(r.normal(size=(1, 4, 8, 8)))
    worst = max(
        grad_check(lambda: F.sum(dhm_block(x, p, "g0.b0", cfg)), [x], max_entries=24),
        grad_check(lambda: F.sum(lem(x, p, "g0.b0.lem", cfg)), [x], max_entries=24),
    )
    xi = Tensor(r.normal(size=(1, 2, 8, 8)))
    worst = max(worst, grad_check(lambda: F.sum(network_forward(xi, p, cfg)), [xi], max_entries=24))
    return worst < 1e-3, f"worst rel err {worst:.2e}"


@check("mask-fractions")
def _masks():
    notes = []
    for kind, afs in (("cartesian", (4, 8)), ("radial", (4, 8)), ("random", (4, 8))):
        for af in afs:
            frac = np.mean([make_mask(kind, 64, 64, af, s).mask.mean() for s in range(200)])
            if abs(frac * af - 1) > 0.1:
                return False, f"{kind} AF={af}: fraction {frac:.4f}"
            notes.append(f"{kind}{af}={frac * af:.3f}")
    return True, " ".join(notes)


@check("undersample-identity-and-metrics")
def _sim():
    ph = phantom(16, 16, 3)
    _, zf = undersample(ph.image, np.ones((16, 16)))
    err = float(np.max(np.abs(zf - ph.image)))
    rep = metrics(np.abs(ph.image), np.abs(ph.image))
    ok = err < 1e-10 and rep.nmse == 0 and rep.ssim == 1 and rep.psnr == 100
    return ok, f"round-trip err {err:.1e}, metrics {rep}"


@check("checkpoint-roundtrip")
def _ckpt():
    cfg = TrainConfig(model=ModelConfig(groups=1, blocks=1, channels=4, state_size=2), steps=0)
    model = DHMamba.create(cfg.model)
    x = np.random.default_rng(8).normal(size=(1, 2, 8, 8))
    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "m.ckpt"
        save_checkpoint(path, Checkpoint.from_model(cfg, model))
        again = load_checkpoint(path).model()
    same = np.array_equal(model(x).data, again(x).data)
    return bool(same), f"{parameter_count(model.params)} params"


@check("cost-ordering")
def _cost():
    macs = [count_cost(ModelConfig(n_lr=n), 32, 32).macs for n in range(4)]
    ok = all(a > b for a, b in zip(macs, macs[1:]))
    ok = ok and count_cost(ModelConfig(), 32, 32).params == parameter_count(init_params(ModelConfig()))
    return ok, "MACs " + " > ".join(str(m) for m in macs)


@check("erf-conv-control")
def _erf():
    img = np.random.default_rng(9).normal(size=(2, 16, 16))
    n = support(erf_map(conv_control(), img, (8, 8)))
    return n == 9, f"support {n}"


def run(verbose: bool = True, out=print) -> bool:
    ok_all = True
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # report and continue
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        ok_all &= bool(ok)
        if verbose:
            out(f"{'PASS' if ok else 'FAIL'}  {name:34s} {time.perf_counter() - t0:6.2f}s  {detail}")
    if verbose:
        out("selftest: " + ("all checks passed" if ok_all else "FAILED"))
    return ok_all


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(0 if run() else 1)

