"""Held-out evaluation of a checkpoint against the zero-filled baseline."""

from __future__ import annotations

import time

from ..mrisim import magnitude, metrics
from ..tensor import Tensor
from .checkpoint import Checkpoint
from .data import PairSet, make_pairs
from .report import ImageRow, RunReport


def evaluate(ckpt: Checkpoint, n_images: int = 8, mask_kind: str | None = None, af=None,
             seed: int | None = None, size: int | None = None, data: PairSet | None = None,
             batch: int = 8) -> RunReport:
    """Per-image NMSE/PSNR/SSIM on magnitudes for the model and the zero-filled input.

    Unset options fall back to the checkpoint's training config; images come
    from the held-out ``test`` split so they never overlap the training draws.
    """
    cfg = ckpt.config
    model = ckpt.model()
    t0 = time.perf_counter()
    if data is None:
        data = make_pairs(
            n_images,
            size or cfg.size,
            mask_kind or cfg.mask_kind,
            af if af is not None else cfg.af,
            cfg.seed if seed is None else seed,
            "test",
            cfg.n_ellipses,
        )
    report = RunReport()
    for lo in range(0, len(data), batch):
        out = model(Tensor(data.inputs[lo : lo + batch])).data
        for k in range(out.shape[0]):
            i = lo + k
            ref = magnitude(data.targets[i])
            m = metrics(magnitude(out[k]), ref)
            z = metrics(magnitude(data.inputs[i]), ref)
            report.rows.append(ImageRow(i, int(data.seeds[i]), m.nmse, m.psnr, m.ssim, z.nmse, z.psnr, z.ssim))
    report.seconds = time.perf_counter() - t0
    return report
