"""The training loop."""

from __future__ import annotations

import logging
import math
import time
from pathlib import Path

from .. import rng as rng_mod
from ..dhnet import DHMamba, l1_loss
from ..tensor import Tensor
from ..tensor.serialize import atomic_write_text
from .checkpoint import Checkpoint, save_checkpoint
from .config import TrainConfig, dump_config
from .data import PairSet, make_pairs
from .optim import AdamW, cosine_lr
from .report import RunReport

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


def train(cfg: TrainConfig, out_dir=None, data: PairSet | None = None,
          progress_every: int = 0) -> tuple[Checkpoint, RunReport]:
    """Fit a fresh model on synthetic pairs.

    With ``out_dir`` the checkpoint (``model.ckpt``), the loss log
    (``losses.csv``, gradient norms before clipping) and the resolved config
    (``config.json``) are written there. A non-finite loss or gradient raises :class:`TrainingDiverged`.
    """
    t0 = time.perf_counter()
    if data is None:
        data = make_pairs(cfg.n_train, cfg.size, cfg.mask_kind, cfg.af, cfg.seed, "train", cfg.n_ellipses)
    model = DHMamba.create(cfg.model)
    opt = AdamW(model.params, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay)
    sampler = rng_mod.stream(cfg.seed, "batches")
    n = len(data)
    report = RunReport()
    for step in range(cfg.steps):
        idx = sampler.choice(n, size=cfg.batch_size, replace=cfg.batch_size > n)
        lr = cosine_lr(step, cfg.steps, cfg.lr_init, cfg.lr_final)
        opt.zero_grad()
        loss = l1_loss(model(Tensor(data.inputs[idx])), data.targets[idx])
        value = loss.item()
        if not math.isfinite(value):
            raise TrainingDiverged(f"non-finite loss {value} at step {step} (lr={lr:.3g})")
        loss.backward()
        gnorm = opt.grad_norm()
        if not math.isfinite(gnorm):
            raise TrainingDiverged(f"non-finite gradient norm at step {step} (lr={lr:.3g}, loss={value:.4g})")
        if cfg.grad_clip is not None:
            opt.clip(cfg.grad_clip)
        opt.step(lr)
        report.losses.append({"step": step, "lr": lr, "loss": value, "grad_norm": gnorm})
        if progress_every and step % progress_every == 0:
            log.info("step %d loss %.5f lr %.3g |g| %.3g", step, value, lr, gnorm)
    report.seconds = time.perf_counter() - t0
    ckpt = Checkpoint.from_model(cfg, model, cfg.steps, opt.state() if cfg.steps else {},
                                 sampler.bit_generator.state)
    if out_dir is not None:
        out = Path(out_dir)
        save_checkpoint(out / "model.ckpt", ckpt)
        atomic_write_text(out / "losses.csv", report.loss_csv())
        atomic_write_text(out / "config.json", dump_config(cfg) + "\n")
    return ckpt, report
