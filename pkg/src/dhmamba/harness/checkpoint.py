"""Checkpoints: weights, optimizer moments, step counter, sampler state and config echo
in one tensor container file."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..dhnet import DHMamba
from ..tensor import parameter, serialize
from .config import TrainConfig

FORMAT = "dhmamba-checkpoint-1"


@dataclass
class Checkpoint:
    config: TrainConfig
    weights: dict[str, np.ndarray]
    step: int = 0
    optimizer: dict[str, np.ndarray] = field(default_factory=dict)
    rng_state: dict | None = None

    def model(self) -> DHMamba:
        """Rebuild the network; raises if the weights do not fit the config."""
        m = DHMamba(self.config.model, {k: parameter(v.copy(), name=k) for k, v in self.weights.items()})
        m.check_compatible()
        return m

    @classmethod
    def from_model(cls, config: TrainConfig, model: DHMamba, step: int = 0, optimizer=None, rng_state=None):
        weights = {k: t.data.copy() for k, t in model.params.items()}
        return cls(config, weights, step, dict(optimizer or {}), rng_state)


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    arrays = {f"w/{k}": v for k, v in ckpt.weights.items()}
    arrays.update({f"opt/{k}": v for k, v in ckpt.optimizer.items()})
    meta = {"format": FORMAT, "step": ckpt.step, "config": ckpt.config.to_dict(), "rng_state": ckpt.rng_state}
    serialize.save(path, arrays, meta)


def load_checkpoint(path) -> Checkpoint:
    arrays, meta = serialize.load(path)
    if meta.get("format") != FORMAT:
        raise ValueError(f"{path}: not a checkpoint (format={meta.get('format')!r})")
    weights = {k[2:]: v for k, v in arrays.items() if k.startswith("w/")}
    opt = {k[4:]: v for k, v in arrays.items() if k.startswith("opt/")}
    return Checkpoint(TrainConfig.from_dict(meta["config"]), weights, int(meta["step"]), opt, meta.get("rng_state"))
