"""Training configuration and its JSON file schema.

A config file is a JSON object with two optional sections; unknown keys are
rejected so typos fail loudly::

    {
      "model": {"groups": 2, "blocks": 2, "channels": 16, "state_size": 8,
                "stride": 2, "n_lr": 3, "shuffle": 1, "seed": 0, "expand": 1,
                "dt_rank": null, "upsample": "nearest", "cab_ratio": 4},
      "train": {"steps": 200, "batch_size": 4, "lr_init": 0.002, "lr_final": 1e-05,
                "beta1": 0.9, "beta2": 0.99, "weight_decay": 0.05, "eps": 1e-08,
                "grad_clip": 0.5,
                "mask_kind": "cartesian", "af": 4, "n_train": 32, "size": 32,
                "n_ellipses": 6, "seed": 0}
    }
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from ..dhnet import PRESETS, ModelConfig


@dataclass(frozen=True)
class TrainConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    steps: int = 200
    batch_size: int = 4
    lr_init: float = 2e-3
    lr_final: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.99
    weight_decay: float = 0.05
    eps: float = 1e-8
    grad_clip: float | None = 0.5  # global gradient-norm cap, None disables
    mask_kind: str = "cartesian"
    af: float = 4
    n_train: int = 32
    size: int = 32
    n_ellipses: int = 6
    seed: int = 0

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.batch_size < 1 or self.n_train < 1:
            raise ValueError("batch_size and n_train must be >= 1")
        if not (self.lr_init >= self.lr_final > 0):
            raise ValueError("need lr_init >= lr_final > 0")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ValueError("grad_clip must be positive or null")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"] = self.model.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> TrainConfig:
        d = dict(d)
        model = d.pop("model", {})
        _reject_unknown(d, {f.name for f in fields(cls)} - {"model"}, "train")
        _reject_unknown(model, set(ModelConfig.__dataclass_fields__), "model")
        return cls(model=ModelConfig.from_dict(model), **d)

    def with_(self, **kw) -> TrainConfig:
        return replace(self, **kw)


def _reject_unknown(d: dict, allowed: set, section: str) -> None:
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ValueError(f"unknown {section} config keys: {unknown}")


def load_config(path) -> TrainConfig:
    raw = json.loads(Path(path).read_text())
    _reject_unknown(raw, {"model", "train"}, "top-level")
    train = dict(raw.get("train", {}))
    train["model"] = raw.get("model", {})
    return TrainConfig.from_dict(train)


def dump_config(cfg: TrainConfig) -> str:
    d = cfg.to_dict()
    model = d.pop("model")
    return json.dumps({"model": model, "train": d}, indent=2)


def preset_model(name: str) -> ModelConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}") from None
