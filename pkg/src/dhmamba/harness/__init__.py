"""Training, evaluation, accounting and the command line."""

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import TrainConfig, dump_config, load_config, preset_model
from .cost import CostReport, count_cost
from .data import PairSet, make_pairs
from .erf import conv_control, erf_map, support
from .evaluate import evaluate
from .optim import AdamW, cosine_lr
from .report import ImageRow, RunReport
from .train import TrainingDiverged, train

__all__ = [
    "AdamW",
    "Checkpoint",
    "CostReport",
    "ImageRow",
    "PairSet",
    "RunReport",
    "TrainConfig",
    "TrainingDiverged",
    "conv_control",
    "cosine_lr",
    "count_cost",
    "dump_config",
    "erf_map",
    "evaluate",
    "load_checkpoint",
    "load_config",
    "make_pairs",
    "preset_model",
    "save_checkpoint",
    "support",
    "train",
]
