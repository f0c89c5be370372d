from .checkpoint import load, save
from .kernel import kernel_score, silverman_bandwidth
from .model import DEFAULT_ARCH, ScoreModel, forward
from .train import AdamW, TrainConfig, ardae_loss, train

__all__ = [
    "AdamW",
    "DEFAULT_ARCH",
    "ScoreModel",
    "TrainConfig",
    "ardae_loss",
    "forward",
    "kernel_score",
    "load",
    "save",
    "silverman_bandwidth",
    "train",
]
