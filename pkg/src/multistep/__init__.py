"""Multi-step traffic-flow forecasting toolkit.

Recursive, direct, hybrid, and multi-output strategies over a small
from-scratch dense-network core, plus corrective meta-training for
recursive models and conditional-GAN data augmentation for the
multi-output setting.
"""

from .data import Normalizer, SplitSpec, TimeSeries, WindowedDataset
from .nn import AdamState, Mlp, TrainConfig

__all__ = [
    "AdamState",
    "Mlp",
    "Normalizer",
    "SplitSpec",
    "TimeSeries",
    "TrainConfig",
    "WindowedDataset",
]

__version__ = "0.1.0"
