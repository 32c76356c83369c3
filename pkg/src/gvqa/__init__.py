"""Weakly-supervised temporally-grounded video QA at desk scale."""

from .metrics import GroundingLabel, MetricReport, Prediction, evaluate
from .model import (
    Episode,
    ModelConfig,
    init_params,
    load_checkpoint,
    predict_episode,
    save_checkpoint,
)
from .synth import SynthConfig, generate, split_by_video
from .temporal import TemporalSegment, VideoExtent, intersect_len, union_len, iop, iou
from .trainer import TrainConfig, train

__all__ = [
    "Episode",
    "GroundingLabel",
    "MetricReport",
    "ModelConfig",
    "Prediction",
    "SynthConfig",
    "TemporalSegment",
    "TrainConfig",
    "VideoExtent",
    "evaluate",
    "generate",
    "init_params",
    "intersect_len",
    "iop",
    "iou",
    "load_checkpoint",
    "predict_episode",
    "save_checkpoint",
    "split_by_video",
    "train",
    "union_len",
]

__version__ = "0.1.0"
