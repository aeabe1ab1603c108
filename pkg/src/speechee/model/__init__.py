from .network import (
    DecoderState,
    EncoderStates,
    ModelConfig,
    ModelParameters,
    SpeechToStructure,
    TargetSequence,
    init_parameters,
)
from .optim import AdamW, OptimizerConfig
from .targets import build_target, split_output
from .training import Batch, TrainConfig, TrainResult, predict_instances, train
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "AdamW",
    "Batch",
    "DecoderState",
    "EncoderStates",
    "ModelConfig",
    "ModelParameters",
    "OptimizerConfig",
    "SpeechToStructure",
    "TargetSequence",
    "TrainConfig",
    "TrainResult",
    "build_target",
    "init_parameters",
    "load_checkpoint",
    "predict_instances",
    "save_checkpoint",
    "split_output",
    "train",
]
