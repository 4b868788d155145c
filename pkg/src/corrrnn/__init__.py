"""Correlational recurrent encoder-decoder for fusing two synchronized
sequence modalities."""

__version__ = "0.1.0"

from .config import ModelConfig, TrainConfig, preset
from .encoder import batch_correlation, dynamic_weights, encode_sequence, encode_single_modality
from .params import ModelParams, init_model

__all__ = ["ModelConfig", "TrainConfig", "preset", "batch_correlation", "dynamic_weights",
           "encode_sequence", "encode_single_modality", "ModelParams", "init_model"]
