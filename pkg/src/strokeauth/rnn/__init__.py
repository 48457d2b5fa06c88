"""Recurrent pair scorer: layers, Siamese model, and training."""

from .layers import (
    BlstmParams,
    LstmParams,
    blstm_backward,
    blstm_forward,
    init_blstm,
    init_lstm,
    lstm_backward,
    lstm_cell_step,
    lstm_forward,
    sigmoid,
)
from .model import (
    ModelConfig,
    PairExample,
    SiameseModel,
    batch_from_pairs,
    bce_loss,
    loss_and_gradients,
)
from .train import AdamState, EpochRecord, TrainConfig, TrainResult, evaluate_loss, make_batches, train

__all__ = [
    "AdamState",
    "BlstmParams",
    "EpochRecord",
    "LstmParams",
    "ModelConfig",
    "PairExample",
    "SiameseModel",
    "TrainConfig",
    "TrainResult",
    "batch_from_pairs",
    "bce_loss",
    "blstm_backward",
    "blstm_forward",
    "evaluate_loss",
    "init_blstm",
    "init_lstm",
    "loss_and_gradients",
    "lstm_backward",
    "lstm_cell_step",
    "lstm_forward",
    "make_batches",
    "sigmoid",
    "train",
]
