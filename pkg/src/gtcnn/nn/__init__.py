"""Trainable graph-time convolutional networks."""

from gtcnn.nn.losses import cross_entropy, l1_penalty, mse
from gtcnn.nn.metrics import MapeResult, Metric, accuracy, mae, mape, rmse
from gtcnn.nn.model import (
    Activation,
    Architecture,
    ForwardCache,
    GTCNNConfig,
    GTCNNModel,
    ProductMode,
    Readout,
    backward,
    embed,
    forward,
    gcnn_baseline_forward,
    gcnn_inputs,
    init_model,
    network_inputs,
    predict,
    zero_model,
)
from gtcnn.nn.optim import Adam
from gtcnn.nn.training import (
    Dataset,
    EpochRecord,
    History,
    TrainConfig,
    evaluate,
    loss_gradients,
    split_dataset,
    train,
)

__all__ = [
    "Activation",
    "Adam",
    "Architecture",
    "Dataset",
    "EpochRecord",
    "ForwardCache",
    "GTCNNConfig",
    "GTCNNModel",
    "History",
    "MapeResult",
    "Metric",
    "ProductMode",
    "Readout",
    "TrainConfig",
    "accuracy",
    "backward",
    "cross_entropy",
    "embed",
    "evaluate",
    "forward",
    "gcnn_baseline_forward",
    "gcnn_inputs",
    "init_model",
    "l1_penalty",
    "loss_gradients",
    "mae",
    "mape",
    "mse",
    "network_inputs",
    "predict",
    "rmse",
    "split_dataset",
    "train",
    "zero_model",
]
