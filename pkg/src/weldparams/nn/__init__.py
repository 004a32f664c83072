"""From-scratch neural network substrate: layers, MLP/CNN builders, SGD training."""
from .layers import BatchNorm, Conv2D, Dense, Dropout, Flatten, Layer, MaxPool2D, ReLU
from .network import (CnnConfig, MlpConfig, Network, TrainedNet, TrainingDivergedError, build_cnn,
                      build_mlp, loss_and_grads, predict_net, train)

__all__ = [
    "BatchNorm", "Conv2D", "Dense", "Dropout", "Flatten", "Layer", "MaxPool2D", "ReLU",
    "CnnConfig", "MlpConfig", "Network", "TrainedNet", "TrainingDivergedError",
    "build_cnn", "build_mlp", "loss_and_grads", "predict_net", "train",
]
