"""Trainable estimators for the sensor-to-health regression task.

Everything here is hand-rolled on numpy with analytically derived
gradients; every model is required to pass a central-difference gradient
check before it is trusted in an experiment (see the test suite).
"""

from .autoencoder import AutoencoderModel, probe_latents, train_autoencoder
from .gru import GruModel, train_gru
from .mlp import MlpModel, train_mlp
from .ridge import RidgeModel, ridge_fit, ridge_predict
from .scaling import NotFittedError, Scaler
from .training import Adam, TrainConfig, TrainingError

__all__ = [
    "Adam",
    "AutoencoderModel",
    "GruModel",
    "MlpModel",
    "NotFittedError",
    "RidgeModel",
    "Scaler",
    "TrainConfig",
    "TrainingError",
    "probe_latents",
    "ridge_fit",
    "ridge_predict",
    "train_autoencoder",
    "train_gru",
    "train_mlp",
]
