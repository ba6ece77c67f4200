"""Self-supervised autoencoder and frozen-latent linear probe.

The autoencoder compresses single sensor frames into a low-dimensional
code by minimizing reconstruction error. It is trained on sensor rows
alone: the training entry point deliberately accepts no health-indicator
argument, so ground-truth labels are unreachable from this code path.

Representation quality is then measured by a linear probe: a ridge
regressor from the *frozen* codes to the health indicators, fitted on the
training split only. Probe performance lower-bounds how much health
information survives unsupervised compression.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .mlp import MlpModel
from .ridge import RidgeModel, ridge_fit, ridge_predict
from .training import Adam, EarlyStopper, TrainConfig, TrainingError


class AutoencoderModel:
    """Encoder/decoder pair with a linear bottleneck and linear output."""

    def __init__(self, input_dim: int, latent_dim: int = 8, hidden=(32,),
                 seed: int = 0, activation: str = "softplus"):
        if latent_dim > input_dim:
            raise ValueError("latent dimension must not exceed input dimension")
        self.input_dim = input_dim
        self.latent_dim = latent_dim
        self.encoder = MlpModel((input_dim, *hidden, latent_dim),
                                seed=seed, activation=activation)
        self.decoder = MlpModel((latent_dim, *reversed(hidden), input_dim),
                                seed=seed + 1, activation=activation)

    def parameters(self):
        return self.encoder.parameters() + self.decoder.parameters()

    def encode(self, rows: np.ndarray) -> np.ndarray:
        return self.encoder.forward(rows)

    def reconstruct(self, rows: np.ndarray) -> np.ndarray:
        return self.decoder.forward(self.encode(rows))

    def loss_and_grads(self, rows: np.ndarray):
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        latent, enc_cache = self.encoder.forward_cached(rows)
        recon, dec_cache = self.decoder.forward_cached(latent)
        resid = recon - rows
        loss = float(np.mean(resid * resid))
        d_recon = 2.0 * resid / resid.size
        dec_grads, d_latent = self.decoder.backward(dec_cache, d_recon)
        enc_grads, _ = self.encoder.backward(enc_cache, d_latent)
        return loss, enc_grads + dec_grads

    def reconstruction_mse(self, rows: np.ndarray) -> float:
        resid = self.reconstruct(rows) - rows
        return float(np.mean(resid * resid))

    def encoder_hash(self) -> str:
        """Fingerprint of the encoder parameters; used to audit freezing."""
        digest = hashlib.sha256()
        for p in self.encoder.parameters():
            digest.update(np.ascontiguousarray(p).tobytes())
        return digest.hexdigest()


def train_autoencoder(sensor_rows_train: np.ndarray, sensor_rows_val: np.ndarray,
                      cfg: TrainConfig, latent_dim: int = 8, hidden=(32,),
                      activation: str = "softplus") -> AutoencoderModel:
    """Fit an autoencoder on sensor rows only (no label argument exists).

    Mini-batch Adam on reconstruction MSE with early stopping on the
    validation reconstruction error.
    """
    rows = np.atleast_2d(np.asarray(sensor_rows_train, dtype=float))
    val_rows = np.atleast_2d(np.asarray(sensor_rows_val, dtype=float))
    model = AutoencoderModel(rows.shape[1], latent_dim=latent_dim, hidden=hidden,
                             seed=cfg.seed, activation=activation)
    rng = np.random.default_rng(cfg.seed)
    params = model.parameters()
    opt = Adam(params, lr=cfg.learning_rate)
    stopper = EarlyStopper(cfg.patience)
    n = len(rows)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, grads = model.loss_and_grads(rows[idx])
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite reconstruction loss at epoch {epoch}")
            opt.step(grads)
        if stopper.observe(model.reconstruction_mse(val_rows), params):
            break
    stopper.restore(params)
    return model


def probe_latents(model: AutoencoderModel, sensor_rows_train: np.ndarray,
                  targets_train: np.ndarray, l2: float = 1e-6) -> RidgeModel:
    """Fit the linear decoding head on frozen latent codes.

    The encoder is only evaluated, never updated; callers can verify with
    encoder_hash() before and after.
    """
    z = model.encode(sensor_rows_train)
    return ridge_fit(z, np.asarray(targets_train, dtype=float), l2=l2)


def probe_predict(model: AutoencoderModel, probe: RidgeModel,
                  sensor_rows: np.ndarray) -> np.ndarray:
    return ridge_predict(probe, model.encode(sensor_rows))
