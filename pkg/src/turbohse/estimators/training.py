"""Shared training machinery: config, Adam, early stopping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class TrainingError(RuntimeError):
    """Training aborted (non-finite loss or invalid configuration)."""


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 60
    batch_size: int = 64
    seed: int = 0
    patience: int = 10  # early stop after this many non-improving epochs
    bptt_window: int = 100
    mask_padding: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise TrainingError("learning_rate, epochs and batch_size must be positive")
        if self.bptt_window < 1:
            raise TrainingError("bptt_window must be >= 1")


class Adam:
    """Stochastic gradient descent with adaptive moment estimates.

    Updates the given parameter arrays in place; `grads` passed to step()
    must be aligned with the parameter list.
    """

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1**self.t
        bias2 = 1.0 - b2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)


class EarlyStopper:
    """Track the best validation loss; signal stop after `patience` bad epochs."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = np.inf
        self.bad_epochs = 0
        self.best_params = None

    def observe(self, loss: float, params) -> bool:
        """Record an epoch; returns True when training should stop."""
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite validation loss {loss}")
        if loss < self.best:
            self.best = loss
            self.bad_epochs = 0
            self.best_params = [p.copy() for p in params]
            return False
        self.bad_epochs += 1
        return self.bad_epochs >= self.patience

    def restore(self, params):
        if self.best_params is not None:
            for p, best in zip(params, self.best_params):
                p[...] = best
