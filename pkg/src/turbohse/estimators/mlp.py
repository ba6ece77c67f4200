"""Fully connected regressor trained on per-timestep rows.

The steady-state view of the inverse problem: each sensor row is mapped
independently to the 10 health indicators, mean-squared error in scaled
space. Hidden layers use softplus (a smooth rectifier, so the analytic
gradients can be validated against central finite differences to tight
tolerances).
"""

from __future__ import annotations

import numpy as np

from .training import Adam, EarlyStopper, TrainConfig, TrainingError


def softplus(x):
    # log(1 + e^x) without overflow; equals x for large x
    return np.where(x > 30.0, x, np.log1p(np.exp(np.minimum(x, 30.0))))


def sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


_ACTIVATIONS = {
    "softplus": (softplus, sigmoid),
    "linear": (lambda x: x, lambda x: np.ones_like(x)),
}


class MlpModel:
    """Feed-forward net with linear output layer.

    layer_sizes includes input and output, e.g. (28, 128, 128, 10).
    Weights use the (in, out) convention: forward is X @ W + b.
    """

    def __init__(self, layer_sizes, seed: int = 0, activation: str = "softplus"):
        if len(layer_sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        self.activation = activation
        rng = np.random.default_rng(seed)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            scale = np.sqrt(2.0 / fan_in)
            self.weights.append(rng.normal(0.0, scale, (fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    # -- parameter plumbing -------------------------------------------------

    def parameters(self):
        params = []
        for w, b in zip(self.weights, self.biases):
            params.append(w)
            params.append(b)
        return params

    def param_vector(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    def set_param_vector(self, vec: np.ndarray):
        pos = 0
        for p in self.parameters():
            p[...] = vec[pos : pos + p.size].reshape(p.shape)
            pos += p.size
        if pos != vec.size:
            raise ValueError("parameter vector size mismatch")

    # -- forward / backward -------------------------------------------------

    def forward(self, x: np.ndarray) -> np.ndarray:
        out, _ = self.forward_cached(x)
        return out

    def forward_cached(self, x: np.ndarray):
        act, _ = _ACTIVATIONS[self.activation]
        x = np.atleast_2d(np.asarray(x, dtype=float))
        inputs = [x]
        pre_acts = []
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            pre_acts.append(z)
            h = z if i == last else act(z)
            if i != last:
                inputs.append(h)
        return h, (inputs, pre_acts)

    def backward(self, cache, d_out: np.ndarray):
        """Gradients of a scalar loss wrt parameters and input, given dL/d(output)."""
        _, act_grad = _ACTIVATIONS[self.activation]
        inputs, pre_acts = cache
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        delta = d_out
        for i in range(len(self.weights) - 1, -1, -1):
            grads_w[i] = inputs[i].T @ delta
            grads_b[i] = delta.sum(axis=0)
            delta = delta @ self.weights[i].T
            if i > 0:
                delta = delta * act_grad(pre_acts[i - 1])
        grads = []
        for gw, gb in zip(grads_w, grads_b):
            grads.append(gw)
            grads.append(gb)
        return grads, delta

    def loss_and_grads(self, x: np.ndarray, y: np.ndarray):
        """Mean squared error over all entries of the batch, with gradients."""
        pred, cache = self.forward_cached(x)
        y = np.atleast_2d(np.asarray(y, dtype=float))
        resid = pred - y
        loss = float(np.mean(resid * resid))
        d_pred = 2.0 * resid / resid.size
        grads, _ = self.backward(cache, d_pred)
        return loss, grads


def mse(model: MlpModel, x: np.ndarray, y: np.ndarray) -> float:
    resid = model.forward(x) - y
    return float(np.mean(resid * resid))


def train_mlp(model: MlpModel, x_train, y_train, x_val, y_val,
              cfg: TrainConfig) -> dict:
    """Mini-batch Adam on MSE with early stopping on validation loss.

    Returns a history dict with per-epoch train/val losses; the model is
    left holding the best-validation parameters.
    """
    x_train = np.asarray(x_train, dtype=float)
    y_train = np.asarray(y_train, dtype=float)
    rng = np.random.default_rng(cfg.seed)
    params = model.parameters()
    opt = Adam(params, lr=cfg.learning_rate)
    stopper = EarlyStopper(cfg.patience)
    history = {"train_loss": [], "val_loss": []}
    n = len(x_train)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, grads = model.loss_and_grads(x_train[idx], y_train[idx])
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite training loss at epoch {epoch}, batch offset {start}"
                )
            opt.step(grads)
            epoch_loss += loss * len(idx)
        val_loss = mse(model, x_val, y_val)
        history["train_loss"].append(epoch_loss / n)
        history["val_loss"].append(val_loss)
        if stopper.observe(val_loss, params):
            break
    stopper.restore(params)
    return history
