"""Gated recurrent regressor for the non-stationary view of the problem.

A single GRU layer consumes the sensor sequence step by step and a linear
read-out emits the 10 health indicators at every step, so the estimate at
time t can exploit the whole measurement history up to t. Training uses
truncated backpropagation through time: the hidden state is carried across
window boundaries, gradients are not.

Gate equations (update z, reset r, candidate hc):

    z  = sigmoid(x W_z + h U_z + b_z)
    r  = sigmoid(x W_r + h U_r + b_r)
    hc = tanh(x W_h + (r * h) U_h + b_h)
    h' = (1 - z) * h + z * hc

Padded timesteps are masked: they contribute exactly zero loss and zero
gradient, so appending padding to a batch changes nothing.
"""

from __future__ import annotations

import numpy as np

from .mlp import sigmoid
from .training import Adam, EarlyStopper, TrainConfig, TrainingError

_PARAM_NAMES = ("w_z", "u_z", "b_z", "w_r", "u_r", "b_r",
                "w_h", "u_h", "b_h", "w_out", "b_out")


class GruModel:
    def __init__(self, input_size: int, hidden_size: int = 64,
                 output_size: int = 10, seed: int = 0):
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.output_size = output_size
        rng = np.random.default_rng(seed)
        d, h, k = input_size, hidden_size, output_size

        def init(fan_in, shape):
            return rng.normal(0.0, 1.0 / np.sqrt(fan_in), shape)

        self.w_z, self.w_r, self.w_h = (init(d, (d, h)) for _ in range(3))
        self.u_z, self.u_r, self.u_h = (init(h, (h, h)) for _ in range(3))
        self.b_z, self.b_r, self.b_h = (np.zeros(h) for _ in range(3))
        self.w_out = init(h, (h, k))
        self.b_out = np.zeros(k)

    def parameters(self):
        return [getattr(self, name) for name in _PARAM_NAMES]

    def param_vector(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    def set_param_vector(self, vec: np.ndarray):
        pos = 0
        for p in self.parameters():
            p[...] = vec[pos : pos + p.size].reshape(p.shape)
            pos += p.size
        if pos != vec.size:
            raise ValueError("parameter vector size mismatch")

    # -- forward ------------------------------------------------------------

    def step(self, x_t: np.ndarray, h_prev: np.ndarray):
        z = sigmoid(x_t @ self.w_z + h_prev @ self.u_z + self.b_z)
        r = sigmoid(x_t @ self.w_r + h_prev @ self.u_r + self.b_r)
        hc = np.tanh(x_t @ self.w_h + (r * h_prev) @ self.u_h + self.b_h)
        h = (1.0 - z) * h_prev + z * hc
        return h, (z, r, hc)

    def forward(self, seqs: np.ndarray, h0: np.ndarray | None = None):
        """Per-step predictions for a (B, T, D) batch; returns (preds, h_last)."""
        seqs = np.asarray(seqs, dtype=float)
        batch, steps, _ = seqs.shape
        h = np.zeros((batch, self.hidden_size)) if h0 is None else h0.copy()
        preds = np.empty((batch, steps, self.output_size))
        for t in range(steps):
            h, _ = self.step(seqs[:, t, :], h)
            preds[:, t, :] = h @ self.w_out + self.b_out
        return preds, h

    # -- loss and gradients (full BPTT over the given chunk) -----------------

    def loss_and_grads(self, seqs: np.ndarray, targets: np.ndarray,
                       mask: np.ndarray, h0: np.ndarray | None = None):
        """Masked MSE over a (B, T, D) chunk with exact gradients.

        Returns (loss, grads, h_last); h_last can seed the next truncated
        window. Masked steps contribute zero loss and zero gradient; a
        fully masked chunk yields loss 0 and zero gradients.
        """
        seqs = np.asarray(seqs, dtype=float)
        targets = np.asarray(targets, dtype=float)
        mask = np.asarray(mask, dtype=float)
        batch, steps, _ = seqs.shape
        h = np.zeros((batch, self.hidden_size)) if h0 is None else h0.copy()

        hs_prev = np.empty((steps, batch, self.hidden_size))
        zs = np.empty_like(hs_prev)
        rs = np.empty_like(hs_prev)
        hcs = np.empty_like(hs_prev)
        hs = np.empty_like(hs_prev)
        for t in range(steps):
            hs_prev[t] = h
            h, (zs[t], rs[t], hcs[t]) = self.step(seqs[:, t, :], h)
            hs[t] = h

        preds = hs.transpose(1, 0, 2) @ self.w_out + self.b_out
        resid = (preds - targets) * mask[:, :, None]
        denom = mask.sum() * self.output_size
        if denom == 0:
            zero = [np.zeros_like(p) for p in self.parameters()]
            return 0.0, zero, h
        loss = float(np.sum(resid * resid) / denom)
        d_pred = 2.0 * resid / denom  # (B, T, K); already zero on masked steps

        grads = {name: np.zeros_like(getattr(self, name)) for name in _PARAM_NAMES}
        dh = np.zeros((batch, self.hidden_size))
        for t in range(steps - 1, -1, -1):
            dp = d_pred[:, t, :]
            grads["w_out"] += hs[t].T @ dp
            grads["b_out"] += dp.sum(axis=0)
            dh = dh + dp @ self.w_out.T

            z, r, hc, h_prev = zs[t], rs[t], hcs[t], hs_prev[t]
            x_t = seqs[:, t, :]
            dz = dh * (hc - h_prev)
            dhc = dh * z
            dh_prev = dh * (1.0 - z)

            da_h = dhc * (1.0 - hc * hc)
            grads["w_h"] += x_t.T @ da_h
            grads["u_h"] += (r * h_prev).T @ da_h
            grads["b_h"] += da_h.sum(axis=0)
            drh = da_h @ self.u_h.T
            dr = drh * h_prev
            dh_prev += drh * r

            da_z = dz * z * (1.0 - z)
            grads["w_z"] += x_t.T @ da_z
            grads["u_z"] += h_prev.T @ da_z
            grads["b_z"] += da_z.sum(axis=0)
            dh_prev += da_z @ self.u_z.T

            da_r = dr * r * (1.0 - r)
            grads["w_r"] += x_t.T @ da_r
            grads["u_r"] += h_prev.T @ da_r
            grads["b_r"] += da_r.sum(axis=0)
            dh_prev += da_r @ self.u_r.T

            dh = dh_prev
        return loss, [grads[name] for name in _PARAM_NAMES], h


def masked_mse(model: GruModel, seqs, targets, mask) -> float:
    preds, _ = model.forward(seqs)
    resid = (preds - np.asarray(targets, dtype=float)) * np.asarray(mask, dtype=float)[:, :, None]
    denom = np.asarray(mask, dtype=float).sum() * model.output_size
    if denom == 0:
        return 0.0
    return float(np.sum(resid * resid) / denom)


def train_gru(model: GruModel, train_seqs, train_targets, train_mask,
              val_seqs, val_targets, val_mask, cfg: TrainConfig) -> dict:
    """Truncated BPTT with Adam, early stopping on masked validation MSE.

    Sequences are mini-batched; within a batch the hidden state is carried
    across successive cfg.bptt_window chunks while gradients stay local to
    each chunk (one optimizer step per chunk).
    """
    train_seqs = np.asarray(train_seqs, dtype=float)
    train_targets = np.asarray(train_targets, dtype=float)
    train_mask = np.asarray(train_mask, dtype=float)
    rng = np.random.default_rng(cfg.seed)
    params = model.parameters()
    opt = Adam(params, lr=cfg.learning_rate)
    stopper = EarlyStopper(cfg.patience)
    history = {"train_loss": [], "val_loss": []}
    n_seq, total_steps, _ = train_seqs.shape
    seq_batch = min(cfg.batch_size, n_seq)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n_seq)
        epoch_loss = 0.0
        chunk_count = 0
        for start in range(0, n_seq, seq_batch):
            idx = order[start : start + seq_batch]
            h = None
            for w_start in range(0, total_steps, cfg.bptt_window):
                w_end = min(w_start + cfg.bptt_window, total_steps)
                loss, grads, h = model.loss_and_grads(
                    train_seqs[idx, w_start:w_end],
                    train_targets[idx, w_start:w_end],
                    train_mask[idx, w_start:w_end],
                    h0=h,
                )
                if not np.isfinite(loss):
                    raise TrainingError(
                        f"non-finite training loss at epoch {epoch}, window {w_start}"
                    )
                if train_mask[idx, w_start:w_end].sum() > 0:
                    opt.step(grads)
                    epoch_loss += loss
                    chunk_count += 1
        val_loss = masked_mse(model, val_seqs, val_targets, val_mask)
        history["train_loss"].append(epoch_loss / max(chunk_count, 1))
        history["val_loss"].append(val_loss)
        if stopper.observe(val_loss, params):
            break
    stopper.restore(params)
    return history
