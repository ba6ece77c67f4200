"""Feature scaling fitted on training rows only."""

from __future__ import annotations

import numpy as np

_FLOOR = 1e-8


class NotFittedError(RuntimeError):
    """Scaler used before fit()."""


class Scaler:
    """Per-feature standard or min-max scaling.

    Degenerate features (zero spread) are floored so constant columns
    transform to zero instead of blowing up. inverse_transform undoes
    transform exactly up to float rounding.
    """

    def __init__(self, mode: str = "standard"):
        if mode not in ("standard", "minmax"):
            raise ValueError(f"mode must be 'standard' or 'minmax', got {mode!r}")
        self.mode = mode
        self.offset = None
        self.scale = None

    def fit(self, rows: np.ndarray) -> "Scaler":
        rows = np.asarray(rows, dtype=float)
        if self.mode == "standard":
            self.offset = rows.mean(axis=0)
            self.scale = np.maximum(rows.std(axis=0), _FLOOR)
        else:
            lo = rows.min(axis=0)
            hi = rows.max(axis=0)
            self.offset = lo
            self.scale = np.maximum(hi - lo, _FLOOR)
        return self

    def _check(self):
        if self.offset is None:
            raise NotFittedError("scaler must be fitted before use")

    def transform(self, rows: np.ndarray) -> np.ndarray:
        self._check()
        return (np.asarray(rows, dtype=float) - self.offset) / self.scale

    def inverse_transform(self, rows: np.ndarray) -> np.ndarray:
        self._check()
        return np.asarray(rows, dtype=float) * self.scale + self.offset

    def state_dict(self) -> dict:
        self._check()
        return {"mode": self.mode, "offset": self.offset.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_state_dict(cls, state: dict) -> "Scaler":
        scaler = cls(state["mode"])
        scaler.offset = np.asarray(state["offset"], dtype=float)
        scaler.scale = np.asarray(state["scale"], dtype=float)
        return scaler
