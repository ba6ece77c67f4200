"""Closed-form ridge regression: steady-state baseline and linear probe."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class RidgeModel:
    weights: np.ndarray  # (n_features, n_targets)
    intercept: np.ndarray  # (n_targets,)


def ridge_fit(x: np.ndarray, y: np.ndarray, l2: float = 0.0,
              fit_intercept: bool = True) -> RidgeModel:
    """Least squares with L2 penalty on the weights (intercept unpenalized).

    Solved as an augmented least-squares problem [X; sqrt(l2) I] via SVD,
    which stays stable for rank-deficient designs.
    """
    if l2 < 0:
        raise ValueError(f"l2 must be >= 0, got {l2}")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    y2d = y.reshape(len(x), -1)
    if fit_intercept:
        x_off = x.mean(axis=0)
        y_off = y2d.mean(axis=0)
        xc = x - x_off
        yc = y2d - y_off
    else:
        x_off = np.zeros(x.shape[1])
        y_off = np.zeros(y2d.shape[1])
        xc, yc = x, y2d
    if l2 > 0:
        reg = np.sqrt(l2) * np.eye(x.shape[1])
        xa = np.vstack([xc, reg])
        ya = np.vstack([yc, np.zeros((x.shape[1], y2d.shape[1]))])
    else:
        xa, ya = xc, yc
    weights, *_ = np.linalg.lstsq(xa, ya, rcond=None)
    intercept = y_off - x_off @ weights
    return RidgeModel(weights=weights, intercept=intercept)


def ridge_predict(model: RidgeModel, x: np.ndarray) -> np.ndarray:
    return np.asarray(x, dtype=float) @ model.weights + model.intercept
