"""Metrics, cross-validation plans, autocorrelation analysis, and reports.

Metrics are computed in original health-indicator units on unpadded
steps. The report mirrors the usual benchmark-table layout: one row per
(model, metric), one column per indicator plus an Avg column. The Avg
column is recomputed from the residuals of all indicators pooled
together, not by averaging the per-indicator cells, so it is a genuine
aggregate rather than a mean of means.

SMAPE uses the 2|e| / (|truth| + |pred| + 1e-8) variant: indicator values
straddle zero, so the epsilon guard keeps the ratio defined at exact
zeros, and the resulting score is symmetric in its arguments and bounded
by 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain import HI_NAMES

SMAPE_EPS = 1e-8
METRICS = ("SMAPE", "RMSEx1e3", "P.Corr")
AVG_COLUMN = "Avg"


class MetricUndefinedError(ValueError):
    """Metric has no value on this input (empty mask or constant series)."""


def _masked(truth, pred, mask):
    truth = np.asarray(truth, dtype=float).ravel()
    pred = np.asarray(pred, dtype=float).ravel()
    if truth.shape != pred.shape:
        raise ValueError(f"length mismatch: truth {truth.shape}, pred {pred.shape}")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool).ravel()
        if mask.shape != truth.shape:
            raise ValueError(f"mask shape {mask.shape} does not match {truth.shape}")
        truth, pred = truth[mask], pred[mask]
    if truth.size == 0:
        raise MetricUndefinedError("no unmasked steps to evaluate")
    return truth, pred


def smape(truth, pred, mask=None) -> float:
    """Symmetric mean absolute percentage error in [0, 2]."""
    t, p = _masked(truth, pred, mask)
    return float(np.mean(2.0 * np.abs(p - t) / (np.abs(t) + np.abs(p) + SMAPE_EPS)))


def rmse(truth, pred, mask=None) -> float:
    t, p = _masked(truth, pred, mask)
    return float(np.sqrt(np.mean((p - t) ** 2)))


def pearson(truth, pred, mask=None) -> float:
    """Sample correlation; raises MetricUndefinedError on constant series."""
    t, p = _masked(truth, pred, mask)
    t = t - t.mean()
    p = p - p.mean()
    denom = np.sqrt(np.sum(t * t) * np.sum(p * p))
    if denom == 0:
        raise MetricUndefinedError("Pearson undefined for constant series")
    return float(np.clip(np.sum(t * p) / denom, -1.0, 1.0))


@dataclass(frozen=True)
class SplitPlan:
    fold_index: int
    train_ids: tuple[int, ...]
    val_ids: tuple[int, ...]
    test_ids: tuple[int, ...]


def kfold_plan(ids, k: int = 5, seed: int = 0) -> list[SplitPlan]:
    """Shuffle ids into k disjoint test folds; split the rest 7:1 train:val.

    Every id appears in exactly one test fold, and never in its own
    fold's train or val set. With 50 ids and k=5 each fold has
    10 test / 35 train / 5 val, matching a 70/10/20 split.
    """
    ids = list(ids)
    if len(ids) < k:
        raise ValueError(f"need at least k={k} ids, got {len(ids)}")
    rng = np.random.default_rng(seed)
    shuffled = [ids[i] for i in rng.permutation(len(ids))]
    folds = np.array_split(np.arange(len(shuffled)), k)
    plans = []
    for fold_index, test_pos in enumerate(folds):
        test_set = set(int(i) for i in test_pos)
        test = [shuffled[i] for i in sorted(test_set)]
        rest = [shuffled[i] for i in range(len(shuffled)) if i not in test_set]
        n_val = max(1, round(len(rest) / 8))
        val = rest[:n_val]
        train = rest[n_val:]
        plans.append(SplitPlan(fold_index=fold_index, train_ids=tuple(train),
                               val_ids=tuple(val), test_ids=tuple(test)))
    return plans


def acf(series, max_lag: int) -> np.ndarray:
    """Autocorrelation for lags 0..max_lag via the biased autocovariance."""
    x = np.asarray(series, dtype=float).ravel()
    if len(x) <= max_lag:
        raise ValueError(f"series length {len(x)} must exceed max_lag {max_lag}")
    x = x - x.mean()
    c0 = float(np.dot(x, x))
    if c0 == 0:
        raise MetricUndefinedError("autocorrelation undefined for constant series")
    out = np.empty(max_lag + 1)
    out[0] = 1.0
    for k in range(1, max_lag + 1):
        out[k] = float(np.dot(x[k:], x[:-k])) / c0
    return out


def pacf(series, max_lag: int) -> np.ndarray:
    """Partial autocorrelation via the Durbin-Levinson recursion.

    Index 0 is 1 by convention; index k is the lag-k partial coefficient.
    """
    r = acf(series, max_lag)
    out = np.empty(max_lag + 1)
    out[0] = 1.0
    if max_lag == 0:
        return out
    phi_prev = np.array([r[1]])
    out[1] = r[1]
    for k in range(2, max_lag + 1):
        num = r[k] - float(phi_prev @ r[k - 1 : 0 : -1])
        den = 1.0 - float(phi_prev @ r[1:k])
        phi_kk = num / den
        phi = np.empty(k)
        phi[: k - 1] = phi_prev - phi_kk * phi_prev[::-1]
        phi[k - 1] = phi_kk
        out[k] = phi_kk
        phi_prev = phi
    return out


@dataclass
class FoldPredictions:
    """Test-set predictions of one model on one fold, in original HI units."""

    fold_index: int
    truths: dict[int, np.ndarray]  # id -> (L, 10)
    preds: dict[int, np.ndarray]  # id -> (L, 10)
    masks: dict[int, np.ndarray] | None = None


@dataclass
class MetricCell:
    mean: float | None
    std: float | None
    folds_used: int
    folds_total: int

    @property
    def available(self) -> bool:
        return self.mean is not None


@dataclass
class EvalReport:
    models: tuple[str, ...]
    hi_names: tuple[str, ...]
    columns: tuple[str, ...]
    cells: dict = field(default_factory=dict)  # (model, metric, column) -> MetricCell

    def cell(self, model: str, metric: str, column: str) -> MetricCell:
        return self.cells[(model, metric, column)]

    def value(self, model: str, metric: str, column: str = AVG_COLUMN) -> float:
        cell = self.cell(model, metric, column)
        if not cell.available:
            raise MetricUndefinedError(f"{model}/{metric}/{column} is not available")
        return cell.mean

    def to_json_dict(self) -> dict:
        rows = {}
        for model in self.models:
            rows[model] = {}
            for metric in METRICS:
                rows[model][metric] = {}
                for col in self.columns:
                    c = self.cell(model, metric, col)
                    rows[model][metric][col] = {
                        "mean": c.mean,
                        "std": c.std,
                        "folds_used": c.folds_used,
                        "folds_total": c.folds_total,
                    }
        return {"columns": list(self.columns), "models": list(self.models), "cells": rows}

    def to_csv_text(self) -> str:
        lines = ["model,metric," + ",".join(self.columns)]
        for model in self.models:
            for metric in METRICS:
                cells = []
                for col in self.columns:
                    c = self.cell(model, metric, col)
                    if not c.available:
                        cells.append("n/a")
                    elif c.folds_used < c.folds_total:
                        cells.append(f"{c.mean:.6g} ± {c.std:.3g} *")
                    else:
                        cells.append(f"{c.mean:.6g} ± {c.std:.3g}")
                lines.append(f"{model},{metric}," + ",".join(cells))
        return "\n".join(lines) + "\n"


def _fold_metric_values(fold: FoldPredictions, hi_index: int | None):
    """Concatenated (truth, pred) pairs for one HI, or pooled over all HIs."""
    truths, preds = [], []
    for tid in sorted(fold.truths):
        truth = np.asarray(fold.truths[tid], dtype=float)
        pred = np.asarray(fold.preds[tid], dtype=float)
        if truth.shape != pred.shape:
            raise ValueError(f"trajectory {tid}: truth {truth.shape} vs pred {pred.shape}")
        if fold.masks is not None:
            keep = np.asarray(fold.masks[tid], dtype=bool)
            truth, pred = truth[keep], pred[keep]
        if hi_index is None:
            truths.append(truth.ravel(order="F"))
            preds.append(pred.ravel(order="F"))
        else:
            truths.append(truth[:, hi_index])
            preds.append(pred[:, hi_index])
    return np.concatenate(truths), np.concatenate(preds)


def assemble_report(predictions_by_model: dict[str, list[FoldPredictions]],
                    hi_names=HI_NAMES) -> EvalReport:
    """Fold-mean +/- std per (model, metric, indicator), plus pooled Avg.

    Pearson cells where a fold's series is constant are excluded from that
    cell's aggregation and flagged through folds_used < folds_total; a
    cell with no valid fold is reported as unavailable.
    """
    columns = tuple(hi_names) + (AVG_COLUMN,)
    report = EvalReport(models=tuple(predictions_by_model), hi_names=tuple(hi_names),
                        columns=columns)
    for model, folds in predictions_by_model.items():
        folds = sorted(folds, key=lambda f: f.fold_index)
        for col_idx, col in enumerate(columns):
            hi_index = None if col == AVG_COLUMN else col_idx
            per_metric: dict[str, list[float]] = {m: [] for m in METRICS}
            for fold in folds:
                truth, pred = _fold_metric_values(fold, hi_index)
                per_metric["SMAPE"].append(smape(truth, pred))
                per_metric["RMSEx1e3"].append(rmse(truth, pred) * 1e3)
                try:
                    per_metric["P.Corr"].append(pearson(truth, pred))
                except MetricUndefinedError:
                    per_metric["P.Corr"].append(np.nan)
            for metric, values in per_metric.items():
                arr = np.asarray(values, dtype=float)
                good = arr[np.isfinite(arr)]
                if good.size == 0:
                    cell = MetricCell(None, None, 0, len(folds))
                else:
                    cell = MetricCell(float(good.mean()), float(good.std()),
                                      int(good.size), len(folds))
                report.cells[(model, metric, col)] = cell
    return report
