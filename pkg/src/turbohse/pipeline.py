"""Experiment orchestration: folds, model runs, and benchmark assembly.

Glue between the dataset, the estimators, the filter and the report: the
CLI commands and the acceptance experiments both drive these functions.
All model runs share the same cross-validation plan (ids shuffled with
split_seed), fit their scalers on the training split only, and emit
per-trajectory predictions in original health-indicator units.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from . import srukf, surrogate
from .domain import N_HI
from .estimators import (
    GruModel,
    MlpModel,
    Scaler,
    TrainConfig,
    probe_latents,
    ridge_fit,
    ridge_predict,
    train_autoencoder,
    train_gru,
    train_mlp,
)
from .estimators.autoencoder import probe_predict
from .evaluation import FoldPredictions, SplitPlan, assemble_report, kfold_plan
from .generator import Dataset

THREADS_ENV = "TURBOHSE_THREADS"

MODEL_UKF = "UKF"
MODEL_MLP = "MLP"
MODEL_GRU = "GRU"
MODEL_RIDGE = "Ridge"
MODEL_AE_PROBE = "AE-probe"
DEFAULT_MODELS = (MODEL_UKF, MODEL_MLP, MODEL_GRU, MODEL_RIDGE, MODEL_AE_PROBE)


def worker_count(n_tasks: int) -> int:
    cap = os.environ.get(THREADS_ENV)
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(limit, n_tasks))


def features_matrix(traj, ocs, noisy: bool = True) -> np.ndarray:
    """Sensor features for one trajectory: (L, 7 * len(ocs)), OC blocks in order."""
    source = traj.sensors_noisy if noisy else traj.sensors_clean
    return np.concatenate([source[oc] for oc in ocs], axis=1)


def rows_for_ids(dataset: Dataset, ids, ocs, noisy: bool = True):
    """Stack per-step rows over trajectories; returns (X, Y, slices by id)."""
    xs, ys, slices = [], [], {}
    offset = 0
    for tid in ids:
        traj = dataset.get(tid)
        x = features_matrix(traj, ocs, noisy)
        xs.append(x)
        ys.append(traj.states)
        slices[tid] = slice(offset, offset + len(x))
        offset += len(x)
    return np.vstack(xs), np.vstack(ys), slices


def padded_batch(dataset: Dataset, ids, ocs, noisy: bool = True):
    """Zero-padded (B, T, D) batch with target and mask arrays."""
    feats = [features_matrix(dataset.get(tid), ocs, noisy) for tid in ids]
    targets = [dataset.get(tid).states for tid in ids]
    max_len = max(len(f) for f in feats)
    dim = feats[0].shape[1]
    x = np.zeros((len(ids), max_len, dim))
    y = np.zeros((len(ids), max_len, N_HI))
    mask = np.zeros((len(ids), max_len))
    for i, (f, t) in enumerate(zip(feats, targets)):
        x[i, : len(f)] = f
        y[i, : len(t)] = t
        mask[i, : len(f)] = 1.0
    return x, y, mask


def stacked_delta(dataset: Dataset, ocs) -> np.ndarray:
    return np.concatenate([dataset.deltas[oc] for oc in ocs])


def ukf_config(dataset: Dataset, oc_mode: str, q: float = 1e-7) -> srukf.UkfConfig:
    ocs = surrogate.parse_oc_mode(oc_mode)
    delta = stacked_delta(dataset, ocs)
    r_diag = srukf.build_R_from_noise(delta, dataset.config.noise.gamma)
    return srukf.UkfConfig(q_diag=np.full(N_HI, q), r_diag=r_diag)


def run_ukf(dataset: Dataset, oc_mode: str = "stacked", ids=None,
            cfg: srukf.UkfConfig | None = None):
    """Filter each trajectory; returns ({id: (means, sds)}, {id: error msg}).

    Trajectories are independent, so failures are isolated per id and the
    rest of the dataset still gets estimates.
    """
    ids = list(ids) if ids is not None else dataset.ids
    cfg = cfg or ukf_config(dataset, oc_mode)
    ocs = surrogate.parse_oc_mode(oc_mode)

    def one(tid: int):
        sensors = features_matrix(dataset.get(tid), ocs, noisy=True)
        return tid, srukf.filter_trajectory(sensors, oc_mode, cfg)

    results, failures = {}, {}
    workers = worker_count(len(ids))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(one, tid) for tid in ids]
            for fut, tid in zip(futures, ids):
                try:
                    _, res = fut.result()
                    results[tid] = (res.means, res.sqrt_variances)
                except (srukf.FilterError, srukf.CholeskyDowndateError) as err:
                    failures[tid] = str(err)
    else:
        for tid in ids:
            try:
                _, res = one(tid)
                results[tid] = (res.means, res.sqrt_variances)
            except (srukf.FilterError, srukf.CholeskyDowndateError) as err:
                failures[tid] = str(err)
    return results, failures


def default_train_cfg(model: str, seed: int = 0) -> TrainConfig:
    if model == MODEL_GRU:
        return TrainConfig(learning_rate=1e-3, epochs=40, batch_size=8,
                           seed=seed, patience=8, bptt_window=100)
    if model == MODEL_AE_PROBE:
        return TrainConfig(learning_rate=1e-3, epochs=40, batch_size=64,
                           seed=seed, patience=8)
    return TrainConfig(learning_rate=1e-3, epochs=40, batch_size=64,
                       seed=seed, patience=8)


def run_fold_mlp(dataset: Dataset, plan: SplitPlan, ocs, cfg: TrainConfig,
                 hidden=(128, 128), with_artifacts: bool = False):
    x_tr, y_tr, _ = rows_for_ids(dataset, plan.train_ids, ocs)
    x_val, y_val, _ = rows_for_ids(dataset, plan.val_ids, ocs)
    x_scaler = Scaler("standard").fit(x_tr)
    y_scaler = Scaler("standard").fit(y_tr)
    model = MlpModel((x_tr.shape[1], *hidden, N_HI), seed=cfg.seed)
    train_mlp(model, x_scaler.transform(x_tr), y_scaler.transform(y_tr),
              x_scaler.transform(x_val), y_scaler.transform(y_val), cfg)
    preds = {}
    for tid in plan.test_ids:
        x = x_scaler.transform(features_matrix(dataset.get(tid), ocs))
        preds[tid] = y_scaler.inverse_transform(model.forward(x))
    if with_artifacts:
        return preds, {"model": model, "x_scaler": x_scaler, "y_scaler": y_scaler}
    return preds


def run_fold_ridge(dataset: Dataset, plan: SplitPlan, ocs,
                   l2: float = 1e-4) -> dict[int, np.ndarray]:
    x_tr, y_tr, _ = rows_for_ids(dataset, plan.train_ids, ocs)
    x_scaler = Scaler("standard").fit(x_tr)
    model = ridge_fit(x_scaler.transform(x_tr), y_tr, l2=l2)
    preds = {}
    for tid in plan.test_ids:
        x = x_scaler.transform(features_matrix(dataset.get(tid), ocs))
        preds[tid] = ridge_predict(model, x)
    return preds


def run_fold_gru(dataset: Dataset, plan: SplitPlan, ocs, cfg: TrainConfig,
                 hidden_size: int = 64, with_artifacts: bool = False):
    x_tr, y_tr, m_tr = padded_batch(dataset, plan.train_ids, ocs)
    x_val, y_val, m_val = padded_batch(dataset, plan.val_ids, ocs)
    flat_rows = x_tr[m_tr.astype(bool)]
    x_scaler = Scaler("standard").fit(flat_rows)
    y_scaler = Scaler("standard").fit(y_tr[m_tr.astype(bool)])

    def scale_batch(x, y, mask):
        xs = x_scaler.transform(x.reshape(-1, x.shape[-1])).reshape(x.shape)
        ys = y_scaler.transform(y.reshape(-1, N_HI)).reshape(y.shape)
        # keep padding exactly zero so masked steps stay inert
        xs *= mask[:, :, None]
        ys *= mask[:, :, None]
        return xs, ys

    xs_tr, ys_tr = scale_batch(x_tr, y_tr, m_tr)
    xs_val, ys_val = scale_batch(x_val, y_val, m_val)
    model = GruModel(x_tr.shape[-1], hidden_size=hidden_size, output_size=N_HI,
                     seed=cfg.seed)
    train_gru(model, xs_tr, ys_tr, m_tr, xs_val, ys_val, m_val, cfg)
    preds = {}
    for tid in plan.test_ids:
        x = x_scaler.transform(features_matrix(dataset.get(tid), ocs))
        out, _ = model.forward(x[None])
        preds[tid] = y_scaler.inverse_transform(out[0])
    if with_artifacts:
        return preds, {"model": model, "x_scaler": x_scaler, "y_scaler": y_scaler}
    return preds


def run_fold_ae_probe(dataset: Dataset, plan: SplitPlan, ocs, cfg: TrainConfig,
                      latent_dim: int = 8, l2: float = 1e-3):
    """Train the autoencoder on sensors only, then probe frozen latents.

    Returns (predictions, audit) where audit carries the encoder hash
    before and after probing.
    """
    x_tr, y_tr, _ = rows_for_ids(dataset, plan.train_ids, ocs)
    x_val, _, _ = rows_for_ids(dataset, plan.val_ids, ocs)
    x_scaler = Scaler("standard").fit(x_tr)
    ae = train_autoencoder(x_scaler.transform(x_tr), x_scaler.transform(x_val),
                           cfg, latent_dim=latent_dim)
    hash_before = ae.encoder_hash()
    probe = probe_latents(ae, x_scaler.transform(x_tr), y_tr, l2=l2)
    preds = {}
    for tid in plan.test_ids:
        x = x_scaler.transform(features_matrix(dataset.get(tid), ocs))
        preds[tid] = probe_predict(ae, probe, x)
    audit = {"encoder_hash_before": hash_before, "encoder_hash_after": ae.encoder_hash()}
    return preds, audit


def _truths_for(dataset: Dataset, ids) -> dict[int, np.ndarray]:
    return {tid: dataset.get(tid).states for tid in ids}


def benchmark(dataset: Dataset, models=DEFAULT_MODELS, k: int = 5,
              split_seed: int = 0, oc_mode: str = "stacked",
              train_cfgs: dict[str, TrainConfig] | None = None,
              progress=None):
    """Run the full cross-validated comparison; returns (report, details).

    details holds the per-model FoldPredictions (for plotting or deeper
    analysis), UKF failure map, and the AE freeze audit per fold.
    """
    plans = kfold_plan(dataset.ids, k=k, seed=split_seed)
    ocs = surrogate.parse_oc_mode(oc_mode)
    train_cfgs = train_cfgs or {}
    by_model: dict[str, list[FoldPredictions]] = {m: [] for m in models}
    details = {"plans": plans, "ukf_failures": {}, "ae_audits": []}

    def note(msg):
        if progress:
            progress(msg)

    ukf_cache = None
    if MODEL_UKF in models:
        note("filtering all trajectories with the SR-UKF")
        ukf_cache, failures = run_ukf(dataset, oc_mode)
        details["ukf_failures"] = failures

    for plan in plans:
        note(f"fold {plan.fold_index}: "
             f"{len(plan.train_ids)} train / {len(plan.val_ids)} val / {len(plan.test_ids)} test")
        truths = _truths_for(dataset, plan.test_ids)
        for model in models:
            seed_cfg = train_cfgs.get(model) or default_train_cfg(model)
            cfg = replace(seed_cfg, seed=seed_cfg.seed + plan.fold_index)
            if model == MODEL_UKF:
                preds = {tid: ukf_cache[tid][0] for tid in plan.test_ids if tid in ukf_cache}
            elif model == MODEL_MLP:
                preds = run_fold_mlp(dataset, plan, ocs, cfg)
            elif model == MODEL_GRU:
                preds = run_fold_gru(dataset, plan, ocs, cfg)
            elif model == MODEL_RIDGE:
                preds = run_fold_ridge(dataset, plan, ocs)
            elif model == MODEL_AE_PROBE:
                preds, audit = run_fold_ae_probe(dataset, plan, ocs, cfg)
                details["ae_audits"].append(audit)
            else:
                raise ValueError(f"unknown model {model!r}")
            fold_truths = {tid: truths[tid] for tid in preds}
            by_model[model].append(FoldPredictions(
                fold_index=plan.fold_index, truths=fold_truths, preds=preds))
    report = assemble_report(by_model)
    details["fold_predictions"] = by_model
    return report, details


def grid_search_mlp(dataset: Dataset, plan: SplitPlan, ocs,
                    learning_rates=(3e-4, 1e-3, 3e-3), hidden_sizes=(64, 128),
                    base_cfg: TrainConfig | None = None):
    """Small validation-loss grid over learning rate and hidden width."""
    base = base_cfg or default_train_cfg(MODEL_MLP)
    x_tr, y_tr, _ = rows_for_ids(dataset, plan.train_ids, ocs)
    x_val, y_val, _ = rows_for_ids(dataset, plan.val_ids, ocs)
    x_scaler = Scaler("standard").fit(x_tr)
    y_scaler = Scaler("standard").fit(y_tr)
    xs_tr, ys_tr = x_scaler.transform(x_tr), y_scaler.transform(y_tr)
    xs_val, ys_val = x_scaler.transform(x_val), y_scaler.transform(y_val)
    best = None
    for lr in learning_rates:
        for width in hidden_sizes:
            cfg = replace(base, learning_rate=lr)
            model = MlpModel((xs_tr.shape[1], width, width, N_HI), seed=cfg.seed)
            history = train_mlp(model, xs_tr, ys_tr, xs_val, ys_val, cfg)
            val = min(history["val_loss"])
            if best is None or val < best[0]:
                best = (val, lr, width)
    return {"val_loss": best[0], "learning_rate": best[1], "hidden_size": best[2]}
