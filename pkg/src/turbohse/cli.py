"""Command-line entry point.

Subcommands cover the whole workbench: generate a dataset, run the
square-root UKF, train and apply the learned estimators, probe a frozen
encoder, assemble the benchmark report, run descriptive analyses, and
emit SVG overlays of truth versus predictions.

All outputs are plain files (JSON manifests, CSV tables, SVG charts).
Commands refuse to write into a non-empty output directory unless
--force is given, and exit nonzero with a descriptive message on any
failure. TURBOHSE_THREADS caps internal parallelism.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import dataset_io, evaluation, generator, pipeline, surrogate, svgplot
from .domain import HI_NAMES
from .estimators import Scaler, TrainConfig
from .estimators.autoencoder import AutoencoderModel, probe_predict
from .evaluation import FoldPredictions, assemble_report, kfold_plan


class CommandError(RuntimeError):
    pass


def _load_dataset(path) -> generator.Dataset:
    try:
        return dataset_io.load_dataset(path)
    except (dataset_io.DatasetFormatError, FileNotFoundError, OSError) as err:
        raise CommandError(f"cannot load dataset {path}: {err}") from err


def _train_cfg_from_args(args, model: str) -> TrainConfig:
    cfg = pipeline.default_train_cfg(model, seed=args.seed)
    overrides = {}
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.lr is not None:
        overrides["learning_rate"] = args.lr
    if args.batch_size is not None:
        overrides["batch_size"] = args.batch_size
    if getattr(args, "bptt_window", None) is not None:
        overrides["bptt_window"] = args.bptt_window
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg


# -- generate -----------------------------------------------------------------


def cmd_generate(args) -> int:
    cfg_dict = {}
    if args.config:
        try:
            cfg_dict = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise CommandError(f"cannot read config {args.config}: {err}") from err
    if args.seed is not None:
        cfg_dict["base_seed"] = args.seed
    if args.n is not None:
        cfg_dict["n_trajectories"] = args.n
    if args.length is not None:
        cfg_dict["max_len"] = args.length
    try:
        cfg = dataset_io.config_from_dict(cfg_dict)
    except generator.ConfigError as err:
        raise CommandError(f"invalid config: {err}") from err
    dataset = generator.generate_dataset(cfg)
    try:
        dataset_io.write_dataset(dataset, args.out, force=args.force)
    except FileExistsError as err:
        raise CommandError(str(err)) from err
    n_short = sum(t.terminated_early for t in dataset.trajectories)
    print(f"wrote {len(dataset.trajectories)} trajectories to {args.out} "
          f"({n_short} terminated early)")
    return 0


# -- filter (SR-UKF) ------------------------------------------------------------


def cmd_filter(args) -> int:
    dataset = _load_dataset(args.dataset)
    try:
        surrogate.parse_oc_mode(args.oc)
    except ValueError as err:
        raise CommandError(str(err)) from err
    cfg = pipeline.ukf_config(dataset, args.oc, q=args.q)
    results, failures = pipeline.run_ukf(dataset, args.oc, cfg=cfg)
    for tid, msg in failures.items():
        print(f"trajectory {tid} failed: {msg}", file=sys.stderr)
    plans = kfold_plan(dataset.ids, k=args.folds, seed=args.split_seed)
    folds = {}
    sds = {}
    for plan in plans:
        folds[plan.fold_index] = {
            tid: results[tid][0] for tid in plan.test_ids if tid in results
        }
        sds[plan.fold_index] = {
            tid: results[tid][1] for tid in plan.test_ids if tid in results
        }
    try:
        dataset_io.write_predictions(args.out, pipeline.MODEL_UKF, args.oc, folds,
                                     sds=sds, force=args.force)
    except FileExistsError as err:
        raise CommandError(str(err)) from err
    print(f"filtered {len(results)} trajectories -> {args.out}")
    return 1 if failures else 0


# -- train ----------------------------------------------------------------------


def _write_model_predictions(args, model_name, folds, force):
    try:
        dataset_io.write_predictions(args.out, model_name, args.oc, folds, force=force)
    except FileExistsError as err:
        raise CommandError(str(err)) from err


def cmd_train(args) -> int:
    if args.model == "ae" and not args.ckpt_dir:
        raise CommandError("--ckpt-dir is required for --model ae")
    if args.model != "ae" and not args.out:
        raise CommandError("--out is required for this model")
    dataset = _load_dataset(args.dataset)
    ocs = surrogate.parse_oc_mode(args.oc)
    plans = kfold_plan(dataset.ids, k=args.folds, seed=args.split_seed)
    model_key = {"mlp": pipeline.MODEL_MLP, "gru": pipeline.MODEL_GRU,
                 "ridge": pipeline.MODEL_RIDGE, "ae": pipeline.MODEL_AE_PROBE}[args.model]
    base_cfg = _train_cfg_from_args(args, model_key)
    if args.grid_search and args.model == "mlp":
        best = pipeline.grid_search_mlp(dataset, plans[0], ocs, base_cfg=base_cfg)
        print(f"grid search: lr={best['learning_rate']} hidden={best['hidden_size']} "
              f"(val loss {best['val_loss']:.4g})")
        base_cfg = replace(base_cfg, learning_rate=best["learning_rate"])

    folds = {}
    ckpt_dir = Path(args.ckpt_dir) if args.ckpt_dir else None

    def save_net_checkpoint(kind, fold, artifacts, meta_extra):
        model = artifacts["model"]
        arrays = {f"p{i}": p for i, p in enumerate(model.parameters())}
        meta = {
            "oc_mode": args.oc,
            "fold": fold,
            "x_scaler": artifacts["x_scaler"].state_dict(),
            "y_scaler": artifacts["y_scaler"].state_dict(),
            **meta_extra,
        }
        dataset_io.save_checkpoint(ckpt_dir / f"{kind}_fold{fold}.npz", kind, arrays, meta)

    for plan in plans:
        cfg = replace(base_cfg, seed=base_cfg.seed + plan.fold_index)
        if args.model == "mlp":
            preds, art = pipeline.run_fold_mlp(dataset, plan, ocs, cfg,
                                               with_artifacts=True)
            folds[plan.fold_index] = preds
            if ckpt_dir:
                save_net_checkpoint("mlp", plan.fold_index, art,
                                    {"layer_sizes": list(art["model"].layer_sizes),
                                     "activation": art["model"].activation})
        elif args.model == "ridge":
            folds[plan.fold_index] = pipeline.run_fold_ridge(dataset, plan, ocs)
        elif args.model == "gru":
            preds, art = pipeline.run_fold_gru(dataset, plan, ocs, cfg,
                                               with_artifacts=True)
            folds[plan.fold_index] = preds
            if ckpt_dir:
                save_net_checkpoint("gru", plan.fold_index, art,
                                    {"input_size": art["model"].input_size,
                                     "hidden_size": art["model"].hidden_size,
                                     "output_size": art["model"].output_size})
        elif args.model == "ae":
            x_tr, _, _ = pipeline.rows_for_ids(dataset, plan.train_ids, ocs)
            x_val, _, _ = pipeline.rows_for_ids(dataset, plan.val_ids, ocs)
            scaler = Scaler("standard").fit(x_tr)
            from .estimators import train_autoencoder

            ae = train_autoencoder(scaler.transform(x_tr), scaler.transform(x_val),
                                   cfg, latent_dim=args.latent_dim)
            if ckpt_dir is None:
                raise CommandError("--ckpt-dir is required for --model ae")
            arrays = {}
            for i, p in enumerate(ae.encoder.parameters()):
                arrays[f"enc_{i}"] = p
            for i, p in enumerate(ae.decoder.parameters()):
                arrays[f"dec_{i}"] = p
            meta = {
                "input_dim": ae.input_dim,
                "latent_dim": ae.latent_dim,
                "encoder_sizes": list(ae.encoder.layer_sizes),
                "decoder_sizes": list(ae.decoder.layer_sizes),
                "activation": ae.encoder.activation,
                "oc_mode": args.oc,
                "fold": plan.fold_index,
                "train_ids": list(plan.train_ids),
                "scaler": scaler.state_dict(),
            }
            dataset_io.save_checkpoint(ckpt_dir / f"ae_fold{plan.fold_index}.npz",
                                       "autoencoder", arrays, meta)
        print(f"fold {plan.fold_index}: done")
    if args.model == "ae":
        print(f"wrote {len(plans)} encoder checkpoints to {ckpt_dir}")
        return 0
    _write_model_predictions(args, model_key, folds, args.force)
    print(f"wrote predictions for {len(plans)} folds -> {args.out}")
    return 0


# -- probe ------------------------------------------------------------------------


def _load_autoencoder(path):
    kind, arrays, meta = dataset_io.load_checkpoint(path)
    if kind != "autoencoder":
        raise CommandError(f"{path} is a {kind!r} checkpoint, expected autoencoder")
    hidden = tuple(meta["encoder_sizes"][1:-1])
    ae = AutoencoderModel(meta["input_dim"], latent_dim=meta["latent_dim"],
                          hidden=hidden, activation=meta["activation"])
    for i, p in enumerate(ae.encoder.parameters()):
        p[...] = arrays[f"enc_{i}"]
    for i, p in enumerate(ae.decoder.parameters()):
        p[...] = arrays[f"dec_{i}"]
    scaler = Scaler.from_state_dict(meta["scaler"])
    return ae, scaler, meta


def cmd_probe(args) -> int:
    dataset = _load_dataset(args.dataset)
    encoder_path = Path(args.encoder)
    ckpts = sorted(encoder_path.glob("ae_fold*.npz")) if encoder_path.is_dir() else [encoder_path]
    if not ckpts:
        raise CommandError(f"no autoencoder checkpoints under {encoder_path}")
    plans = kfold_plan(dataset.ids, k=args.folds, seed=args.split_seed)
    plan_by_fold = {p.fold_index: p for p in plans}
    folds = {}
    oc_mode = None
    for ckpt in ckpts:
        ae, scaler, meta = _load_autoencoder(ckpt)
        oc_mode = meta["oc_mode"]
        ocs = surrogate.parse_oc_mode(oc_mode)
        fold = meta["fold"]
        if fold not in plan_by_fold:
            raise CommandError(f"checkpoint fold {fold} not in a {args.folds}-fold plan")
        plan = plan_by_fold[fold]
        if list(plan.train_ids) != meta["train_ids"]:
            raise CommandError(
                f"fold {fold}: checkpoint was trained on different ids; "
                f"regenerate with matching --folds/--split-seed"
            )
        hash_before = ae.encoder_hash()
        x_tr, y_tr, _ = pipeline.rows_for_ids(dataset, plan.train_ids, ocs)
        from .estimators import probe_latents

        probe = probe_latents(ae, scaler.transform(x_tr), y_tr, l2=args.l2)
        if ae.encoder_hash() != hash_before:
            raise CommandError("encoder parameters changed during probing")
        folds[fold] = {}
        for tid in plan.test_ids:
            x = scaler.transform(pipeline.features_matrix(dataset.get(tid), ocs))
            folds[fold][tid] = probe_predict(ae, probe, x)
    try:
        dataset_io.write_predictions(args.out, pipeline.MODEL_AE_PROBE, oc_mode,
                                     folds, force=args.force)
    except FileExistsError as err:
        raise CommandError(str(err)) from err
    print(f"probed {len(folds)} folds -> {args.out}")
    return 0


# -- eval -------------------------------------------------------------------------


def cmd_eval(args) -> int:
    dataset = _load_dataset(args.dataset)
    by_model = {}
    for pred_dir in args.pred:
        try:
            manifest, folds = dataset_io.load_predictions(pred_dir)
        except dataset_io.DatasetFormatError as err:
            raise CommandError(f"bad prediction dir {pred_dir}: {err}") from err
        model = manifest["model"]
        fold_preds = []
        for fold, preds in sorted(folds.items()):
            truths = {}
            for tid, pred in preds.items():
                traj = dataset.get(tid)
                if len(pred) != traj.length:
                    raise CommandError(
                        f"{pred_dir}: trajectory {tid} prediction length {len(pred)} "
                        f"!= dataset length {traj.length}"
                    )
                truths[tid] = traj.states
            fold_preds.append(FoldPredictions(fold_index=fold, truths=truths, preds=preds))
        by_model[model] = fold_preds
    report = assemble_report(by_model)
    out_dir = Path(args.report)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.csv").write_text(report.to_csv_text())
    (out_dir / "report.json").write_text(json.dumps(report.to_json_dict(), indent=2) + "\n")
    print(report.to_csv_text())
    print(f"report written to {out_dir}")
    return 0


# -- analyze ------------------------------------------------------------------------


def cmd_analyze(args) -> int:
    dataset = _load_dataset(args.dataset)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.what in ("acf", "pacf"):
        tid = args.trajectory if args.trajectory is not None else dataset.ids[0]
        hi = args.hi or HI_NAMES[2]
        if hi not in HI_NAMES:
            raise CommandError(f"unknown indicator {hi!r}")
        series = dataset.get(tid).states[:, HI_NAMES.index(hi)]
        fn = evaluation.acf if args.what == "acf" else evaluation.pacf
        try:
            values = fn(series, args.max_lag)
        except ValueError as err:
            raise CommandError(str(err)) from err
        lines = ["lag,value"] + [f"{k},{repr(float(v))}" for k, v in enumerate(values)]
        out.write_text("\n".join(lines) + "\n")
        if args.svg:
            band = 1.96 / np.sqrt(len(series))
            svg = svgplot.acf_bar_chart(values, f"{args.what.upper()} of {hi} "
                                        f"(trajectory {tid})", conf_band=band)
            Path(args.svg).write_text(svg)
        print(f"{args.what} over {args.max_lag} lags -> {out}")
        return 0
    # distributions: per-HI summary over all trajectories
    rows = ["hi,min,q25,median,q75,max,mean,std"]
    all_states = np.vstack([t.states for t in dataset.trajectories])
    for i, name in enumerate(HI_NAMES):
        v = all_states[:, i]
        q25, med, q75 = np.percentile(v, [25, 50, 75])
        rows.append(
            f"{name},{v.min():.6g},{q25:.6g},{med:.6g},{q75:.6g},"
            f"{v.max():.6g},{v.mean():.6g},{v.std():.6g}"
        )
    out.write_text("\n".join(rows) + "\n")
    print(f"distribution summary -> {out}")
    return 0


# -- plot ---------------------------------------------------------------------------


def cmd_plot(args) -> int:
    dataset = _load_dataset(args.dataset)
    try:
        traj = dataset.get(args.trajectory)
    except KeyError as err:
        raise CommandError(str(err)) from err
    hi_list = args.hi or list(HI_NAMES[:2])
    for hi in hi_list:
        if hi not in HI_NAMES:
            raise CommandError(f"unknown indicator {hi!r}")
    truth = {hi: traj.states[:, HI_NAMES.index(hi)] for hi in hi_list}
    predictions = {}
    for pred_dir in args.pred or []:
        manifest, folds = dataset_io.load_predictions(pred_dir)
        found = None
        for preds in folds.values():
            if args.trajectory in preds:
                found = preds[args.trajectory]
                break
        if found is None:
            raise CommandError(
                f"{pred_dir} has no prediction for trajectory {args.trajectory}"
            )
        predictions[manifest["model"]] = {
            hi: found[:, HI_NAMES.index(hi)] for hi in hi_list
        }
    svg = svgplot.plot_indicators(
        truth, predictions,
        maintenance_steps=[ev.t for ev in traj.maintenance],
        title=f"trajectory {args.trajectory}",
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(svg)
    print(f"plot -> {out}")
    return 0


# -- parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="turbohse",
        description="Turbofan health-state estimation workbench",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a degradation dataset")
    p.add_argument("--config", help="JSON file mirroring the generation config fields")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, help="overrides base_seed")
    p.add_argument("--n", type=int, help="overrides n_trajectories")
    p.add_argument("--length", type=int, help="overrides max_len")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("filter", help="run the SR-UKF over a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--oc", default="stacked", help="stacked or single:<name>")
    p.add_argument("--out", required=True)
    p.add_argument("--q", type=float, default=1e-7, help="process noise diagonal")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("train", help="train an estimator, write test predictions")
    p.add_argument("--model", required=True, choices=("mlp", "gru", "ridge", "ae"))
    p.add_argument("--dataset", required=True)
    p.add_argument("--oc", default="stacked")
    p.add_argument("--out", help="prediction output dir (mlp/gru/ridge)")
    p.add_argument("--ckpt-dir", help="checkpoint dir (required for ae)")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--bptt-window", type=int)
    p.add_argument("--latent-dim", type=int, default=8)
    p.add_argument("--grid-search", action="store_true",
                   help="small lr/width grid on fold 0 before training (mlp)")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("probe", help="linear-probe frozen autoencoder latents")
    p.add_argument("--encoder", required=True, help="checkpoint file or directory")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--l2", type=float, default=1e-3)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("eval", help="assemble the benchmark report")
    p.add_argument("--dataset", required=True)
    p.add_argument("--pred", action="append", required=True,
                   help="prediction dir; repeat per model")
    p.add_argument("--report", required=True, help="output directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("analyze", help="descriptive analyses")
    p.add_argument("--what", required=True, choices=("acf", "pacf", "distributions"))
    p.add_argument("--dataset", required=True)
    p.add_argument("--trajectory", type=int)
    p.add_argument("--hi")
    p.add_argument("--max-lag", type=int, default=40)
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--svg", help="optional SVG output path (acf/pacf)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("plot", help="SVG overlay of truth and predictions")
    p.add_argument("--dataset", required=True)
    p.add_argument("--trajectory", type=int, required=True)
    p.add_argument("--hi", action="append", help="indicator name; repeat for panels")
    p.add_argument("--pred", action="append", help="prediction dir; repeat per model")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CommandError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except generator.ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
