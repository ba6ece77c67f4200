"""On-disk formats: dataset directories, prediction directories, checkpoints.

A dataset directory contains a JSON manifest (generation config echo,
surrogate constants, per-OC noise ranges, trajectory index) plus one
states CSV and one sensors CSV per (trajectory, operating condition).
Floats are written with repr(), i.e. shortest exact round-trip, so a
re-read dataset equals the in-memory original bit for bit and identical
runs produce byte-identical trees.

Prediction directories mirror the dataset ids: fold<k>/pred_<id>.csv with
the per-step estimates (and sqrt-variance columns when the producer has
them, e.g. the filter), plus a small manifest naming the model, OC mode
and fold/test-id assignment.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import generator, surrogate
from .domain import HI_NAMES, SENSOR_NAMES

FORMAT_VERSION = 1


class DatasetFormatError(RuntimeError):
    """Directory contents do not match the documented dataset format."""


def _fmt(value: float) -> str:
    return repr(float(value))


def _write_csv(path: Path, header: list[str], columns: list[np.ndarray]):
    rows = len(columns[0])
    lines = [",".join(header)]
    cols = [np.asarray(c) for c in columns]
    for i in range(rows):
        lines.append(",".join(_fmt(c[i]) for c in cols))
    path.write_text("\n".join(lines) + "\n")


def _read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with path.open() as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[1] != len(header):
        raise DatasetFormatError(f"{path}: {data.shape[1]} columns, header names {len(header)}")
    return header, data


# -- generation config round trip -------------------------------------------


def config_to_dict(cfg: generator.GenerationConfig) -> dict:
    return {
        "n_trajectories": cfg.n_trajectories,
        "max_len": cfg.max_len,
        "ocs": list(cfg.ocs),
        "speed_params": {
            tag: {"mu": sp.mu, "sigma": sp.sigma} for tag, sp in cfg.speed_params.items()
        },
        "speed_policy": {
            "probs": [[float(p) for p in row] for row in cfg.speed_policy.probs],
            "change_period": cfg.speed_policy.change_period,
        },
        "maint_interval": list(cfg.maint_interval),
        "jitter_sigma": cfg.jitter_sigma,
        "base_seed": cfg.base_seed,
        "noise": {"gamma": cfg.noise.gamma, "range_mode": cfg.noise.range_mode},
    }


def config_from_dict(raw: dict) -> generator.GenerationConfig:
    known = {
        "n_trajectories", "max_len", "ocs", "speed_params", "speed_policy",
        "maint_interval", "jitter_sigma", "base_seed", "noise",
    }
    unknown = set(raw) - known
    if unknown:
        raise generator.ConfigError(f"unknown config key(s): {sorted(unknown)}")
    kwargs = {}
    if "n_trajectories" in raw:
        kwargs["n_trajectories"] = int(raw["n_trajectories"])
    if "max_len" in raw:
        kwargs["max_len"] = int(raw["max_len"])
    if "ocs" in raw:
        kwargs["ocs"] = tuple(raw["ocs"])
    if "speed_params" in raw:
        kwargs["speed_params"] = {
            tag: generator.DegradationSpeed(tag, float(v["mu"]), float(v["sigma"]))
            for tag, v in raw["speed_params"].items()
        }
    if "speed_policy" in raw:
        sp = raw["speed_policy"]
        kwargs["speed_policy"] = generator.SpeedPolicy(
            probs=np.asarray(sp["probs"], dtype=float),
            change_period=int(sp.get("change_period", 100)),
        )
    if "maint_interval" in raw:
        kwargs["maint_interval"] = tuple(int(v) for v in raw["maint_interval"])
    if "jitter_sigma" in raw:
        kwargs["jitter_sigma"] = float(raw["jitter_sigma"])
    if "base_seed" in raw:
        kwargs["base_seed"] = int(raw["base_seed"])
    if "noise" in raw:
        kwargs["noise"] = generator.NoiseConfig(
            gamma=float(raw["noise"].get("gamma", 0.02)),
            range_mode=raw["noise"].get("range_mode", "dataset"),
        )
    return generator.GenerationConfig(**kwargs)


# -- dataset directory --------------------------------------------------------


def dataset_manifest(dataset: generator.Dataset) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "base_seed": dataset.config.base_seed,
        "config": config_to_dict(dataset.config),
        "surrogate_constants": dataset.constants.as_manifest_dict(),
        "deltas": {oc: [float(v) for v in d] for oc, d in dataset.deltas.items()},
        "trajectories": [
            {
                "id": t.trajectory_id,
                "length": t.length,
                "terminated_early": t.terminated_early,
                "maintenance": [int(ev.t) for ev in t.maintenance],
                "maintenance_lambdas": [[float(v) for v in ev.lambdas] for ev in t.maintenance],
            }
            for t in dataset.trajectories
        ],
    }


def _states_name(tid: int) -> str:
    return f"states_{tid}.csv"


def _sensors_name(tid: int, oc: str) -> str:
    return f"sensors_{tid}_{oc}.csv"


def require_empty_dir(out_dir: Path, force: bool):
    out_dir = Path(out_dir)
    if out_dir.exists() and any(out_dir.iterdir()):
        if not force:
            raise FileExistsError(f"{out_dir} is not empty; pass force to overwrite")
        for item in sorted(out_dir.rglob("*"), reverse=True):
            if item.is_file():
                item.unlink()
            else:
                item.rmdir()
    out_dir.mkdir(parents=True, exist_ok=True)


def write_dataset(dataset: generator.Dataset, out_dir, force: bool = False) -> Path:
    out_dir = Path(out_dir)
    require_empty_dir(out_dir, force)
    manifest = dataset_manifest(dataset)
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    for traj in dataset.trajectories:
        t_col = np.arange(traj.length)
        maint_flag = np.zeros(traj.length)
        for ev in traj.maintenance:
            maint_flag[ev.t] = 1.0
        _write_csv(
            out_dir / _states_name(traj.trajectory_id),
            ["t", *HI_NAMES, "maintenance"],
            [t_col, *[traj.states[:, i] for i in range(len(HI_NAMES))], maint_flag],
        )
        for oc in traj.ocs:
            noisy = traj.sensors_noisy[oc]
            clean = traj.sensors_clean[oc]
            header = ["t"] + [f"noisy_{s}" for s in SENSOR_NAMES] + [f"clean_{s}" for s in SENSOR_NAMES]
            cols = [t_col] + [noisy[:, j] for j in range(len(SENSOR_NAMES))] \
                + [clean[:, j] for j in range(len(SENSOR_NAMES))]
            _write_csv(out_dir / _sensors_name(traj.trajectory_id, oc), header, cols)
    return out_dir


def load_dataset(path) -> generator.Dataset:
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.exists():
        raise DatasetFormatError(f"{path} has no manifest.json")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format_version") != FORMAT_VERSION:
        raise DatasetFormatError(
            f"format version {manifest.get('format_version')} != {FORMAT_VERSION}"
        )
    cfg = config_from_dict(manifest["config"])
    trajectories = []
    for entry in manifest["trajectories"]:
        tid = entry["id"]
        s_header, s_data = _read_csv(path / _states_name(tid))
        if s_header != ["t", *HI_NAMES, "maintenance"]:
            raise DatasetFormatError(f"unexpected states header for trajectory {tid}")
        states = s_data[:, 1 : 1 + len(HI_NAMES)]
        if len(states) != entry["length"]:
            raise DatasetFormatError(
                f"trajectory {tid}: manifest length {entry['length']} != file {len(states)}"
            )
        events = [
            generator.MaintenanceEvent(t=int(t), lambdas=np.asarray(lams, dtype=float))
            for t, lams in zip(entry["maintenance"], entry["maintenance_lambdas"])
        ]
        sensors_clean, sensors_noisy = {}, {}
        for oc in cfg.ocs:
            _, y = _read_csv(path / _sensors_name(tid, oc))
            sensors_noisy[oc] = y[:, 1 : 1 + len(SENSOR_NAMES)]
            sensors_clean[oc] = y[:, 1 + len(SENSOR_NAMES) :]
        trajectories.append(
            generator.Trajectory(
                trajectory_id=tid,
                ocs=tuple(cfg.ocs),
                states=states,
                speeds=None,
                maintenance=events,
                sensors_clean=sensors_clean,
                sensors_noisy=sensors_noisy,
                terminated_early=entry["terminated_early"],
            )
        )
    deltas = {oc: np.asarray(v, dtype=float) for oc, v in manifest["deltas"].items()}
    return generator.Dataset(
        config=cfg,
        constants=surrogate.SurrogateConstants(),
        trajectories=trajectories,
        deltas=deltas,
    )


# -- prediction directories ---------------------------------------------------


def write_predictions(out_dir, model_name: str, oc_mode: str,
                      folds: dict[int, dict[int, np.ndarray]],
                      sds: dict[int, dict[int, np.ndarray]] | None = None,
                      force: bool = False) -> Path:
    out_dir = Path(out_dir)
    require_empty_dir(out_dir, force)
    manifest = {
        "format_version": FORMAT_VERSION,
        "model": model_name,
        "oc_mode": oc_mode,
        "folds": {str(k): sorted(folds[k]) for k in sorted(folds)},
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    for fold, preds in folds.items():
        fold_dir = out_dir / f"fold{fold}"
        fold_dir.mkdir(exist_ok=True)
        for tid, means in preds.items():
            means = np.asarray(means, dtype=float)
            header = ["t"] + [f"est_{n}" for n in HI_NAMES]
            cols = [np.arange(len(means))] + [means[:, i] for i in range(len(HI_NAMES))]
            if sds is not None and tid in sds.get(fold, {}):
                sd = np.asarray(sds[fold][tid], dtype=float)
                header += [f"sd_{n}" for n in HI_NAMES]
                cols += [sd[:, i] for i in range(len(HI_NAMES))]
            _write_csv(fold_dir / f"pred_{tid}.csv", header, cols)
    return out_dir


def load_predictions(pred_dir) -> tuple[dict, dict[int, dict[int, np.ndarray]]]:
    pred_dir = Path(pred_dir)
    manifest_path = pred_dir / "manifest.json"
    if not manifest_path.exists():
        raise DatasetFormatError(f"{pred_dir} has no manifest.json")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format_version") != FORMAT_VERSION:
        raise DatasetFormatError(
            f"format version {manifest.get('format_version')} != {FORMAT_VERSION}"
        )
    folds: dict[int, dict[int, np.ndarray]] = {}
    for fold_str, ids in manifest["folds"].items():
        fold = int(fold_str)
        folds[fold] = {}
        for tid in ids:
            fpath = pred_dir / f"fold{fold}" / f"pred_{tid}.csv"
            if not fpath.exists():
                raise DatasetFormatError(f"missing prediction file {fpath}")
            _, data = _read_csv(fpath)
            folds[fold][tid] = data[:, 1 : 1 + len(HI_NAMES)]
    return manifest, folds


# -- model checkpoints --------------------------------------------------------


def save_checkpoint(path, kind: str, arrays: dict[str, np.ndarray], meta: dict):
    """Self-describing npz: a JSON meta blob plus named parameter arrays."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {f"param_{k}": np.asarray(v) for k, v in arrays.items()}
    payload["meta_json"] = np.frombuffer(
        json.dumps({"kind": kind, **meta}, sort_keys=True).encode(), dtype=np.uint8
    )
    np.savez_compressed(path, **payload)


def load_checkpoint(path) -> tuple[str, dict[str, np.ndarray], dict]:
    with np.load(Path(path)) as data:
        meta = json.loads(bytes(data["meta_json"]).decode())
        arrays = {
            k[len("param_"):]: data[k] for k in data.files if k.startswith("param_")
        }
    kind = meta.pop("kind")
    return kind, arrays, meta
