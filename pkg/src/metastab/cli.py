"""Command-line entry point: ``metastab {train,predict,eval,inspect}``.

Exit codes:
    0  success
    2  configuration error (bad flag, bad config file, checkpoint mismatch)
    3  data error (missing column, bad labels, empty dataset, undefined AUC with --strict)
    4  non-finite loss during training

Settings are resolved as built-in defaults, then the ``--config`` TOML file,
then command-line flags. The resolved settings and a version string are
written into every artifact. ``TMS_LOG`` sets the log level (default WARNING).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import subprocess
import sys
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .encoder import EncoderConfig
from .evaluate import (
    RunReport,
    aggregate_metrics,
    metrics_for,
    retention_curve,
)
from .model import ModelConfig
from .remap import remap_topology
from .smiles import SmilesError, parse_smiles
from .featurize import build_graph
from .train import (
    DataError,
    NonFiniteLoss,
    TargetScaler,
    TrainConfig,
    featurize_all,
    kfold_split,
    load_dataset,
    predict_records,
    train_fold,
    write_history,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

LOGGER = logging.getLogger("metastab")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NONFINITE = 0, 2, 3, 4
TASK_ALIASES = {
    "classify": "classification",
    "classification": "classification",
    "regress": "regression",
    "regression": "regression",
}
HEADLINE = {"classification": "ACC", "regression": "RMSE"}


class ConfigError(ValueError):
    pass


def version_string() -> str:
    """``git describe`` of the source tree when available, else the package version."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


# ------------------------------------------------------------------- config

_SECTIONS = {
    "data": {"task", "smiles_col", "label_col", "id_col", "keep_largest"},
    "train": {f.name for f in fields(TrainConfig)} - {"model"},
    "encoder": {f.name for f in fields(EncoderConfig)},
    "objectives": {"lambda", "tau", "symmetric_contrastive", "evidence_activation",
                   "regression_bounded", "use_bond_view"},
}


def load_config_file(path) -> dict:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for section, values in raw.items():
        if section not in _SECTIONS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        if not isinstance(values, dict):
            raise ConfigError(f"{path}: [{section}] must be a table")
        unknown = set(values) - _SECTIONS[section]
        if unknown:
            raise ConfigError(f"{path}: unknown keys in [{section}]: {sorted(unknown)}")
    return raw


def resolve_settings(args) -> dict:
    """Merge defaults, config file and flags into one nested dict."""
    merged = {
        "data": {"task": "classification", "smiles_col": "smiles", "label_col": "label",
                 "id_col": None, "keep_largest": False},
        "train": {k: v for k, v in asdict(TrainConfig()).items() if k != "model"},
        "encoder": asdict(EncoderConfig()),
        "objectives": {"lambda": 0.2, "tau": 0.5, "symmetric_contrastive": False,
                       "evidence_activation": "softplus", "regression_bounded": True,
                       "use_bond_view": True},
    }
    merged["train"]["threads"] = os.cpu_count() or 1
    if getattr(args, "config", None):
        for section, values in load_config_file(args.config).items():
            merged[section].update(values)
    flag_map = {
        "task": ("data", "task"),
        "smiles_col": ("data", "smiles_col"),
        "label_col": ("data", "label_col"),
        "id_col": ("data", "id_col"),
        "folds": ("train", "folds"),
        "epochs": ("train", "epochs"),
        "lr": ("train", "lr"),
        "batch_size": ("train", "batch_size"),
        "seed": ("train", "seed"),
        "threads": ("train", "threads"),
        "patience": ("train", "patience"),
        "val_fraction": ("train", "val_fraction"),
        "target_scaling": ("train", "target_scaling"),
        "lam": ("objectives", "lambda"),
        "tau": ("objectives", "tau"),
        "hidden_dim": ("encoder", "hidden_dim"),
        "layers": ("encoder", "num_gin_layers"),
        "scaling_factor": ("encoder", "scaling_factor"),
    }
    for attr, (section, key) in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            merged[section][key] = value
    if getattr(args, "class_weight", False):
        merged["train"]["class_weight"] = True
    task = TASK_ALIASES.get(str(merged["data"]["task"]))
    if task is None:
        raise ConfigError(f"unknown task {merged['data']['task']!r}")
    merged["data"]["task"] = task
    return merged


def build_train_config(settings: dict) -> TrainConfig:
    obj = settings["objectives"]
    try:
        model = ModelConfig(
            task=settings["data"]["task"],
            encoder=EncoderConfig(**settings["encoder"]),
            lam=obj["lambda"],
            tau=obj["tau"],
            symmetric_contrastive=obj["symmetric_contrastive"],
            evidence_activation=obj["evidence_activation"],
            regression_bounded=obj["regression_bounded"],
            use_bond_view=obj["use_bond_view"],
            seed=settings["train"]["seed"],
        )
        return TrainConfig(**settings["train"], model=model)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


# ----------------------------------------------------------------- commands


def cmd_train(args) -> int:
    settings = resolve_settings(args)
    cfg = build_train_config(settings)
    if cfg.folds < 1:
        raise ConfigError("folds must be >= 1")
    data = settings["data"]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    version = version_string()
    ds = load_dataset(
        args.data,
        smiles_col=data["smiles_col"],
        label_col=data["label_col"],
        task=data["task"],
        id_col=data["id_col"],
        rejects_path=out / "rejects.csv",
        threads=cfg.threads,
        keep_largest=data["keep_largest"],
    )
    LOGGER.info("loaded %d records (%d rejected)", len(ds), ds.rejected)
    task = data["task"]
    provenance = {"settings": settings, "version": version, "data": str(args.data),
                  "num_records": len(ds), "num_rejected": ds.rejected}

    if cfg.folds == 1:
        splits = [(np.arange(len(ds)), np.zeros(0, dtype=np.int64))]
    else:
        splits = kfold_split(ds.labels, cfg.folds, cfg.seed, stratify=task == "classification")

    fold_metrics, oof = [], []
    for k, (tr, te) in enumerate(splits):
        fold_dir = out / (f"fold_{k:02d}" if cfg.folds > 1 else "model")
        train_part = ds.subset(tr)
        result = train_fold(train_part.graphs, train_part.labels, cfg, fold=k)
        sidecar = dict(provenance, fold=k, best_epoch=result.best_epoch,
                       target_scaler=result.scaler.to_dict() if result.scaler else None)
        save_checkpoint(fold_dir, result.model, sidecar)
        write_history(fold_dir / "history.jsonl", result.history)
        if te.size:
            test_part = ds.subset(te)
            recs = predict_records(result.model, test_part.graphs, test_part.ids,
                                   test_part.labels, result.scaler, cfg.batch_size)
            m = metrics_for(task, recs)
            fold_metrics.append(m)
            oof.extend(recs)
            LOGGER.info("fold %d: %s", k, m)

    if fold_metrics:
        metrics = {"per_fold": fold_metrics, "aggregate": aggregate_metrics(fold_metrics)}
    else:
        metrics = {}
    curve = retention_curve(oof, args.retention_metric or HEADLINE[task], task=task) \
        if (args.retention and oof) else []
    report = RunReport(task, metrics, curve, oof, provenance, version)
    report.write(out, "train_report")
    _print_summary(metrics.get("aggregate"))
    return EXIT_OK


def _print_summary(aggregate) -> None:
    if not aggregate:
        return
    for name, stats in aggregate.items():
        if stats["mean"] is None:
            print(f"{name}: undefined")
        else:
            print(f"{name}: {stats['mean']:.4f} ± {stats['std']:.4f} (n={stats['n']})")


def _load_model(path):
    try:
        model, meta = load_checkpoint(path)
    except CheckpointError as exc:
        raise ConfigError(str(exc)) from None
    scaler = TargetScaler(**meta["target_scaler"]) if meta.get("target_scaler") else None
    return model, meta, scaler


def cmd_predict(args) -> int:
    model, meta, scaler = _load_model(args.checkpoint)
    threads = args.threads or os.cpu_count() or 1
    if args.smiles is not None:
        ids, smiles = ["0"], [args.smiles]
    else:
        ids, smiles = [], []
        with open(args.input, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if args.smiles_col not in (reader.fieldnames or []):
                raise DataError(f"{args.input}: missing column {args.smiles_col!r}")
            for n, row in enumerate(reader, start=1):
                ids.append(row[args.id_col] if args.id_col else str(n))
                smiles.append(row[args.smiles_col])
    results = featurize_all(smiles, threads)
    good = [i for i, r in enumerate(results) if not isinstance(r, Exception)]
    recs = predict_records(model, [results[i] for i in good], [ids[i] for i in good],
                           scaler=scaler)
    by_index = dict(zip(good, recs))
    rows = []
    for i, (rid, smi) in enumerate(zip(ids, smiles)):
        row = {"id": rid, "smiles": smi}
        if i in by_index:
            r = by_index[i]
            row.update(y_pred=r.y_pred, uncertainty=r.uncertainty, alpha=r.alpha,
                       beta=r.beta, error="")
        else:
            exc = results[i]
            row.update(y_pred=None, uncertainty=None, alpha=None, beta=None,
                       error=f"{type(exc).__name__}: {exc}")
        rows.append(row)
    provenance = {"version": version_string(), "checkpoint": str(args.checkpoint),
                  "model": meta.get("model"), "settings": meta.get("settings")}
    if args.out and str(args.out).endswith(".json"):
        Path(args.out).write_text(json.dumps({**provenance, "predictions": rows}, indent=2) + "\n")
    else:
        fh = open(args.out, "w", newline="") if args.out else sys.stdout
        try:
            fh.write(f"# version={provenance['version']} checkpoint={args.checkpoint}\n")
            w = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["id"])
            w.writeheader()
            w.writerows(rows)
        finally:
            if fh is not sys.stdout:
                fh.close()
    return EXIT_OK


def cmd_eval(args) -> int:
    model, meta, scaler = _load_model(args.checkpoint)
    task = model.config.task
    settings = meta.get("settings", {})
    data = settings.get("data", {})
    ds = load_dataset(
        args.data,
        smiles_col=args.smiles_col or data.get("smiles_col", "smiles"),
        label_col=args.label_col or data.get("label_col", "label"),
        task=task,
        id_col=args.id_col or data.get("id_col"),
        threads=args.threads or os.cpu_count() or 1,
    )
    recs = predict_records(model, ds.graphs, ds.ids, ds.labels, scaler)
    metrics = metrics_for(task, recs)
    curve = retention_curve(recs, args.retention_metric or HEADLINE[task], task=task) \
        if args.retention else []
    provenance = {"version": version_string(), "checkpoint": str(args.checkpoint),
                  "model": meta.get("model"), "settings": settings, "data": str(args.data)}
    RunReport(task, metrics, curve, recs, provenance, provenance["version"]).write(
        args.out, "eval_report")
    for name, value in metrics.items():
        print(f"{name}: {'undefined' if value is None else f'{value:.4f}'}")
    if task == "classification" and metrics["AUC"] is None:
        LOGGER.warning("AUC undefined: evaluation set contains a single class")
        if args.strict:
            return EXIT_DATA
    return EXIT_OK


def cmd_inspect(args) -> int:
    mol = parse_smiles(args.smiles, keep_largest=args.keep_largest)
    g = build_graph(mol)
    r = remap_topology(g)
    doc = {
        "smiles": args.smiles,
        "atoms": [
            {"index": i, "element": a.element, "aromatic": a.aromatic,
             "charge": a.formal_charge, "hydrogens": a.total_h,
             "in_ring": bool(mol.atom_in_ring[i])}
            for i, a in enumerate(mol.atoms)
        ],
        "bonds": [
            {"index": j, "begin": b.begin, "end": b.end, "order": b.order.name.lower(),
             "in_ring": bool(mol.bond_in_ring[j])}
            for j, b in enumerate(mol.bonds)
        ],
        "molecular_graph": {
            "num_nodes": g.num_nodes,
            "num_edges": g.num_edges,
            "edge_list": g.edge_list.tolist(),
            "node_features": g.node_features.tolist(),
            "edge_features": g.edge_features.tolist(),
        },
        "bond_graph": {
            "num_nodes": int(r.node_inputs.shape[0]),
            "num_edges": int(r.edge_list.shape[0]),
            "edge_list": r.edge_list.tolist(),
            "node_origin": np.asarray(r.node_origin).tolist(),
            "edge_origin": np.asarray(r.edge_origin).tolist(),
        },
        "version": version_string(),
    }
    text = json.dumps(doc, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


# ------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metastab",
        description="Dual-view evidential GNN for metabolic-stability prediction.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="k-fold or single-split training",
                        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    tr.add_argument("--data", required=True, help="labelled CSV")
    tr.add_argument("--out", default="runs/train", help="output directory")
    tr.add_argument("--config", help="TOML config ([data], [train], [encoder], [objectives])")
    tr.add_argument("--task", help="classify | regress")
    tr.add_argument("--smiles-col", dest="smiles_col")
    tr.add_argument("--label-col", dest="label_col")
    tr.add_argument("--id-col", dest="id_col")
    tr.add_argument("--folds", type=int, help="number of CV folds; 1 = single model")
    tr.add_argument("--epochs", type=int)
    tr.add_argument("--lr", type=float)
    tr.add_argument("--batch-size", dest="batch_size", type=int)
    tr.add_argument("--patience", type=int)
    tr.add_argument("--val-fraction", dest="val_fraction", type=float)
    tr.add_argument("--target-scaling", dest="target_scaling", choices=["minmax", "zscore"])
    tr.add_argument("--lambda", dest="lam", type=float, help="contrastive weight")
    tr.add_argument("--tau", type=float, help="contrastive temperature")
    tr.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    tr.add_argument("--layers", type=int, help="number of GIN layers")
    tr.add_argument("--scaling-factor", dest="scaling_factor", type=float)
    tr.add_argument("--class-weight", dest="class_weight", action="store_true")
    tr.add_argument("--seed", type=int)
    tr.add_argument("--threads", type=int, help="featurization workers (default: all cores)")
    tr.add_argument("--retention", action="store_true",
                    help="emit an uncertainty retention curve over out-of-fold predictions")
    tr.add_argument("--retention-metric", dest="retention_metric")
    tr.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", help="predict with a saved checkpoint")
    pr.add_argument("--checkpoint", required=True)
    src = pr.add_mutually_exclusive_group(required=True)
    src.add_argument("--smiles", help="a single SMILES string")
    src.add_argument("--input", help="CSV with a SMILES column")
    pr.add_argument("--smiles-col", dest="smiles_col", default="smiles")
    pr.add_argument("--id-col", dest="id_col")
    pr.add_argument("--out", help="output .csv or .json (default: CSV on stdout)")
    pr.add_argument("--threads", type=int)
    pr.set_defaults(func=cmd_predict)

    ev = sub.add_parser("eval", help="evaluate a checkpoint on a labelled CSV")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--out", default="runs/eval")
    ev.add_argument("--smiles-col", dest="smiles_col")
    ev.add_argument("--label-col", dest="label_col")
    ev.add_argument("--id-col", dest="id_col")
    ev.add_argument("--retention", action="store_true")
    ev.add_argument("--retention-metric", dest="retention_metric")
    ev.add_argument("--strict", action="store_true",
                    help="exit 3 when AUC is undefined (single-class data)")
    ev.add_argument("--threads", type=int)
    ev.set_defaults(func=cmd_eval)

    ins = sub.add_parser("inspect", help="dump parsed and bond-centric graphs as JSON")
    ins.add_argument("smiles")
    ins.add_argument("--keep-largest", dest="keep_largest", action="store_true")
    ins.add_argument("--out")
    ins.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    level = getattr(logging, os.environ.get("TMS_LOG", "WARNING").upper(), None)
    logging.basicConfig(
        level=level if isinstance(level, int) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, SmilesError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NonFiniteLoss as exc:
        print(f"non-finite loss: {exc}", file=sys.stderr)
        return EXIT_NONFINITE


if __name__ == "__main__":
    sys.exit(main())
