"""Dataset ingestion, cross-validation splits and the training loop."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import tape as T
from .batch import collate
from .evaluate import PredictionRecord
from .featurize import MolGraph, build_graph
from .model import DualViewModel, ModelConfig
from .remap import BondGraph, remap_topology
from .smiles import SmilesError, parse_smiles

LOGGER = logging.getLogger(__name__)

TARGET_LOW, TARGET_HIGH = 0.01, 0.99


class DataError(ValueError):
    """Base class for dataset problems (CLI exit code 3)."""


class MissingColumn(DataError):
    pass


class EmptyDataset(DataError):
    pass


class NonBinaryLabel(DataError):
    pass


class InvalidLabel(DataError):
    pass


class DuplicateId(DataError):
    pass


class TooFewSamples(DataError):
    pass


class NonFiniteLoss(RuntimeError):
    def __init__(self, message: str, terms: dict):
        super().__init__(message)
        self.terms = terms


# ------------------------------------------------------------------ dataset


@dataclass
class Record:
    id: str
    smiles: str
    label: float


@dataclass
class TargetScaler:
    """Maps raw regression targets into (0, 1) and back.

    ``minmax``: affine map of [min, max] onto [0.01, 0.99].
    ``zscore``: standardize, then squash with the logistic function.
    """

    method: str = "minmax"
    a: float = 0.0
    b: float = 1.0

    @classmethod
    def fit(cls, y, method: str = "minmax") -> "TargetScaler":
        y = np.asarray(y, dtype=np.float64)
        if method == "minmax":
            lo, hi = float(y.min()), float(y.max())
            span = hi - lo if hi > lo else 1.0
            return cls("minmax", lo, span)
        if method == "zscore":
            sd = float(y.std())
            return cls("zscore", float(y.mean()), sd if sd > 0 else 1.0)
        raise ValueError(f"unknown target scaling {method!r}")

    def transform(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        if self.method == "minmax":
            t = TARGET_LOW + (TARGET_HIGH - TARGET_LOW) * (y - self.a) / self.b
            # unseen values outside the fitted range stay inside (0, 1)
            return np.clip(t, 1e-6, 1 - 1e-6)
        return 1.0 / (1.0 + np.exp(-(y - self.a) / self.b))

    def inverse(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        if self.method == "minmax":
            return self.a + (t - TARGET_LOW) * self.b / (TARGET_HIGH - TARGET_LOW)
        t = np.clip(t, 1e-12, 1 - 1e-12)
        return self.a + self.b * np.log(t / (1.0 - t))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Dataset:
    records: list[Record]
    task: str
    graphs: list[tuple[MolGraph, BondGraph]] = field(repr=False, default_factory=list)
    rejected: int = 0

    def __len__(self) -> int:
        return len(self.records)

    @property
    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=np.float64)

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    def subset(self, idx) -> "Dataset":
        idx = list(idx)
        return Dataset(
            [self.records[i] for i in idx],
            self.task,
            [self.graphs[i] for i in idx] if self.graphs else [],
        )


def smiles_to_graphs(smiles: str, keep_largest: bool = False) -> tuple[MolGraph, BondGraph]:
    g = build_graph(parse_smiles(smiles, keep_largest=keep_largest))
    return g, remap_topology(g)


def featurize_all(smiles: Sequence[str], threads: int = 1, keep_largest: bool = False):
    """Graphs (or the raised exception) per SMILES, in input order."""

    def one(s):
        try:
            return smiles_to_graphs(s, keep_largest)
        except (SmilesError, ValueError) as exc:
            return exc

    if threads > 1 and len(smiles) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, smiles))
    return [one(s) for s in smiles]


def _parse_label(raw: str, task: str, row: int) -> float:
    text = (raw or "").strip()
    try:
        value = float(text)
    except ValueError:
        if task == "classification":
            raise NonBinaryLabel(f"row {row}: label {raw!r} is not 0/1") from None
        raise InvalidLabel(f"row {row}: label {raw!r} is not a number") from None
    if task == "classification":
        if value not in (0.0, 1.0):
            raise NonBinaryLabel(f"row {row}: label {raw!r} is not 0/1")
    elif not math.isfinite(value):
        raise InvalidLabel(f"row {row}: label {raw!r} is not finite")
    return value


def load_dataset(
    path,
    smiles_col: str = "smiles",
    label_col: str = "label",
    task: str = "classification",
    id_col: str | None = None,
    rejects_path=None,
    threads: int = 1,
    keep_largest: bool = False,
) -> Dataset:
    """Read a labelled CSV and featurize every row.

    Rows whose SMILES fail to parse are excluded and, if ``rejects_path`` is
    given, written there as ``row,id,smiles,error``.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        wanted = [smiles_col, label_col] + ([id_col] if id_col else [])
        for col in wanted:
            if col not in header:
                raise MissingColumn(f"{path}: missing column {col!r} (have {header})")
        rows = list(reader)
    if not rows:
        raise EmptyDataset(f"{path}: no data rows")

    records: list[Record] = []
    for n, row in enumerate(rows, start=1):
        rid = row[id_col].strip() if id_col else f"row{n}"
        records.append(Record(rid, (row[smiles_col] or "").strip(), _parse_label(row[label_col], task, n)))

    seen: set[str] = set()
    for r in records:
        if r.id in seen:
            raise DuplicateId(f"{path}: duplicate id {r.id!r}")
        seen.add(r.id)

    results = featurize_all([r.smiles for r in records], threads, keep_largest)
    kept, graphs, rejects = [], [], []
    for n, (rec, res) in enumerate(zip(records, results), start=1):
        if isinstance(res, Exception):
            rejects.append((n, rec.id, rec.smiles, f"{type(res).__name__}: {res}"))
            LOGGER.warning("rejected row %d (%s): %s", n, rec.id, res)
            continue
        kept.append(rec)
        graphs.append(res)

    if rejects_path is not None and rejects:
        with open(rejects_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["row", "id", "smiles", "error"])
            w.writerows(rejects)
    if rejects:
        LOGGER.info("%s: kept %d rows, rejected %d", path, len(kept), len(rejects))
    if not kept:
        raise EmptyDataset(f"{path}: every row was rejected")
    return Dataset(kept, task, graphs, rejected=len(rejects))


def kfold_split(labels, folds: int, seed: int = 0, stratify: bool = True):
    """Deterministic (train, test) index pairs whose test parts partition the data.

    With ``stratify`` each label value is shuffled and dealt round-robin
    across folds, continuing the deal from one class to the next.
    """
    y = np.asarray(labels)
    n = y.shape[0]
    if folds < 2:
        raise TooFewSamples("need at least 2 folds")
    if folds > n:
        raise TooFewSamples(f"{folds} folds requested for {n} samples")
    rng = np.random.default_rng(seed)
    if stratify:
        order = np.concatenate([rng.permutation(np.flatnonzero(y == c)) for c in np.unique(y)])
    else:
        order = rng.permutation(n)
    assign = np.empty(n, dtype=np.int64)
    assign[order] = np.arange(n) % folds
    all_idx = np.arange(n)
    return [(all_idx[assign != k], all_idx[assign == k]) for k in range(folds)]


# ----------------------------------------------------------------- training


@dataclass
class TrainConfig:
    lr: float = 5e-4
    batch_size: int = 256
    epochs: int = 100
    folds: int = 10
    seed: int = 0
    val_fraction: float = 0.1
    patience: int = 15
    class_weight: bool = False
    target_scaling: str = "minmax"
    threads: int = 1
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if isinstance(self.model, dict):
            self.model = ModelConfig.from_dict(self.model)
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0 <= self.val_fraction < 1:
            raise ValueError("val_fraction must be in [0, 1)")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    model: DualViewModel
    history: list[dict]
    best_epoch: int
    scaler: TargetScaler | None


def _sample_weights(y: np.ndarray) -> np.ndarray:
    counts = {c: np.sum(y == c) for c in np.unique(y)}
    w = np.array([len(y) / (len(counts) * counts[c]) for c in y])
    return w / w.mean()


def _check_finite(br, step: int) -> None:
    terms = br.to_dict()
    bad = [k for k in ("loss_G", "loss_Gr", "loss_CL", "total") if not math.isfinite(terms[k])]
    if bad:
        raise NonFiniteLoss(f"non-finite loss at step {step}: {', '.join(bad)} ({terms})", terms)


def evidential_loss(model: DualViewModel, graphs, y, batch_size: int = 256) -> float:
    """Mean of L_G + L_Gr (no contrastive term) over ``graphs``."""
    total, n = 0.0, 0
    for start in range(0, len(graphs), batch_size):
        part = graphs[start:start + batch_size]
        out = model(collate(part))
        _, br = model.loss(out, y[start:start + batch_size])
        total += (br.loss_G + br.loss_Gr) * len(part)
        n += len(part)
    return total / n


def train_fold(
    graphs: Sequence[tuple[MolGraph, BondGraph]],
    y,
    config: TrainConfig,
    fold: int = 0,
    log: Callable[[dict], None] | None = None,
) -> TrainResult:
    """Train one model on ``graphs``; labels ``y`` are raw (unscaled).

    A ``val_fraction`` slice is carved out for early stopping; the weights of
    the best validation epoch are restored before returning.
    """
    graphs = list(graphs)
    y = np.asarray(y, dtype=np.float64)
    if not graphs:
        raise EmptyDataset("empty training set")
    mcfg = config.model
    scaler = None
    if mcfg.task == "regression":
        scaler = TargetScaler.fit(y, config.target_scaling)
        y = scaler.transform(y)

    rng = np.random.default_rng([config.seed, fold])
    n = len(graphs)
    n_val = int(round(config.val_fraction * n)) if config.val_fraction > 0 else 0
    if n_val and n - n_val >= 1:
        perm = rng.permutation(n)
        val_idx, tr_idx = np.sort(perm[:n_val]), np.sort(perm[n_val:])
    else:
        val_idx, tr_idx = np.zeros(0, np.int64), np.arange(n)
    tr_graphs = [graphs[i] for i in tr_idx]
    tr_y = y[tr_idx]
    val_graphs = [graphs[i] for i in val_idx]
    val_y = y[val_idx]

    weights = None
    if config.class_weight and mcfg.task == "classification":
        weights = _sample_weights(tr_y)

    model = DualViewModel(mcfg)
    opt = T.Adam(model.parameters(), lr=config.lr)
    history: list[dict] = []
    best = (math.inf, 0, model.state_dict())
    step = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(tr_graphs))
        sums = np.zeros(4)
        gnorm_sq = []
        batches = 0
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            batch = collate([tr_graphs[i] for i in idx])
            out = model(batch)
            total, br = model.loss(out, tr_y[idx], None if weights is None else weights[idx])
            step += 1
            _check_finite(br, step)
            opt.zero_grad()
            total.backward()
            gnorm_sq.append(sum(float(np.sum(p.grad**2)) for p in opt.params if p.grad is not None))
            opt.step()
            sums += (br.loss_G, br.loss_Gr, br.loss_CL, br.total)
            batches += 1
        mean = sums / batches
        entry = {
            "fold": fold,
            "epoch": epoch,
            "loss_G": mean[0],
            "loss_Gr": mean[1],
            "loss_CL": mean[2],
            "total": mean[3],
            "lambda": mcfg.lam,
            "grad_norm": float(np.sqrt(np.mean(gnorm_sq))),
            "val_metric": None,
        }
        if val_graphs:
            val = evidential_loss(model, val_graphs, val_y, config.batch_size)
            entry["val_metric"] = val
            if val < best[0]:
                best = (val, epoch, model.state_dict())
        history.append(entry)
        if log is not None:
            log(entry)
        if val_graphs and epoch - best[1] >= config.patience:
            LOGGER.info("fold %d: early stop at epoch %d (best %d)", fold, epoch, best[1])
            break

    best_epoch = history[-1]["epoch"]
    if val_graphs:
        model.load_state_dict(best[2])
        best_epoch = best[1]
    return TrainResult(model, history, best_epoch, scaler)


# --------------------------------------------------------------- prediction


def predict_records(
    model: DualViewModel,
    graphs: Sequence[tuple[MolGraph, BondGraph]],
    ids: Sequence[str],
    y_true=None,
    scaler: TargetScaler | None = None,
    batch_size: int = 256,
) -> list[PredictionRecord]:
    """Fused predictions per molecule.

    Classification: y_pred = p+, uncertainty = 2/S. Regression: y_pred is the
    Beta mean mapped back to the raw target scale, uncertainty the Beta
    variance (on the (0, 1) scale).
    """
    out: list[PredictionRecord] = []
    graphs = list(graphs)
    ys = [math.nan] * len(graphs) if y_true is None else list(y_true)
    for start in range(0, len(graphs), batch_size):
        part = graphs[start:start + batch_size]
        fused, _, _ = model.predict(collate(part))
        if model.config.task == "classification":
            pred, unc = fused.p_plus, fused.uncertainty
        else:
            pred = fused.mean if scaler is None else scaler.inverse(fused.mean)
            unc = fused.variance
        for k in range(len(part)):
            i = start + k
            out.append(
                PredictionRecord(
                    id=str(ids[i]),
                    y_true=float(ys[i]),
                    y_pred=float(pred[k]),
                    uncertainty=float(unc[k]),
                    alpha=float(fused.alpha[k]),
                    beta=float(fused.beta[k]),
                )
            )
    return out


def write_history(path, history: Sequence[dict]) -> None:
    with open(path, "w") as fh:
        for entry in history:
            fh.write(json.dumps(entry) + "\n")
