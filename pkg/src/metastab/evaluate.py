"""Metrics, uncertainty-thresholded retention curves and run reports."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.stats import rankdata

DECISION_THRESHOLD = 0.5
DEFAULT_THRESHOLDS = tuple(round(1.0 - 0.1 * i, 1) for i in range(10))  # 1.0 ... 0.1


class SingleClassAUC(ValueError):
    pass


class ZeroVariance(ValueError):
    pass


@dataclass
class PredictionRecord:
    id: str
    y_true: float
    y_pred: float
    uncertainty: float
    alpha: float
    beta: float


@dataclass
class RunReport:
    task: str
    metrics: dict
    retention_curve: list[dict] = field(default_factory=list)
    per_sample: list[PredictionRecord] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    version: str = ""

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "task": self.task,
            "config": self.config,
            "metrics": self.metrics,
            "retention_curve": self.retention_curve,
            "per_sample": [asdict(r) for r in self.per_sample],
        }

    def write(self, directory, stem: str = "report") -> dict[str, Path]:
        """Write ``<stem>.json``, ``<stem>_predictions.csv`` and ``<stem>_retention.csv``."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = {
            "json": d / f"{stem}.json",
            "predictions": d / f"{stem}_predictions.csv",
            "retention": d / f"{stem}_retention.csv",
        }
        paths["json"].write_text(json.dumps(_jsonable(self.to_dict()), indent=2) + "\n")
        write_predictions_csv(paths["predictions"], self.per_sample)
        with open(paths["retention"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["threshold", "retained_fraction", "metric", "value"])
            for p in self.retention_curve:
                w.writerow([p["threshold"], p["fraction"], p["metric"], p["value"]])
        return paths


def write_predictions_csv(path, records: Sequence[PredictionRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "y_true", "y_pred", "uncertainty", "alpha", "beta"])
        for r in records:
            w.writerow([r.id, r.y_true, r.y_pred, r.uncertainty, r.alpha, r.beta])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


# ----------------------------------------------------------- classification


def roc_auc(y_true, scores) -> float:
    """Mann-Whitney AUC with midranks for tied scores."""
    y = np.asarray(y_true, dtype=np.float64)
    s = np.asarray(scores, dtype=np.float64)
    pos = y == 1
    n1, n0 = int(pos.sum()), int((~pos).sum())
    if n1 == 0 or n0 == 0:
        raise SingleClassAUC("AUC needs at least one record of each class")
    ranks = rankdata(s)
    return float((ranks[pos].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def _confusion(y_true, y_hat):
    y = np.asarray(y_true) == 1
    p = np.asarray(y_hat) == 1
    tp = int(np.sum(y & p))
    tn = int(np.sum(~y & ~p))
    fp = int(np.sum(~y & p))
    fn = int(np.sum(y & ~p))
    return tp, tn, fp, fn


def mcc(y_true, y_hat) -> float:
    tp, tn, fp, fn = _confusion(y_true, y_hat)
    denom = math.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    if denom == 0:
        return 0.0
    return (tp * tn - fp * fn) / denom


def f1_score(y_true, y_hat) -> float:
    tp, _, fp, fn = _confusion(y_true, y_hat)
    denom = 2 * tp + fp + fn
    return 0.0 if denom == 0 else 2 * tp / denom


def accuracy(y_true, y_hat) -> float:
    y = np.asarray(y_true)
    return float(np.mean(y == np.asarray(y_hat))) if y.size else float("nan")


def classification_metrics(y_true, p_plus) -> dict:
    """AUC, ACC, F1, MCC. Hard labels use p+ >= 0.5; AUC is None if undefined."""
    y = np.asarray(y_true, dtype=np.float64)
    p = np.asarray(p_plus, dtype=np.float64)
    y_hat = (p >= DECISION_THRESHOLD).astype(np.float64)
    try:
        auc = roc_auc(y, p)
    except SingleClassAUC:
        auc = None
    return {
        "AUC": auc,
        "ACC": accuracy(y, y_hat),
        "F1": f1_score(y, y_hat),
        "MCC": mcc(y, y_hat),
    }


# --------------------------------------------------------------- regression


def spearman(y_true, y_pred) -> float:
    a = rankdata(np.asarray(y_true, dtype=np.float64))
    b = rankdata(np.asarray(y_pred, dtype=np.float64))
    a = a - a.mean()
    b = b - b.mean()
    denom = math.sqrt(float(a @ a) * float(b @ b))
    if denom == 0:
        raise ZeroVariance("Spearman correlation undefined for constant input")
    return float(a @ b) / denom


def r2_score(y_true, y_pred) -> float:
    y = np.asarray(y_true, dtype=np.float64)
    f = np.asarray(y_pred, dtype=np.float64)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0:
        raise ZeroVariance("R^2 undefined for constant targets")
    return 1.0 - float(np.sum((y - f) ** 2)) / ss_tot


def regression_metrics(y_true, y_pred) -> dict:
    """RMSE, MAE, R2 and Spearman P; undefined R2/P are None."""
    y = np.asarray(y_true, dtype=np.float64)
    f = np.asarray(y_pred, dtype=np.float64)
    if y.size < 2:
        raise ValueError("regression metrics need at least 2 records")
    out = {
        "RMSE": float(np.sqrt(np.mean((y - f) ** 2))),
        "MAE": float(np.mean(np.abs(y - f))),
    }
    for name, fn in (("R2", r2_score), ("P", spearman)):
        try:
            out[name] = fn(y, f)
        except ZeroVariance:
            out[name] = None
    return out


def metrics_for(task: str, records: Sequence[PredictionRecord]) -> dict:
    y = [r.y_true for r in records]
    f = [r.y_pred for r in records]
    if task == "classification":
        return classification_metrics(y, f)
    return regression_metrics(y, f)


# ---------------------------------------------------------------- retention


def retention_curve(
    records: Sequence[PredictionRecord],
    metric: str | Callable[[Sequence[PredictionRecord]], float],
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
    task: str = "classification",
) -> list[dict]:
    """Metric over the records whose uncertainty is <= each threshold.

    Thresholds are visited from loosest to tightest. A point is dropped when
    nothing is retained, when the retained fraction does not shrink relative to
    the previous kept point, or when the metric is undefined on the subset.
    """
    if isinstance(metric, str):
        name = metric

        def fn(rs):
            return metrics_for(task, rs)[name]
    else:
        name = getattr(metric, "__name__", "metric")
        fn = metric

    n = len(records)
    u = np.array([r.uncertainty for r in records], dtype=np.float64)
    points: list[dict] = []
    last_fraction = None
    for t in sorted(thresholds, reverse=True):
        keep = np.flatnonzero(u <= t)
        if keep.size == 0:
            continue
        frac = keep.size / n
        if last_fraction is not None and frac >= last_fraction:
            continue
        try:
            value = fn([records[i] for i in keep])
        except (ValueError, ZeroDivisionError):
            value = None
        if value is None:
            continue
        points.append({"threshold": float(t), "fraction": frac, "metric": name, "value": value})
        last_fraction = frac
    return points


# -------------------------------------------------------------- aggregation


def aggregate_metrics(per_fold: Sequence[dict]) -> dict:
    """Mean and sample std over folds, skipping undefined (None) values."""
    names = sorted({k for m in per_fold for k in m})
    out = {}
    for k in names:
        vals = [m[k] for m in per_fold if m.get(k) is not None]
        if not vals:
            out[k] = {"mean": None, "std": None, "n": 0}
            continue
        arr = np.asarray(vals, dtype=np.float64)
        std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
        out[k] = {"mean": float(arr.mean()), "std": std, "n": int(arr.size)}
    return out
