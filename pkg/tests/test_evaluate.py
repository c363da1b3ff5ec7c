import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import spearmanr
from sklearn.metrics import (
    accuracy_score,
    f1_score as sk_f1,
    matthews_corrcoef,
    mean_absolute_error,
    r2_score as sk_r2,
    roc_auc_score,
)

from metastab.evaluate import (
    PredictionRecord,
    RunReport,
    SingleClassAUC,
    ZeroVariance,
    aggregate_metrics,
    classification_metrics,
    mcc,
    regression_metrics,
    retention_curve,
    roc_auc,
    spearman,
)

from _oracles import brute_force_auc


def records(y, p, u):
    return [PredictionRecord(f"r{i}", float(a), float(b), float(c), 1.0, 1.0)
            for i, (a, b, c) in enumerate(zip(y, p, u))]


class TestClassificationMetrics:
    def test_auc_example(self):
        assert roc_auc([0, 0, 1, 1], [0.1, 0.4, 0.35, 0.8]) == 0.75

    def test_flipped_predictions(self):
        y = np.array([0, 1, 1, 0, 1])
        m = classification_metrics(y, 1.0 - y)
        assert m["MCC"] == -1.0 and m["ACC"] == 0.0 and m["AUC"] == 0.0

    def test_perfect(self):
        m = classification_metrics([0, 1, 1, 0], [0.2, 0.9, 0.7, 0.1])
        assert m == {"AUC": 1.0, "ACC": 1.0, "F1": 1.0, "MCC": 1.0}

    def test_threshold_inclusive(self):
        assert classification_metrics([1, 0], [0.5, 0.49])["ACC"] == 1.0

    def test_single_class(self):
        with pytest.raises(SingleClassAUC):
            roc_auc([1, 1, 1], [0.2, 0.3, 0.4])
        assert classification_metrics([1, 1], [0.2, 0.9])["AUC"] is None

    def test_mcc_degenerate_is_zero(self):
        assert mcc([0, 1, 1], [1, 1, 1]) == 0.0

    @settings(max_examples=60, deadline=None)
    @given(st.integers(min_value=0, max_value=10**6))
    def test_auc_against_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 200))
        y = rng.integers(0, 2, size=n)
        y[0], y[1] = 0, 1
        s = np.round(rng.uniform(size=n), 1)  # coarse grid forces ties
        assert roc_auc(y, s) == pytest.approx(brute_force_auc(y, s), abs=1e-12)

    def test_against_sklearn(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            y = rng.integers(0, 2, size=80)
            p = rng.uniform(size=80)
            yhat = (p >= 0.5).astype(int)
            m = classification_metrics(y, p)
            assert m["AUC"] == pytest.approx(roc_auc_score(y, p), abs=1e-12)
            assert m["ACC"] == pytest.approx(accuracy_score(y, yhat), abs=1e-12)
            assert m["F1"] == pytest.approx(sk_f1(y, yhat), abs=1e-12)
            assert m["MCC"] == pytest.approx(matthews_corrcoef(y, yhat), abs=1e-12)


class TestRegressionMetrics:
    def test_constant_prediction_example(self):
        m = regression_metrics([1.0, 2.0, 3.0], [2.0, 2.0, 2.0])
        assert m["RMSE"] == pytest.approx(math.sqrt(2 / 3), abs=1e-15)
        assert m["MAE"] == pytest.approx(2 / 3, abs=1e-15)
        assert m["R2"] == 0.0
        assert m["P"] is None

    def test_constant_targets(self):
        with pytest.raises(ZeroVariance):
            spearman([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
        assert regression_metrics([2.0, 2.0], [1.0, 3.0])["R2"] is None

    def test_too_few(self):
        with pytest.raises(ValueError):
            regression_metrics([1.0], [1.0])

    def test_against_reference_implementations(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            y = rng.normal(size=50)
            f = y + rng.normal(scale=0.7, size=50)
            f[:5] = f[5]  # ties
            m = regression_metrics(y, f)
            assert m["MAE"] == pytest.approx(mean_absolute_error(y, f), abs=1e-12)
            assert m["R2"] == pytest.approx(sk_r2(y, f), abs=1e-12)
            assert m["P"] == pytest.approx(spearmanr(y, f).statistic, abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(min_value=0, max_value=10**6))
    def test_spearman_monotone_invariance(self, seed):
        rng = np.random.default_rng(seed)
        y, f = rng.normal(size=30), rng.normal(size=30)
        base = spearman(y, f)
        assert spearman(np.exp(y), 3 * f**3 + 1) == pytest.approx(base, abs=1e-12)
        assert spearman(y, -f) == pytest.approx(-base, abs=1e-12)


class TestRetention:
    def setup_method(self):
        rng = np.random.default_rng(0)
        n = 400
        self.u = rng.uniform(0.05, 1.0, size=n)
        y = rng.integers(0, 2, size=n)
        # confident records are more often right
        correct = rng.uniform(size=n) > self.u * 0.6
        p = np.where(correct == (y == 1), 0.8, 0.2)
        self.recs = records(y, p, self.u)

    def test_fractions_strictly_decrease(self):
        curve = retention_curve(self.recs, "ACC")
        fr = [pt["fraction"] for pt in curve]
        assert all(a > b for a, b in zip(fr, fr[1:]))
        assert [pt["threshold"] for pt in curve] == sorted((pt["threshold"] for pt in curve),
                                                          reverse=True)

    def test_full_point_is_headline(self):
        curve = retention_curve(self.recs, "ACC")
        assert curve[0]["threshold"] == 1.0 and curve[0]["fraction"] == 1.0
        headline = classification_metrics([r.y_true for r in self.recs],
                                          [r.y_pred for r in self.recs])["ACC"]
        assert curve[0]["value"] == headline

    def test_accuracy_improves_when_uncertainty_is_informative(self):
        curve = {pt["threshold"]: pt["value"] for pt in retention_curve(self.recs, "ACC")}
        assert curve[0.3] > curve[1.0]

    def test_thresholds_below_min_omitted(self):
        recs = records([1, 0, 1], [0.9, 0.1, 0.8], [0.5, 0.6, 0.7])
        curve = retention_curve(recs, "ACC", thresholds=[1.0, 0.6, 0.4, 0.2])
        assert [pt["threshold"] for pt in curve] == [1.0, 0.6]

    def test_unchanged_fraction_dropped(self):
        recs = records([1, 0], [0.9, 0.1], [0.2, 0.3])
        curve = retention_curve(recs, "ACC", thresholds=[1.0, 0.9, 0.25])
        assert [pt["threshold"] for pt in curve] == [1.0, 0.25]

    def test_undefined_metric_dropped(self):
        recs = records([1, 0, 1], [0.9, 0.1, 0.8], [0.1, 0.9, 0.2])
        curve = retention_curve(recs, "AUC", thresholds=[1.0, 0.5])
        assert [pt["threshold"] for pt in curve] == [1.0]

    def test_callable_metric(self):
        def count(rs):
            return len(rs)
        curve = retention_curve(records([1, 0], [1, 0], [0.1, 0.5]), count, [1.0, 0.2])
        assert [(p["metric"], p["value"]) for p in curve] == [("count", 2), ("count", 1)]


class TestReports:
    def test_aggregate(self):
        agg = aggregate_metrics([{"AUC": 0.8, "ACC": 0.5}, {"AUC": 0.6, "ACC": None}])
        assert agg["AUC"]["mean"] == pytest.approx(0.7)
        assert agg["AUC"]["std"] == pytest.approx(math.sqrt(0.02))
        assert agg["ACC"] == {"mean": 0.5, "std": 0.0, "n": 1}

    def test_aggregate_all_undefined(self):
        assert aggregate_metrics([{"AUC": None}])["AUC"] == {"mean": None, "std": None, "n": 0}

    def test_write(self, tmp_path):
        recs = records([1, 0], [0.7, 0.2], [0.3, 0.4])
        rep = RunReport("classification", {"AUC": 1.0, "bad": float("nan")},
                        retention_curve(recs, "ACC"), recs, {"lam": 0.5}, "1.2.3")
        paths = rep.write(tmp_path, "run")
        data = json.loads(paths["json"].read_text())
        assert data["version"] == "1.2.3" and data["config"] == {"lam": 0.5}
        assert data["metrics"]["bad"] is None
        assert [r["id"] for r in data["per_sample"]] == ["r0", "r1"]
        with open(paths["predictions"]) as fh:
            rows = list(csv.DictReader(fh))
        assert [r["id"] for r in rows] == ["r0", "r1"] and float(rows[0]["y_pred"]) == 0.7
        with open(paths["retention"]) as fh:
            assert next(csv.reader(fh)) == ["threshold", "retained_fraction", "metric", "value"]
