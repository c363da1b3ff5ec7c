import csv
import dataclasses
import json

import pytest

from metastab import __version__
from metastab.cli import main, version_string
from metastab.model import DualViewModel

from _oracles import TOY_CSV

FAST = ["--hidden-dim", "8", "--epochs", "3", "--batch-size", "8", "--threads", "1"]


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    """One single-model run (folds=1) reused across the predict/eval tests."""
    out = tmp_path_factory.mktemp("run")
    code = main(["train", "--data", str(TOY_CSV), "--out", str(out), "--id-col", "id",
                 "--folds", "1", "--val-fraction", "0", "--lr", "5e-3", *FAST])
    assert code == 0
    return out


def read_predict_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# version=")
    return list(csv.DictReader(lines[1:]))


class TestTrain:
    def test_single_model_artifacts(self, trained):
        model = trained / "model"
        assert (model / "weights.tms").read_bytes()[:4] == b"TMS1"
        meta = json.loads((model / "config.json").read_text())
        assert meta["version"].startswith(__version__)
        assert meta["settings"]["train"]["folds"] == 1
        assert len((model / "history.jsonl").read_text().splitlines()) == 3
        assert (trained / "train_report.json").exists()

    def test_kfold_report_echoes_objective_settings(self, tmp_path, capsys):
        code = main(["train", "--data", str(TOY_CSV), "--out", str(tmp_path), "--id-col", "id",
                     "--folds", "2", "--lambda", "0.7", "--tau", "0.25", "--retention", *FAST])
        assert code == 0
        report = json.loads((tmp_path / "train_report.json").read_text())
        assert report["config"]["settings"]["objectives"]["lambda"] == 0.7
        assert report["config"]["settings"]["objectives"]["tau"] == 0.25
        assert report["version"] == version_string()
        assert len(report["metrics"]["per_fold"]) == 2
        assert sorted(r["id"] for r in report["per_sample"]) == [f"m{i:02d}" for i in range(1, 21)]
        assert report["retention_curve"][0]["fraction"] == 1.0
        assert (tmp_path / "fold_00" / "weights.tms").exists()
        assert (tmp_path / "fold_01" / "history.jsonl").exists()
        hist = (tmp_path / "fold_01" / "history.jsonl").read_text().splitlines()
        assert json.loads(hist[0])["lambda"] == 0.7
        assert "ACC:" in capsys.readouterr().out

    def test_toml_config_and_flag_precedence(self, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text('[data]\nid_col = "id"\n[train]\nfolds = 1\nepochs = 2\nval_fraction = 0.0\n'
                       '[objectives]\nlambda = 0.05\n[encoder]\nhidden_dim = 6\n')
        out = tmp_path / "o"
        assert main(["train", "--data", str(TOY_CSV), "--out", str(out), "--config", str(cfg),
                     "--epochs", "1", "--threads", "1"]) == 0
        meta = json.loads((out / "model" / "config.json").read_text())
        s = meta["settings"]
        assert s["train"]["epochs"] == 1 and s["objectives"]["lambda"] == 0.05
        assert s["encoder"]["hidden_dim"] == 6 and s["data"]["id_col"] == "id"

    def test_regression(self, tmp_path):
        data = tmp_path / "r.csv"
        rows = TOY_CSV.read_text().splitlines()[1:]
        data.write_text("smiles,t\n" + "\n".join(f"{r.split(',')[1]},{i * 3.5}"
                                                  for i, r in enumerate(rows)) + "\n")
        out = tmp_path / "o"
        assert main(["train", "--data", str(data), "--out", str(out), "--task", "regress",
                     "--label-col", "t", "--folds", "2", *FAST]) == 0
        report = json.loads((out / "train_report.json").read_text())
        assert set(report["metrics"]["aggregate"]) == {"RMSE", "MAE", "R2", "P"}
        meta = json.loads((out / "fold_00" / "config.json").read_text())
        assert meta["target_scaler"]["method"] == "minmax"


class TestExitCodes:
    def test_unknown_task(self, tmp_path):
        assert main(["train", "--data", str(TOY_CSV), "--out", str(tmp_path), "--task", "rank"]) == 2

    def test_bad_config_key(self, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text("[train]\nlearning_rate = 1.0\n")
        assert main(["train", "--data", str(TOY_CSV), "--out", str(tmp_path), "--config", str(cfg)]) == 2

    def test_invalid_value(self, tmp_path):
        assert main(["train", "--data", str(TOY_CSV), "--out", str(tmp_path), "--lr", "-1"]) == 2

    def test_argparse_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["train"])
        assert exc.value.code == 2

    def test_missing_column(self, tmp_path):
        assert main(["train", "--data", str(TOY_CSV), "--out", str(tmp_path),
                     "--label-col", "nope"]) == 3

    def test_missing_data_file(self, tmp_path):
        assert main(["train", "--data", str(tmp_path / "none.csv"), "--out", str(tmp_path)]) == 3

    def test_missing_checkpoint(self, tmp_path):
        assert main(["predict", "--checkpoint", str(tmp_path), "--smiles", "CCO"]) == 2

    def test_non_finite_loss(self, tmp_path, monkeypatch):
        original = DualViewModel.loss

        def poisoned(self, out, y, weights=None):
            total, br = original(self, out, y, weights)
            return total, dataclasses.replace(br, loss_Gr=float("nan"))

        monkeypatch.setattr(DualViewModel, "loss", poisoned)
        assert main(["train", "--data", str(TOY_CSV), "--out", str(tmp_path), "--folds", "1",
                     *FAST]) == 4

    def test_strict_single_class_eval(self, trained, tmp_path):
        data = tmp_path / "pos.csv"
        data.write_text("id,smiles,label\na,CCO,1\nb,CCN,1\n")
        assert main(["eval", "--checkpoint", str(trained / "model"), "--data", str(data),
                     "--out", str(tmp_path / "e1")]) == 0
        report = json.loads((tmp_path / "e1" / "eval_report.json").read_text())
        assert report["metrics"]["AUC"] is None
        assert main(["eval", "--checkpoint", str(trained / "model"), "--data", str(data),
                     "--out", str(tmp_path / "e2"), "--strict"]) == 3


class TestPredict:
    def test_single_smiles_stdout(self, trained, capsys):
        assert main(["predict", "--checkpoint", str(trained / "model"), "--smiles", "CCO"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("# version=")
        row = next(csv.DictReader(lines[1:]))
        assert 0 < float(row["y_pred"]) < 1 and 0 < float(row["uncertainty"]) <= 1

    def test_batch_keeps_order_and_reports_errors(self, trained, tmp_path):
        inp = tmp_path / "in.csv"
        inp.write_text("name,smi\nx,c1ccccc1O\ny,C1CC\nz,CC(=O)N\n")
        out = tmp_path / "p.csv"
        assert main(["predict", "--checkpoint", str(trained / "model"), "--input", str(inp),
                     "--smiles-col", "smi", "--id-col", "name", "--out", str(out)]) == 0
        rows = read_predict_csv(out)
        assert [r["id"] for r in rows] == ["x", "y", "z"]
        assert rows[1]["y_pred"] == "" and rows[1]["error"].startswith("DanglingRingClosure")
        assert rows[0]["error"] == "" and float(rows[2]["alpha"]) >= 1

    def test_matches_single_prediction(self, trained, tmp_path, capsys):
        main(["predict", "--checkpoint", str(trained / "model"), "--smiles", "CC(=O)N"])
        single = next(csv.DictReader(capsys.readouterr().out.splitlines()[1:]))
        out = tmp_path / "p.json"
        inp = tmp_path / "in.csv"
        inp.write_text("smiles\nCCO\nCC(=O)N\n")
        main(["predict", "--checkpoint", str(trained / "model"), "--input", str(inp),
              "--out", str(out)])
        doc = json.loads(out.read_text())
        assert doc["version"] == version_string() and doc["model"]["task"] == "classification"
        assert doc["predictions"][1]["y_pred"] == float(single["y_pred"])


class TestEvalAndInspect:
    def test_eval_overfit_accuracy(self, tmp_path):
        out = tmp_path / "run"
        assert main(["train", "--data", str(TOY_CSV), "--out", str(out), "--id-col", "id",
                     "--folds", "1", "--val-fraction", "0", "--epochs", "200",
                     "--threads", "1"]) == 0
        assert main(["eval", "--checkpoint", str(out / "model"), "--data", str(TOY_CSV),
                     "--out", str(tmp_path / "ev"), "--retention"]) == 0
        report = json.loads((tmp_path / "ev" / "eval_report.json").read_text())
        assert report["metrics"]["ACC"] >= 0.95
        assert report["config"]["checkpoint"] == str(out / "model")
        assert (tmp_path / "ev" / "eval_report_retention.csv").exists()

    def test_inspect(self, capsys):
        assert main(["inspect", "CC(=O)O"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert [a["element"] for a in doc["atoms"]] == ["C", "C", "O", "O"]
        assert doc["molecular_graph"]["num_edges"] == 3
        assert doc["bond_graph"]["num_nodes"] == 3 and doc["bond_graph"]["num_edges"] == 3

    def test_inspect_bad_smiles(self):
        assert main(["inspect", "C1CC"]) == 3
