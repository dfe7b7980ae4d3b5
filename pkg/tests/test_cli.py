import json
from pathlib import Path

import numpy as np
import pytest

from humanaware import io
from humanaware.cli import main


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    assert run("gen-data", "--subjects", 6, "--events", 2, "--seed", 7,
               "--out", out) == 0
    return out


@pytest.fixture(scope="module")
def fitted(tmp_path_factory, data_dir):
    out = tmp_path_factory.mktemp("models")
    fit_path = out / "fit_k2.json"
    mse_path = out / "mse.json"
    assert run("fit", "--train", data_dir / "train", "--k", 2,
               "--max-iters", 150, "--tol", "1e-6", "--seed", 0,
               "--out", fit_path) == 0
    assert run("fit-mse", "--train", data_dir / "train",
               "--out", mse_path) == 0
    return fit_path, mse_path


def scenario_file(tmp_path, **overrides):
    doc = {
        "human_position": [0.0, 0.0, 1.7],
        "start": [-12.0, -4.0],
        "goal": [12.0, 4.0],
        "v_max": 3.0,
        "a_max": 2.0,
        "gamma": 10.0,
        "b_a": 0.3,
        "degree": 4,
        "obstacles": [],
    }
    doc.update(overrides)
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(doc))
    return path


class TestGenData:
    def test_outputs_exist(self, data_dir):
        assert (data_dir / "train").is_dir()
        assert (data_dir / "test").is_dir()
        assert (data_dir / "truth").is_dir()
        assert (data_dir / "theta_true.json").exists()
        assert (data_dir / "manifest.json").exists()

    def test_manifest_references_existing_files(self, data_dir):
        manifest = io.read_json(data_dir / "manifest.json")
        assert manifest["command"] == "gen-data"
        assert manifest["seed"] == 7
        assert manifest["outputs"]
        for path in manifest["outputs"]:
            assert Path(path).exists()

    def test_split_sizes(self, data_dir):
        train = io.load_dataset(data_dir / "train")
        test = io.load_dataset(data_dir / "test")
        assert len(train.sequences) == 4  # round(0.7 * 6)
        assert len(test.sequences) == 2

    def test_byte_identical_reruns(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        for out in (a, b):
            assert run("gen-data", "--subjects", 3, "--events", 1,
                       "--seed", 123, "--out", out) == 0
        files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file()
                         and p.name != "manifest.json")
        files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file()
                         and p.name != "manifest.json")
        assert files_a == files_b
        for rel in files_a:
            assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


class TestFitAndEval:
    def test_fit_writes_model_and_manifest(self, fitted):
        fit_path, _ = fitted
        model = io.load_model_file(fit_path)
        assert model.kind == "hmm"
        assert model.k == 2
        assert model.converged is not None
        assert model.ll_trace
        assert fit_path.parent.joinpath("fit_k2.manifest.json").exists()

    def test_mse_model(self, fitted):
        _, mse_path = fitted
        model = io.load_model_file(mse_path)
        assert model.kind == "mse"
        np.testing.assert_array_equal(model.params.pi1, [1.0, 0.0])

    def test_eval_writes_csv(self, fitted, data_dir, tmp_path, capsys):
        fit_path, mse_path = fitted
        out = tmp_path / "eval.csv"
        assert run("eval", "--model", fit_path, "--model", mse_path,
                   "--test", data_dir / "test", "--out", out) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "model,K,test_log_likelihood"
        assert len(lines) == 3
        assert lines[1].startswith("fit_k2,2,")
        assert lines[2].startswith("mse,0,")
        printed = capsys.readouterr().out
        assert "test log-likelihood" in printed
        # proposed model beats the baseline on held-out synthetic data
        ll_fit = float(lines[1].split(",")[2])
        ll_mse = float(lines[2].split(",")[2])
        assert ll_fit > ll_mse

    def test_compare_reports_rejection(self, fitted, data_dir, tmp_path, capsys):
        fit_path, mse_path = fitted
        out = tmp_path / "compare.json"
        assert run("compare", "--proposed", fit_path, "--baseline", mse_path,
                   "--test", data_dir / "test", "--out", out) == 0
        doc = io.read_json(out)
        assert doc["lambda"] > 0
        assert doc["dof"] == 10
        assert "reject" in doc
        assert "lambda" in capsys.readouterr().out

    def test_fit_missing_dir_errors(self, tmp_path, capsys):
        assert run("fit", "--train", tmp_path / "nope", "--out",
                   tmp_path / "x.json") == 1
        assert "error [fit]" in capsys.readouterr().err


class TestPlanCommands:
    def test_plan_happy_path(self, fitted, tmp_path):
        fit_path, _ = fitted
        scen = scenario_file(tmp_path)
        out = tmp_path / "plan"
        assert run("plan", "--scenario", scen, "--model", fit_path,
                   "--seed", 0, "--out", out) == 0
        doc = io.read_json(out / "plan.json")
        assert doc["diagnostics"]["converged"] is True
        assert doc["cost"] >= doc["curve"]["t_f"] - 1e-9
        path_lines = (out / "path.csv").read_text().splitlines()
        assert path_lines[0] == "t,x,y,z,speed"
        assert (out / "manifest.json").exists()

    def test_plan_b_a_override(self, fitted, tmp_path):
        fit_path, _ = fitted
        scen = scenario_file(tmp_path)
        out = tmp_path / "plan2"
        assert run("plan", "--scenario", scen, "--model", fit_path,
                   "--b-a", 0.05, "--gamma", 0.0, "--out", out) == 0
        manifest = io.read_json(out / "manifest.json")
        assert manifest["config"]["b_a"] == 0.05

    def test_malformed_scenario_names_field(self, fitted, tmp_path, capsys):
        fit_path, _ = fitted
        bad = tmp_path / "bad.json"
        doc = json.loads(scenario_file(tmp_path).read_text())
        del doc["goal"]
        bad.write_text(json.dumps(doc))
        assert run("plan", "--scenario", bad, "--model", fit_path,
                   "--out", tmp_path / "plan3") == 1
        err = capsys.readouterr().err
        assert "goal" in err

    def test_sweep_ba(self, fitted, tmp_path):
        fit_path, _ = fitted
        scen = scenario_file(tmp_path)
        out = tmp_path / "sweep"
        assert run("sweep-ba", "--scenario", scen, "--model", fit_path,
                   "--b-a-values", "0.4,0.2", "--seed", 0, "--out", out) == 0
        lines = (out / "sweep.csv").read_text().splitlines()
        assert lines[0] == "b_a,min_human_distance,cost,t_f,converged"
        assert len(lines) == 3
        assert (out / "path_ba_0p4.csv").exists()
        assert (out / "path_ba_0p2.csv").exists()


class TestPlotData:
    def test_prediction_series(self, fitted, data_dir, tmp_path):
        fit_path, _ = fitted
        out = tmp_path / "pred.csv"
        assert run("plot-data", "--model", fit_path, "--data",
                   data_dir / "test", "--out", out) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "subject,t,y,y_hat,p_attentive"
        assert len(lines) > 10
        p_att = np.array([float(line.split(",")[4]) for line in lines[1:]])
        assert np.all((p_att >= 0) & (p_att <= 1))


class TestUsageErrors:
    def test_unknown_command_exits_2(self):
        with pytest.raises(SystemExit) as excinfo:
            run("frobnicate")
        assert excinfo.value.code == 2

    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as excinfo:
            run("fit", "--nonsense")
        assert excinfo.value.code == 2

    def test_no_command_exits_2(self):
        with pytest.raises(SystemExit) as excinfo:
            run()
        assert excinfo.value.code == 2
