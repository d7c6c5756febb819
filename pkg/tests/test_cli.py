import csv
import io
import json
import subprocess
import sys
from importlib import resources

import pytest

from rfsc import cli

FAST = ["--population", "20", "--iterations", "30", "--repeats", "2", "--jobs", "1"]


@pytest.fixture(scope="module")
def iris_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "iris.csv"
    path.write_text(resources.files("rfsc").joinpath("data/iris.csv").read_text())
    return path


@pytest.fixture(scope="module")
def trained(iris_file, tmp_path_factory):
    out = tmp_path_factory.mktemp("train")
    assert cli.main(["train", "--data", str(iris_file), "--out", str(out), *FAST]) == 0
    return out / "model.json"


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_missing_file_exits_2(tmp_path, capsys):
    for cmd in ("inspect", "dcf", "train", "cv"):
        assert cli.main([cmd, "--data", str(tmp_path / "nope.csv")]) == 2
    assert "nope.csv" in capsys.readouterr().err


def test_malformed_rows_report_line(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2,a\n3,x,b\n")
    assert cli.main(["inspect", "--data", str(bad)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_usage_errors_exit_1(iris_file):
    with pytest.raises(SystemExit) as exc:
        cli.main(["train"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        cli.main(["nonsense"])
    assert exc.value.code == 1
    assert cli.main(["train", "--data", str(iris_file), "--population", "1"]) == 1
    assert cli.main(["dcf", "--data", str(iris_file), "--alpha-d", "2"]) == 1


def test_inspect(capsys):
    assert cli.main(["inspect", "--data", "iris"]) == 0
    out = capsys.readouterr().out
    assert "samples   150" in out and "regressors (degree 2)  15" in out


def test_dcf_report(tmp_path):
    assert cli.main(["dcf", "--data", "wdbc", "--out", str(tmp_path)]) == 0
    rows = read_csv((tmp_path / "dcf_report.csv").read_text())
    assert len(rows) == 30 and {r["class"] for r in rows} == {"1"}


def test_dcf_kept_sets_nest_in_alpha_d(tmp_path):
    kept = {}
    for a in ("0.01", "0.1"):
        out = tmp_path / a
        assert cli.main(["dcf", "--data", "sonar", "--alpha-d", a, "--out", str(out)]) == 0
        rows = read_csv((out / "dcf_report.csv").read_text())
        kept[a] = {r["feature"] for r in rows if r["kept"] == "True"}
    assert kept["0.01"] <= kept["0.1"]


def test_train_writes_model_and_traces(trained):
    doc = json.loads(trained.read_text())
    assert doc["format"] == "rfsc-model/1" and len(doc["models"]) == 3
    traces = sorted(trained.parent.glob("trace_class*_run*.csv"))
    assert len(traces) == 6
    header = traces[0].read_text().splitlines()[0].split(",")
    assert header[:7] == ["iteration", "J_mean", "J_max", "gamma", "ams_pre", "ams_post",
                          "n_mu_above_half"]


def test_predict_on_training_file(trained, iris_file, tmp_path, capsys):
    out = tmp_path / "pred.csv"
    assert cli.main(["predict", "--model", str(trained), "--data", str(iris_file),
                     "--out", str(out)]) == 0
    acc = float(capsys.readouterr().out.split()[1])
    assert acc >= 0.9
    rows = read_csv(out.read_text())
    assert len(rows) == 150 and set(rows[0]) == {"row", "class", "score_1", "score_2", "score_3"}


def test_predict_unlabeled_rows(trained, tmp_path, capsys):
    rows = tmp_path / "rows.csv"
    rows.write_text("5.1,3.5,1.4,0.2\n6.7,3.0,5.2,2.3\n")
    assert cli.main(["predict", "--model", str(trained), "--data", str(rows)]) == 0
    pred = read_csv(capsys.readouterr().out)
    assert [p["class"] for p in pred][0] == "setosa"


def test_explain_identity(trained, iris_file, capsys):
    assert cli.main(["explain", "--model", str(trained), "--data", str(iris_file)]) == 0
    rows = read_csv(capsys.readouterr().out)
    assert len(rows) == 150
    for r in rows:
        assert float(r["y_plus"]) - float(r["y_minus"]) == pytest.approx(float(r["score"]), abs=1e-9)
        assert float(r["y_plus"]) >= 0 and float(r["y_minus"]) >= 0
    assert cli.main(["explain", "--model", str(trained), "--data", str(iris_file),
                     "--class", "9"]) == 1


def test_cv_reports_are_byte_identical(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        args = ["cv", "--data", "iris", "--folds", "3", "--seed", "7", "--out", str(out), *FAST]
        assert cli.main(args) == 0
        outs.append(out)
    for name in ("cv_report.csv", "cv_report.txt"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    assert (outs[0] / "timings.csv").exists()


def test_config_file_and_flag_precedence(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"population": 12, "alpha": 0.95, "repeats": 3}))
    parser = cli.build_parser()
    s = cli.merged_settings(parser.parse_args(["train", "--data", "x", "--config", str(conf),
                                               "--alpha", "0.9"]))
    assert (s["population"], s["alpha"], s["repeats"], s["epsilon"]) == (12, 0.9, 3, 0.01)
    cfg = cli.train_config(s)
    assert cfg.rfsc.n_population == 12 and cfg.rfsc.fit.alpha == 0.9
    conf.write_text(json.dumps({"bogus": 1}))
    assert cli.main(["train", "--data", "iris", "--config", str(conf)]) == 1


def test_model_metadata_works_as_config(trained, tmp_path):
    parser = cli.build_parser()
    s = cli.merged_settings(parser.parse_args(["train", "--data", "x", "--config", str(trained)]))
    assert s["population"] == 20


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "rfsc", "inspect", "--data", "wine"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and "classes   3" in res.stdout
