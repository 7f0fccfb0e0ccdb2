import json

import pytest

from arrivalnet.cli import main


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["simulate", "--seed", "2", "--routes", "2", "--stops", "18", "--days", "1",
                 "--out", str(d / "data.jsonl")]) == 0
    (d / "cfg.json").write_text(json.dumps({"epochs": 1}))
    assert main(["train", "--data", str(d / "data.jsonl"), "--config", str(d / "cfg.json"),
                 "--out", str(d / "model.ckpt")]) == 0
    return d


def test_train_outputs(workdir):
    assert (workdir / "model.ckpt").exists()
    hist = json.loads((workdir / "model.history.json").read_text())
    assert hist["best_epoch"] == 1


def test_evaluate_csv(workdir, capsys):
    assert main(["evaluate", "--checkpoint", str(workdir / "model.ckpt"), "--data", str(workdir / "data.jsonl"),
                 "--baseline", "--out", str(workdir / "m.csv")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["model"]["mae_s"] <= report["model"]["rmse_s"]
    assert "persistence" in report
    assert (workdir / "m.csv").read_text().splitlines()[-1].startswith("aggregate,")


def test_predict(workdir):
    out = workdir / "pred.jsonl"
    assert main(["predict", "--checkpoint", str(workdir / "model.ckpt"), "--data", str(workdir / "data.jsonl"),
                 "--out", str(out)]) == 0
    first = json.loads(out.read_text().splitlines()[0])
    assert len(first["pred_delay_s"]) == 5 and len(first["pred_arrival_s"]) == 5


@pytest.mark.parametrize("with_ckpt", [False, True])
def test_inspect_periods(workdir, capsys, with_ckpt):
    args = ["inspect-periods", "--data", str(workdir / "data.jsonl"), "--index", "2"]
    if with_ckpt:
        args += ["--checkpoint", str(workdir / "model.ckpt")]
    assert main(args) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["T"] == (15 if with_ckpt else 10)
    assert len(d["entries"]) == 3
    assert all(e["period"] == d["T"] // e["frequency"] for e in d["entries"])


def test_export_link_delays(workdir):
    out = workdir / "links.csv"
    assert main(["export-link-delays", "--checkpoint", str(workdir / "model.ckpt"),
                 "--data", str(workdir / "data.jsonl"), "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "link_id,n,gt_mean_s,pred_mean_s"


def test_unknown_config_key(workdir, capsys):
    (workdir / "bad.json").write_text(json.dumps({"layers": 3}))
    assert main(["train", "--data", str(workdir / "data.jsonl"), "--config", str(workdir / "bad.json")]) == 1
    assert "unknown config keys" in capsys.readouterr().err


def test_bad_seed():
    with pytest.raises(SystemExit):
        main(["simulate", "--seed", "-4"])


def test_clip_negative(tmp_path):
    out = tmp_path / "clip.jsonl"
    assert main(["simulate", "--routes", "1", "--stops", "16", "--days", "1", "--clip-negative", "--out", str(out)]) == 0
    for line in out.read_text().splitlines():
        assert all(s["delay_s"] >= 0 for s in json.loads(line)["stops"])
