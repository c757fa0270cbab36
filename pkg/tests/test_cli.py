import json

import pytest

from dialcoref.cli import main
from dialcoref.format_io import read_corpus, write_corpus
from dialcoref.synthetic import synthetic_corpus


@pytest.fixture()
def files(tmp_path):
    write_corpus(synthetic_corpus(6, seed=1, name="tr"), tmp_path / "tr.ua")
    write_corpus(synthetic_corpus(3, seed=2, name="te"), tmp_path / "te.ua")
    return tmp_path


def _error(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_convert_round_trip(files, caplog):
    assert main(["convert", str(files / "te.ua"), str(files / "te.jsonl")]) == 0
    assert main(["convert", str(files / "te.jsonl"), str(files / "back.ua")]) == 0
    assert (files / "back.ua").read_text() == (files / "te.ua").read_text()
    n_nonref = sum(len(d.non_referring) for d in read_corpus(files / "te.ua").documents)
    assert main(["convert", str(files / "te.ua"), str(files / "te.conll")]) == 0
    assert f"dropped {n_nonref} non_referring" in caplog.text
    assert main(["convert", str(files / "te.conll"), str(files / "c.ua")]) == 0
    a, b = read_corpus(files / "te.conll"), read_corpus(files / "c.ua")
    assert [d.gold_clusters for d in a] == [d.gold_clusters for d in b]


def test_stats(files, capsys):
    assert main(["stats", str(files / "tr.ua"), str(files / "te.ua")]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].split()[:3] == ["corpus", "docs", "mentions"]
    assert out[1].split()[:2] == ["tr", "6"]


def test_parse_error_reports_file_and_line(tmp_path, capsys):
    (tmp_path / "bad.ua").write_text("#begin document x\nx\t0\ta\t-\t(1\t-\n#end document\n")
    assert main(["stats", str(tmp_path / "bad.ua")]) == 1
    err = _error(capsys)
    assert err["error"] == "parse_error"
    assert err["file"].endswith("bad.ua") and err["line"] == 3


def test_score_identical_and_mismatched(files, capsys):
    assert main(["score", str(files / "te.ua"), str(files / "te.ua"), "--json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["avg_f1"] == pytest.approx(1.0)
    assert report["exclude_non_referring"] is True
    assert main(["score", str(files / "te.ua"), str(files / "tr.ua")]) == 1
    err = _error(capsys)
    assert err["error"] == "doc_id_mismatch"
    assert "te_0000" in err["missing_from_response"]


def test_score_table_layout(files, capsys):
    assert main(["score", str(files / "te.ua"), str(files / "te.ua")]) == 0
    lines = capsys.readouterr().out.splitlines()
    labels = [ln.split()[0] for ln in lines if ln and not ln.startswith(("-", " "))]
    assert labels[:4] == ["MUC", "B3", "CEAF_phi4", "Avg"]
    assert "100.00" in lines[2]


def test_train_predict_score_pipeline(files, capsys, monkeypatch):
    monkeypatch.setenv("DIALCOREF_DATA_ROOT", str(files))
    cfg = files / "exp.cfg"
    cfg.write_text("uad_train = tr.ua\ntest = te.ua\nepochs = 5\nembedding_dim = 16\n")
    out = files / "run"
    assert main(["train", "--config", str(cfg), "--epochs", "2", "-o", str(out), "--keep-epochs"]) == 0
    assert (out / "model.ckpt").exists() and (out / "report.json").exists()
    assert "epochs = 2" in (out / "config.txt").read_text()
    assert len((out / "history.jsonl").read_text().splitlines()) == 2
    assert len(list((out / "epochs").iterdir())) == 2
    assert main(["predict", str(out / "model.ckpt"), "te.ua", str(files / "pred.ua"),
                 "--scores", str(files / "s1.jsonl")]) == 0
    assert main(["export-scores", str(out / "model.ckpt"), "te.ua", str(files / "s2.jsonl")]) == 0
    assert (files / "s1.jsonl").read_text() == (files / "s2.jsonl").read_text()
    capsys.readouterr()
    assert main(["score", "te.ua", str(files / "pred.ua"), "--report", str(files / "r.json")]) == 0
    assert "Avg F1" in capsys.readouterr().out
    assert "avg_f1" in json.loads((files / "r.json").read_text())


def test_train_with_missing_corpus_fails_early(files, capsys):
    assert main(["train", "-o", str(files / "run"), "--uad-train", str(files / "nope.ua")]) == 1
    err = _error(capsys)
    assert err["error"] == "missing_corpus"
    assert not (files / "run").exists()


def test_bad_override_is_reported(files, capsys):
    assert main(["train", "-o", str(files / "run"), "--uad-train", str(files / "tr.ua"),
                 "--epochs", "many"]) == 1
    assert _error(capsys)["error"] == "ValueError"
