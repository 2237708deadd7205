import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from crisisspot.cli import main
from crisisspot.config import TrainConfig
from crisisspot.data import load_manifest
from crisisspot.model import Checkpoint, CrisisSpotModel
from crisisspot.training import evaluate

DIMS = "4,6,8,6"


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def corpus_dir(tmp_path, capsys):
    for split, n, seed in (("train", 30, 1), ("val", 12, 2)):
        assert run(capsys, "generate", "--seed", seed, "--n", n, "--dims", DIMS, "--split", split,
                   "--out", tmp_path)[0] == 0
    return tmp_path


def test_generate_counts_and_reproducible(tmp_path, capsys):
    code, out, _ = run(capsys, "generate", "--seed", 7, "--n", 50, "--dims", DIMS, "--out", tmp_path / "a")
    assert code == 0 and json.loads(out)["records"] == 50
    run(capsys, "generate", "--seed", 7, "--n", 50, "--dims", DIMS, "--out", tmp_path / "b")
    a, b = tmp_path / "a" / "train.jsonl", tmp_path / "b" / "train.jsonl"
    assert len(a.read_text().splitlines()) == 50
    assert digest(a) == digest(b)


def test_generate_too_small_is_parameter_error(tmp_path, capsys):
    code, _, err = run(capsys, "generate", "--n", 2, "--dims", DIMS, "--out", tmp_path)
    assert code == 2 and err.startswith("error: parameter:")


def test_kappa_command(tmp_path, capsys):
    (tmp_path / "a.txt").write_text("1\n1\n2\n2\n")
    (tmp_path / "b.txt").write_text("1\n2\n2\n2\n")
    code, out, _ = run(capsys, "kappa", "--a", tmp_path / "a.txt", "--b", tmp_path / "a.txt")
    assert code == 0 and float(out) == 1.0
    _, out, _ = run(capsys, "kappa", "--a", tmp_path / "a.txt", "--b", tmp_path / "b.txt")
    assert float(out) == pytest.approx(0.5, abs=1e-9)
    code, _, err = run(capsys, "kappa", "--a", tmp_path / "a.txt", "--b", tmp_path / "none.txt")
    assert code == 3 and err.startswith("error: resolution:")


def test_eval_perfect_predictions(corpus_dir, capsys):
    corpus = load_manifest(corpus_dir / "val.jsonl", "val")
    preds = corpus_dir / "preds.jsonl"
    labels = corpus.labels("informative")
    preds.write_text("".join(json.dumps({"post_id": r.post_id, "label": int(y)}) + "\n"
                             for r, y in zip(corpus.records, labels)))
    code, out, _ = run(capsys, "eval", "--split", corpus_dir / "val.jsonl", "--predictions", preds,
                       "--task", "informative")
    rep = json.loads(out)
    assert code == 0
    for key in ("accuracy", "precision_macro", "recall_macro", "f1_macro", "f1_weighted"):
        assert rep[key] == 1.0


def test_train_lr0_matches_untrained_model(corpus_dir, capsys):
    out = corpus_dir / "run"
    code, _, _ = run(capsys, "train", "--train-manifest", corpus_dir / "train.jsonl", "--val-manifest",
                     corpus_dir / "val.jsonl", "--lr", 0, "--epochs", 2, "--batch-size", 8, "--seed", 4,
                     "--out", out)
    assert code == 0
    assert (out / "history.csv").read_text().count("\n") == 3
    code, txt, _ = run(capsys, "eval", "--checkpoint", out / "model.ckpt", "--split", corpus_dir / "val.jsonl")
    got = json.loads(txt)
    ck = Checkpoint.load(out / "model.ckpt")
    fresh = CrisisSpotModel.create(ck.model_config, seed=4)
    baseline = Checkpoint.from_model(fresh, ck.social, ck.lexicons)
    want = evaluate(baseline, load_manifest(corpus_dir / "val.jsonl", "val"))
    assert got["accuracy"] == pytest.approx(want.accuracy, abs=1e-12)
    assert got["confusion"] == want.confusion.tolist()


def test_train_from_config_is_deterministic(corpus_dir, capsys):
    cfg = TrainConfig(epochs=2, batch_size=8, seed=3, learning_rate=1e-3,
                      train_manifest="train.jsonl", val_manifest="val.jsonl")
    (corpus_dir / "cfg.json").write_text(json.dumps(cfg.to_dict()))
    for name in ("r1", "r2"):
        assert run(capsys, "train", "--config", corpus_dir / "cfg.json", "--out", corpus_dir / name)[0] == 0
    for f in ("model.ckpt", "history.csv"):
        assert digest(corpus_dir / "r1" / f) == digest(corpus_dir / "r2" / f)


def test_predict_and_score_social(corpus_dir, capsys):
    run(capsys, "train", "--train-manifest", corpus_dir / "train.jsonl", "--epochs", 1, "--out", corpus_dir / "m")
    code, out, _ = run(capsys, "predict", "--checkpoint", corpus_dir / "m" / "model.ckpt",
                       "--manifest", corpus_dir / "val.jsonl")
    rows = [json.loads(x) for x in out.splitlines()]
    assert code == 0 and len(rows) == 12
    assert all(r["label"] in (0, 1) and 0 <= r["probability"] <= 1 for r in rows)
    code, out, _ = run(capsys, "score-social", "--manifest", corpus_dir / "val.jsonl")
    lines = out.splitlines()
    assert code == 0 and len(lines) == 13 and len(lines[0].split(",")) == 23
    vals = np.array([[float(x) for x in ln.split(",")[1:]] for ln in lines[1:]])
    assert (vals >= 0).all() and (vals <= 1).all()


def test_build_graph(corpus_dir, capsys):
    code, out, _ = run(capsys, "build-graph", "--manifest", corpus_dir / "val.jsonl", "--threshold", 0.5,
                       "--out", corpus_dir / "g.txt")
    info = json.loads(out)
    edges = (corpus_dir / "g.txt").read_text().splitlines()[1:]
    assert code == 0 and info["nodes"] == 12 and info["edges"] == len(edges)
    assert len((corpus_dir / "g.nodes.txt").read_text().splitlines()) == 12


def test_error_categories(tmp_path, capsys):
    code, _, err = run(capsys, "eval", "--split", tmp_path / "missing.jsonl", "--predictions", "x",
                       "--task", "informative")
    assert code == 3 and err.startswith("error: ")
    (tmp_path / "bad.json").write_text("{not json")
    code, _, err = run(capsys, "train", "--config", tmp_path / "bad.json", "--out", tmp_path)
    assert code == 2 and "parameter" in err
    code, _, err = run(capsys, "train", "--out", tmp_path)
    assert code == 2


def test_help_lists_flags():
    res = subprocess.run([sys.executable, "-m", "crisisspot", "train", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for flag in ("--config", "--lr", "--epochs", "--batch-size", "--seed", "--out"):
        assert flag in res.stdout
    res = subprocess.run([sys.executable, "-m", "crisisspot", "--help"], capture_output=True, text=True)
    for cmd in ("generate", "train", "eval", "predict", "score-social", "build-graph", "expand-lexicon", "kappa"):
        assert cmd in res.stdout
