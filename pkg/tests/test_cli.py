import json
import signal
import subprocess
import sys
import time

import numpy as np
import pytest

from simembed.cli import main
from simembed.graph import load_edge_list
from simembed.storage import load_model


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def two_cycle(tmp_path):
    path = tmp_path / "c2.edges"
    path.write_text("0 1\n1 0\n")
    return path


def manifest(path):
    return json.loads((path.parent / (path.name + ".manifest.json")).read_text())


def test_train_full_is_deterministic(tmp_path, karate_path):
    outs = []
    for i in range(2):
        out = tmp_path / f"e{i}.bin"
        assert run("train", "--input", karate_path, "--symmetrize", "--similarity", "ppr:0.85",
                   "--dim", "4", "--full", "--seed", "1", "--output", out) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    m = manifest(tmp_path / "e0.bin")
    assert m["seed"] == 1 and m["config"]["full"] is True
    assert set(m) >= {"command", "config", "inputs", "outputs", "duration_seconds", "started"}
    assert str(karate_path) in m["inputs"]


def test_train_defaults(tmp_path, karate_path):
    out = tmp_path / "e.bin"
    assert run("train", "--input", karate_path, "--symmetrize", "--epochs", "1", "--output", out) == 0
    cfg = manifest(out)["config"]
    assert (cfg["dim"], cfg["negatives"], cfg["similarity"], cfg["order"]) == (128, 3, "ppr:0.85", 1)
    assert load_model(out).w.shape == (34, 128)


@pytest.mark.parametrize("fmt", ["raw", "text"])
def test_train_formats(tmp_path, karate_path, fmt):
    out = tmp_path / "e.out"
    assert run("train", "--input", karate_path, "--dim", "3", "--epochs", "2", "--format", fmt, "--output", out) == 0
    loaded = load_model(out, fmt, n=34, d=3)
    assert loaded.w.shape == (34, 3)


def test_bad_similarity_is_usage_error(tmp_path, karate_path, capsys):
    out = tmp_path / "e.bin"
    assert run("train", "--input", karate_path, "--similarity", "simrank:1.5", "--output", out) == 1
    assert "simrank" in capsys.readouterr().err
    assert not out.exists()


def test_unknown_flag_is_usage_error(karate_path):
    assert run("train", "--input", karate_path, "--output", "x", "--bogus") == 1


def test_missing_input_is_input_error(tmp_path):
    assert run("train", "--input", tmp_path / "nope.edges", "--output", tmp_path / "e.bin") == 2


def test_diverged_training_writes_nothing(tmp_path, karate_path):
    out = tmp_path / "e.bin"
    assert run("train", "--input", karate_path, "--symmetrize", "--dim", "8", "--epochs", "200",
               "--lr", "10", "--output", out) == 1
    assert not out.exists()


def test_full_training_cap(tmp_path):
    path = tmp_path / "big.edges"
    path.write_text("0 2500\n")
    out = tmp_path / "e.bin"
    assert run("train", "--input", path, "--full", "--dim", "2", "--epochs", "1", "--output", out) == 3
    assert not out.exists()


@pytest.fixture
def embedding(tmp_path, karate_path):
    out = tmp_path / "e.bin"
    assert run("train", "--input", karate_path, "--symmetrize", "--dim", "8", "--epochs", "50", "--output", out) == 0
    return out


def test_eval_reconstruct(tmp_path, karate_path, embedding, capsys):
    report = tmp_path / "r.txt"
    assert run("eval", "reconstruct", "--graph", karate_path, "--symmetrize", "--embedding", embedding,
               "--output", report) == 0
    values = dict(line.split("=", 1) for line in report.read_text().splitlines())
    assert 0.0 <= float(values["reconstruct.precision"]) <= 1.0
    assert (tmp_path / "r.csv").read_text().startswith("task,metric,value,spec,order,seed")
    assert (tmp_path / "r.txt.manifest.json").exists()


def test_eval_classify_repeats(tmp_path, karate_path, embedding):
    labels = tmp_path / "labels.tsv"
    labels.write_text("".join(f"{i}\t{'a' if i < 17 else 'b'}\n" for i in range(34)))
    report = tmp_path / "c.txt"
    assert run("eval", "classify", "--graph", karate_path, "--symmetrize", "--embedding", embedding,
               "--labels", labels, "--train-fraction", "0.5", "--repeats", "10", "--output", report) == 0
    values = dict(line.split("=", 1) for line in report.read_text().splitlines())
    assert values["config.repeats"] == "10"
    assert "classify.micro_f1_sd" in values and "classify.macro_f1" in values


def test_eval_multilabel_declares_deviation(tmp_path, karate_path, embedding):
    labels = tmp_path / "labels.tsv"
    labels.write_text("".join(f"{i}\ta{',b' if i % 2 else ''}\n" for i in range(34)))
    report = tmp_path / "m.txt"
    assert run("eval", "classify", "--graph", karate_path, "--symmetrize", "--embedding", embedding,
               "--labels", labels, "--mode", "multilabel", "--train-fraction", "0.5", "--repeats", "2",
               "--output", report) == 0
    assert "one-vs-rest" in report.read_text()


@pytest.mark.parametrize("task", ["cluster", "ndcg", "linkpred"])
def test_eval_other_tasks(tmp_path, karate_path, embedding, task):
    report = tmp_path / f"{task}.txt"
    assert run("eval", task, "--graph", karate_path, "--symmetrize", "--embedding", embedding,
               "--repeats", "2", "--k-max", "5", "--output", report) == 0
    assert report.exists()


def test_eval_mismatched_nodes(tmp_path, two_cycle, embedding, capsys):
    assert run("eval", "reconstruct", "--graph", two_cycle, "--embedding", embedding) == 2
    err = capsys.readouterr().err
    assert "34" in err and "2" in err


def test_eval_linkpred_with_held_out_edges(tmp_path, karate_path):
    train_edges, test_edges = tmp_path / "train.edges", tmp_path / "test.edges"
    assert run("gen", "split", "--input", karate_path, "--train-fraction", "0.5", "--seed", "1",
               "--train-output", train_edges, "--test-output", test_edges) == 0
    emb = tmp_path / "e.bin"
    assert run("train", "--input", train_edges, "--symmetrize", "--dim", "8", "--epochs", "50", "--output", emb) == 0
    report = tmp_path / "lp.txt"
    assert run("eval", "linkpred", "--graph", train_edges, "--symmetrize", "--test-graph", test_edges,
               "--embedding", emb, "--repeats", "3", "--output", report) == 0
    values = dict(line.split("=", 1) for line in report.read_text().splitlines() if "=" in line)
    assert 0.0 <= float(values["linkpred.accuracy"]) <= 1.0


def test_oracle_two_cycle(tmp_path, two_cycle):
    out = tmp_path / "rows.txt"
    assert run("oracle", "--graph", two_cycle, "--similarity", "ppr:0.85", "--nodes", "0", "--output", out) == 0
    assert out.read_text().splitlines() == ["0 0 0.540541", "0 1 0.459459"]


def test_oracle_adjacency_sink(tmp_path, capsys):
    path = tmp_path / "g.edges"
    path.write_text("0 1\n")
    assert run("oracle", "--graph", path, "--similarity", "adj", "--nodes", "1") == 0
    assert capsys.readouterr().out.splitlines() == ["1 1 1.0"]


@pytest.mark.parametrize("spec", ["ppr:0.85", "adj", "simrank:0.6"])
def test_oracle_rows_sum_to_one(tmp_path, karate_path, spec):
    out = tmp_path / "rows.txt"
    assert run("oracle", "--graph", karate_path, "--symmetrize", "--similarity", spec, "--output", out) == 0
    data = np.loadtxt(out)
    sums = np.bincount(data[:, 0].astype(int), weights=data[:, 2])
    np.testing.assert_allclose(sums, 1.0, atol=1e-5)


def test_oracle_cap(karate_path):
    assert run("oracle", "--graph", karate_path, "--similarity", "simrank:0.6", "--cap", "10") == 3


def test_gen_ws(tmp_path):
    out = tmp_path / "ws.edges"
    assert run("gen", "ws", "--nodes", "100", "--k", "4", "--beta", "0.1", "--seed", "2", "--output", out) == 0
    g = load_edge_list(out)
    assert (g.n, g.m) == (100, 400)
    assert manifest(out)["result"]["edges"] == 400


def test_sweep_restricted_grid(tmp_path, karate_path, capsys):
    out = tmp_path / "best.bin"
    assert run("sweep", "--task", "reconstruct", "--graph", karate_path, "--symmetrize", "--grid", "ppr:0.85",
               "--order", "1", "--dim", "8", "--epochs", "20", "--output", out) == 0
    rows = (tmp_path / "best.csv").read_text().splitlines()
    assert rows[0].startswith("task,metric,value,spec,order,seed") and len(rows) == 2
    assert "best=ppr:0.85" in capsys.readouterr().out
    assert load_model(out).w.shape == (34, 8)


def test_sweep_full_grid(tmp_path):
    edges = tmp_path / "cliques.edges"
    edges.write_text("".join(f"{a + o} {b + o}\n" for o in (0, 5) for a in range(5) for b in range(5) if a != b))
    out = tmp_path / "best.bin"
    assert run("sweep", "--task", "reconstruct", "--graph", edges, "--dim", "4", "--epochs", "20", "--output", out) == 0
    assert len((tmp_path / "best.csv").read_text().splitlines()) == 27
    assert "best=" in (tmp_path / "best.bin.report.txt").read_text()


def test_sweep_interrupted_keeps_finished_cells(tmp_path, karate_path):
    out, table = tmp_path / "best.bin", tmp_path / "best.csv"
    proc = subprocess.Popen(
        [sys.executable, "-m", "simembed.cli", "sweep", "--task", "reconstruct", "--graph", str(karate_path),
         "--symmetrize", "--dim", "16", "--epochs", "50000", "--output", str(out)],
        stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL,
    )
    try:
        deadline = time.time() + 120
        while time.time() < deadline:
            if table.exists() and len(table.read_text().splitlines()) >= 3:
                break
            time.sleep(0.1)
        proc.send_signal(signal.SIGKILL)
        proc.wait()
    finally:
        if proc.poll() is None:
            proc.kill()
    lines = table.read_text().splitlines()
    assert 3 <= len(lines) < 27
    assert all(len(line.split(",")) == 7 for line in lines)
    assert not out.exists()


def test_console_script_version():
    result = subprocess.run([sys.executable, "-m", "simembed.cli", "--version"], capture_output=True, text=True)
    assert result.returncode == 0 and "simembed" in result.stdout
