import hashlib
from pathlib import Path

import numpy as np
import pytest

from linksight import traces
from linksight.cli import main
from linksight.imaging import read_pgm

TINY_NET = ["--filters", "2,2,2,2", "--kernels", "3,3,3,3", "--dense-units", "4"]


def tree_digest(root: Path) -> dict:
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


def run(*argv) -> int:
    return main([str(a) for a in argv])


def test_generate_count(tmp_path, capsys):
    assert run("generate", "--count", 100, "--length", 64, "--seed", 7, "--out", tmp_path) == 0
    assert len(list((tmp_path / "traces").glob("*.trace"))) == 100
    ds = traces.load_dataset(tmp_path)
    assert len(ds) == 100 and ds.trace_length == 64
    out = capsys.readouterr().out
    assert out.count("\n") == 1 and out.startswith("generate:")


def test_transform_constant_trace_is_black(tmp_path):
    f = tmp_path / "flat.trace"
    f.write_text(traces.format_trace(traces.Trace("flat", np.full(16, 40.0))))
    assert run("transform", "--input", f, "--kind", "rp", "--out", tmp_path / "o") == 0
    img = read_pgm((tmp_path / "o" / "images" / "flat.pgm").read_bytes())
    assert img.shape == (16, 16) and not img.any()


def test_usage_errors_exit_2(tmp_path):
    assert run("bogus") == 2
    assert run("generate", "--nope", 1) == 2
    assert run("transform") == 2  # missing --input
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour=blue\n")
    assert run("generate", "--config", cfg, "--out", tmp_path) == 2


def test_pipeline_error_exit_1_with_module(tmp_path, capsys):
    assert run("generate", "--count", 0, "--out", tmp_path) == 1
    assert "linksight traces: error" in capsys.readouterr().err
    bad = tmp_path / "bad.trace"
    bad.write_text("0,40\n1,400\n")
    assert run("ingest", "--input", bad, "--out", tmp_path / "i") == 1
    err = capsys.readouterr().err
    assert "linksight traces: error" in err and "line 2" in err


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# corpus\ncount=3\nlength=16\nseed=5\n")
    assert run("generate", "--config", cfg, "--length", 20, "--out", tmp_path / "a") == 0
    ds = traces.load_dataset(tmp_path / "a")
    assert len(ds) == 3 and ds.trace_length == 20 and ds.seed == 5


def test_out_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("LINKSIGHT_OUT", str(tmp_path / "env"))
    assert run("generate", "--count", 2, "--length", 8) == 0
    assert (tmp_path / "env" / "manifest.csv").exists()


def test_ingest_filters_lossy(tmp_path):
    src = tmp_path / "raw"
    src.mkdir()
    (src / "a.trace").write_text("# id=a\n" + "".join(f"{k},40\n" for k in range(10)))
    (src / "b.trace").write_text("# id=b\n" + "".join(f"{k},40\n" for k in range(10) if k != 4))
    assert run("ingest", "--input", src, "--out", tmp_path / "o") == 0
    assert [t.id for t in traces.load_dataset(tmp_path / "o").traces] == ["a"]
    assert run("ingest", "--input", src, "--keep-lossy", "--out", tmp_path / "l") == 0
    assert [t.id for t in traces.load_dataset(tmp_path / "l").traces] == ["b"]


def pipeline():
    root = Path(".")
    gen, lab = root / "gen", root / "lab"
    steps = [
        ["generate", "--count", 12, "--length", 16, "--seed", 3, "--out", gen],
        ["inject", "--input", gen, "--fraction", 0.5, "--seed", 3, "--out", lab],
        ["transform", "--input", lab, "--kind", "gadf", "--format", "csv", "--out", root / "img"],
        ["train", "--input", lab, "--epochs", 2, "--lr", 0.1, *TINY_NET, "--seed", 3,
         "--out", root / "model"],
        ["eval", "--input", lab, "--model", root / "model" / "model.ckpt", "--out", root / "ev"],
        ["eval", "--input", lab, "--repeats", 2, "--epochs", 1, *TINY_NET, "--seed", 3,
         "--out", root / "ev2"],
        ["baseline", "--input", lab, "--repeats", 2, "--window", 4, "--seed", 3, "--out", root / "bl"],
        ["explain", "--model", root / "model" / "model.ckpt", "--input", lab,
         "--ids", "SuddenD-syn00001,SlowD-syn00000", "--class", "auto", "--out", root / "ex"],
        ["sweep", "--input", gen, "--shares", "0.25,0.5", "--folds", 2, "--fold-limit", 1,
         "--epochs", 1, *TINY_NET, "--seed", 3, "--out", root / "sw"],
        ["report", "--input", root / "ev" / "report.csv", root / "bl" / "report.csv",
         "--out", root / "rep"],
    ]
    for argv in steps:
        assert run(*argv) == 0, argv


def test_full_pipeline_deterministic(tmp_path, monkeypatch):
    for name in ("one", "two"):
        (tmp_path / name).mkdir()
        monkeypatch.chdir(tmp_path / name)
        pipeline()
    one, two = tree_digest(tmp_path / "one"), tree_digest(tmp_path / "two")
    assert one == two
    assert "model/model.ckpt" in one and "sw/sweep.csv" in one
    report = (tmp_path / "one" / "ev2" / "report.csv").read_text().splitlines()
    assert len(report) == 1 + 2 * 5 + 2


def test_commands_do_not_mutate_inputs(tmp_path):
    gen = tmp_path / "gen"
    assert run("generate", "--count", 6, "--length", 16, "--out", gen) == 0
    before = tree_digest(gen)
    assert run("inject", "--input", gen, "--fraction", 0.5, "--out", tmp_path / "lab") == 0
    assert run("transform", "--input", gen, "--out", tmp_path / "img") == 0
    assert tree_digest(gen) == before


def test_rp_binary_needs_epsilon(tmp_path, capsys):
    assert run("generate", "--count", 1, "--length", 8, "--out", tmp_path) == 0
    assert run("transform", "--input", tmp_path, "--kind", "rp_binary", "--out", tmp_path / "o") == 1
    assert run("transform", "--input", tmp_path, "--kind", "rp_binary", "--epsilon", 2,
               "--out", tmp_path / "o") == 0
