import io

import numpy as np
import pytest

from mwalign.checkpoint import load_checkpoint
from mwalign.cli import (EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, build_run_config, main, read_config_file)

FAST = ["--mat-epochs", "1", "--mat-steps-per-epoch", "5", "--mat-dis-hidden", "8,8", "--mat-batch-size", "8",
        "--mat-val-top-k", "60", "--mat-dis-sample-cutoff", "60", "--mpsr-epochs", "1", "--mpsr-steps-per-epoch",
        "5", "--mpsr-lexicon-cutoff", "60", "--mpsr-val-top-k", "60", "--mpsr-min-lexicon", "1"]


@pytest.fixture
def family(tmp_path, capsys):
    d = tmp_path / "fam"
    assert main(["synth", "--out", str(d), "--n-langs", "3", "--vocab", "60", "--dim", "4", "--sigma", "0",
                 "--rotation-scale", "0.2"]) == EXIT_OK
    langs = capsys.readouterr().out.strip()
    assert langs.startswith("l0=")
    return d, langs


def test_train_evaluate_translate(family, tmp_path, capsys, monkeypatch):
    d, langs = family
    out = tmp_path / "run"
    assert main(["train", "--langs", langs, "--out", str(out), "--seed", "3"] + FAST) == EXIT_OK
    m = load_checkpoint(out / "best.ckpt")
    assert m.langs == ["l0", "l1", "l2"] and m.target == 0
    log = (out / "log.csv").read_text().splitlines()
    assert log[0].startswith("epoch,step") and len(log) == 3

    cfg = build_run_config(read_config_file(out / "manifest.txt"))
    assert cfg.to_text() == (out / "manifest.txt").read_text()
    assert cfg.mat.seed == 3 and cfg.mpsr.seed == 3 and cfg.mat.dis_hidden == (8, 8)

    rep = tmp_path / "rep"
    assert main(["evaluate", "--checkpoint", str(out / "best.ckpt"), "--manifest", str(out / "manifest.txt"),
                 "--dict", f"l1-l0={d / 'l1-l0.txt'}", "--dict", f"l0-l2={d / 'l0-l2.txt'}",
                 "--out", str(rep)]) == EXIT_OK
    assert "precision@1" in capsys.readouterr().out
    assert (rep / "precision.csv").read_text().startswith("src,tgt,precision")

    monkeypatch.setattr("sys.stdin", io.StringIO("w1\nnope\nw5\n"))
    assert main(["translate", "--checkpoint", str(out / "best.ckpt"), "--langs", langs, "--src", "l1",
                 "--tgt", "l0", "-k", "2"]) == EXIT_OK
    rows = [r.split("\t") for r in capsys.readouterr().out.splitlines()]
    assert rows[1] == ["nope", "<OOV>"]
    assert len(rows[0]) == 5 and rows[0][0] == "w1" and float(rows[0][2]) >= float(rows[0][4])


def test_same_seed_bit_identical(family, tmp_path):
    _, langs = family
    for name in ("a", "b"):
        assert main(["train", "--langs", langs, "--out", str(tmp_path / name)] + FAST) == EXIT_OK
    assert (tmp_path / "a" / "best.ckpt").read_bytes() == (tmp_path / "b" / "best.ckpt").read_bytes()


def test_pivot_mode_writes_pairs(family, tmp_path):
    _, langs = family
    out = tmp_path / "piv"
    assert main(["train", "--langs", langs, "--out", str(out), "--mode", "pivot", "--skip-mpsr"] + FAST) == EXIT_OK
    assert len(list((out / "pairs").glob("*.ckpt"))) == 6
    assert "bwes=4" in (out / "cost.txt").read_text()


def test_config_file_and_flag_precedence(family, tmp_path):
    _, langs = family
    conf = tmp_path / "c.txt"
    conf.write_text(f"langs={langs}\nmat_epochs=7  # comment\n")
    from mwalign.cli import build_parser, train_config_from_args
    args = build_parser().parse_args(["train", "--config", str(conf), "--mat-epochs", "2"])
    assert train_config_from_args(args).mat.epochs == 2


def test_usage_errors_exit_2(family, tmp_path, capsys):
    d, langs = family
    assert main(["train", "--langs", "l0=" + str(d / "l0.vec"), "--out", str(tmp_path / "x")]) == EXIT_USAGE
    assert main(["train", "--langs", langs, "--mat-k", "0", "--out", str(tmp_path / "x")]) == EXIT_USAGE
    assert main(["train", "--langs", "l0=/nope.vec,l1=/nope2.vec"]) == EXIT_USAGE
    bad = tmp_path / "bad.txt"
    bad.write_text("onlyoneword\n")
    assert main(["train", "--langs", langs, "--out", str(tmp_path / "r")] + FAST) == EXIT_OK
    code = main(["evaluate", "--checkpoint", str(tmp_path / "r" / "best.ckpt"), "--langs", langs,
                 "--dict", f"l0-l1={bad}"])
    assert code == EXIT_USAGE
    assert "bad.txt:1" in capsys.readouterr().err
    assert main(["evaluate", "--checkpoint", str(tmp_path / "missing.ckpt"), "--langs", langs,
                 "--dict", f"l0-l1={bad}"]) == EXIT_USAGE


def test_runtime_error_exit_3(tmp_path, capsys):
    d = tmp_path / "t"
    main(["synth", "--out", str(d), "--n-langs", "2", "--vocab", "10", "--dim", "4", "--sigma", "0"])
    langs = capsys.readouterr().out.strip()
    # lexicon far below the minimum size makes refinement give up
    code = main(["train", "--langs", langs, "--out", str(tmp_path / "r")] + FAST[:12] +
                ["--mpsr-lexicon-cutoff", "5", "--mpsr-val-top-k", "10"])
    assert code == EXIT_RUNTIME
