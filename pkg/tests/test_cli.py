import json

import numpy as np
import pytest

from instances import toy
from tvflow import io
from tvflow.cli import EXIT_CHECK, EXIT_DATA, EXIT_OK, EXIT_USAGE, cli_main


@pytest.fixture
def toy_files(tmp_path):
    def make(boundary_weight=0.5):
        g, p, t, x = toy(boundary_weight=boundary_weight)
        io.write_graph(tmp_path / "g.txt", g)
        io.write_labels(tmp_path / "l.txt", t)
        io.write_partition(tmp_path / "p.txt", p)
        return tmp_path, x

    return make


def test_exit_codes_distinct():
    assert len({EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CHECK}) == 4


def test_solve_and_cert(toy_files, capsys):
    d, x = toy_files()
    rc = cli_main(["solve", "--graph", str(d / "g.txt"), "--labels", str(d / "l.txt"),
                   "--out", str(d / "e.csv"), "--dual-out", str(d / "y.csv"), "--trace", str(d / "t.csv")])
    assert rc == EXIT_OK
    assert np.max(np.abs(io.read_estimate(d / "e.csv", 8) - x)) <= 1e-5
    header, rows = io.read_csv(d / "t.csv")
    assert header[0] == "k" and rows
    capsys.readouterr()
    rc = cli_main(["cert", "--graph", str(d / "g.txt"), "--labels", str(d / "l.txt"),
                   "--estimate", str(d / "e.csv"), "--dual", str(d / "y.csv")])
    out = capsys.readouterr().out
    assert rc == EXIT_OK and "cert: pass" in out and "gap=" in out


def test_solve_stdout(toy_files, capsys):
    d, _ = toy_files()
    assert cli_main(["solve", "--graph", str(d / "g.txt"), "--labels", str(d / "l.txt"),
                     "--algorithm", "lp"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "node,estimate" and len(lines) == 9


def test_cert_rejects_bad_estimate(toy_files, capsys):
    d, _ = toy_files()
    io.write_estimate(d / "e.csv", np.zeros(8))
    g, _, _, _ = toy()
    io.write_dual(d / "y.csv", g, np.zeros(g.num_edges))
    rc = cli_main(["cert", "--graph", str(d / "g.txt"), "--labels", str(d / "l.txt"),
                   "--estimate", str(d / "e.csv"), "--dual", str(d / "y.csv")])
    assert rc == EXIT_CHECK
    assert "label_violation=1.0" in capsys.readouterr().out


def test_verify(toy_files, capsys):
    d, _ = toy_files()
    rc = cli_main(["verify", "--graph", str(d / "g.txt"), "--labels", str(d / "l.txt"),
                   "--partition", str(d / "p.txt"), "--exact", "--out", str(d / "r.csv")])
    out = capsys.readouterr().out
    assert rc == EXIT_OK and "exact: pass" in out
    header, rows = io.read_csv(d / "r.csv")
    assert header == ["cluster", "rho", "required", "pass"]
    assert [r[3] for r in rows] == ["pass", "pass"]


def test_verify_fails_on_heavy_boundary(toy_files, capsys):
    d, _ = toy_files(boundary_weight=10.0)
    rc = cli_main(["verify", "--graph", str(d / "g.txt"), "--labels", str(d / "l.txt"),
                   "--partition", str(d / "p.txt")])
    assert rc == EXIT_CHECK and "fail" in capsys.readouterr().out


def test_data_errors(toy_files, capsys):
    d, _ = toy_files()
    assert cli_main(["solve", "--graph", str(d / "missing"), "--labels", str(d / "l.txt")]) == EXIT_DATA
    assert "missing" in capsys.readouterr().err
    (d / "bad.txt").write_text("0 1 -2\n")
    assert cli_main(["solve", "--graph", str(d / "bad.txt"), "--labels", str(d / "l.txt")]) == EXIT_DATA
    assert "bad.txt:1: nonpositive" in capsys.readouterr().err


def test_usage_errors(capsys):
    assert cli_main(["solve"]) == EXIT_USAGE
    assert cli_main(["frobnicate"]) == EXIT_USAGE
    assert cli_main(["solve", "--graph", "g", "--labels", "l", "--iters", "0"]) == EXIT_USAGE


def test_gen_then_solve(tmp_path, capsys):
    pre = tmp_path / "inst"
    assert cli_main(["gen", "sbm", "--seed", "4", "--out-prefix", str(pre)]) == EXIT_OK
    for ext in ("graph", "partition", "labels", "signal"):
        assert (tmp_path / f"inst.{ext}").exists()
    assert cli_main(["verify", "--graph", f"{pre}.graph", "--labels", f"{pre}.labels",
                     "--partition", f"{pre}.partition"]) in (EXIT_OK, EXIT_CHECK)
    assert cli_main(["solve", "--graph", f"{pre}.graph", "--labels", f"{pre}.labels",
                     "--algorithm", "nlasso", "--out", str(tmp_path / "e.csv")]) == EXIT_OK
    assert cli_main(["gen", "two-cluster", "--seed", "1", "--n-per-cluster", "10", "--p-edge", "0.5",
                     "--amplitudes", "1,2,3", "--out-prefix", str(pre)]) == EXIT_USAGE


def test_gen_reproducible(tmp_path):
    for name in ("a", "b"):
        cli_main(["gen", "two-cluster", "--seed", "9", "--n-per-cluster", "12", "--p-edge", "0.4",
                  "--n-cross", "3", "--out-prefix", str(tmp_path / name)])
    for ext in ("graph", "labels"):
        assert (tmp_path / f"a.{ext}").read_bytes() == (tmp_path / f"b.{ext}").read_bytes()


def test_exp(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 0, "ratios": [1, 12], "trials": 3, "max_iters": 200}))
    assert cli_main(["exp", "sbm", "--config", str(cfg), "--out", str(tmp_path / "o.csv")]) == EXIT_OK
    text = (tmp_path / "o.csv").read_text().splitlines()
    assert text[0] == "# seed=0" and text[2] == "ratio,nmse,margin" and len(text) == 5
    cfg.write_text(json.dumps({"seed": 0, "bogus": 1}))
    assert cli_main(["exp", "sbm", "--config", str(cfg)]) == EXIT_DATA


def test_exp_workers_match(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 5, "ratios": [2], "trials": 4, "max_iters": 100}))
    cli_main(["exp", "sbm", "--config", str(cfg), "--out", str(tmp_path / "a.csv")])
    cli_main(["exp", "sbm", "--config", str(cfg), "--workers", "2", "--out", str(tmp_path / "b.csv")])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
