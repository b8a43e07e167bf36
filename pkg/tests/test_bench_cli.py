import json

import numpy as np
import pytest

from rclmc import bench
from rclmc.cli import main
from rclmc.config import ConfigError, parse_config

SMALL = {"method": "rclmc", "target": {"name": "gaussian", "diag": [1.0, 2.0, 4.0]},
         "phi": "alpha:1", "h": 0.02, "M": 60, "N": 64, "seed": 5,
         "init": {"point": 2.0}, "snapshots": {"every": 20}}


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj, indent=2))
    return str(p)


def test_csv_hash_line_and_header():
    config = parse_config(SMALL)
    _, curve, _ = bench.run_config(config)
    text = bench.curve_csv(curve)
    lines = text.splitlines()
    assert lines[0] == f"# config_hash={config.hash}"
    assert lines[1] == bench.CSV_HEADER
    assert [int(ln.split(",")[0]) for ln in lines[2:]] == [0, 20, 40, 60]
    back = bench.read_curve_csv(text)
    assert np.array_equal(back.error, curve.error) and back.config_hash == config.hash


def test_zero_iterations_single_row():
    config = parse_config(dict(SMALL, M=0))
    record, curve, _ = bench.run_config(config)
    assert curve.m.tolist() == [0] and curve.nominal_cost.tolist() == [0]
    # initial law is a point mass at 2 so the reported second moment is exact
    assert curve.error[0] == pytest.approx(abs(12.0 - (1 + 0.5 + 0.25)), rel=1e-12)


def test_sample_cli_deterministic_and_thread_independent(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", SMALL)
    outs = []
    for i, threads in enumerate(("1", "1", "3")):
        out = tmp_path / f"o{i}"
        assert main(["sample", "--config", cfg, "--threads", threads, "--out", str(out)]) == 0
        outs.append((out / "sample.csv").read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_sample_cli_summary_and_seed_override(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", SMALL)
    assert main(["sample", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["chains"] == 64 and summary["iterations"] == 60
    assert main(["sample", "--config", cfg, "--seed", "6", "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "sample.csv").read_text()
    b = (tmp_path / "b" / "sample.csv").read_text()
    assert a.splitlines()[0] != b.splitlines()[0] and a != b


def test_env_threads(tmp_path, monkeypatch):
    cfg = write(tmp_path, "c.json", SMALL)
    monkeypatch.setenv("RCLMC_THREADS", "2")
    assert main(["sample", "--config", cfg, "--out", str(tmp_path / "e")]) == 0
    monkeypatch.setenv("RCLMC_THREADS", "many")
    assert main(["sample", "--config", cfg, "--out", str(tmp_path / "f")]) == 2


def test_snapshot_binary_round_trip(tmp_path):
    cfg = write(tmp_path, "c.json", SMALL)
    assert main(["sample", "--config", cfg, "--out", str(tmp_path), "--snapshots-bin",
                 "snap.bin"]) == 0
    its, states = bench.read_snapshots(tmp_path / "snap.bin")
    assert its.tolist() == [0, 20, 40, 60] and states.shape == (4, 64, 3)
    assert np.all(states[0] == 2.0)
    record, _, _ = bench.run_config(parse_config(SMALL), keep_states=True)
    assert np.array_equal(states, record.states)
    raw = (tmp_path / "snap.bin").read_bytes()
    assert raw[:4] == b"RCLM" and len(raw) == 20 + 8 * 4 + 8 * 4 * 64 * 3


def test_benchmark_single_config_matches_sample(tmp_path):
    cfg = write(tmp_path, "c.json", dict(SMALL, label="only"))
    assert main(["sample", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    assert main(["benchmark", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "s" / "only.csv").read_bytes() == (tmp_path / "b" / "only.csv").read_bytes()


def test_benchmark_outputs(tmp_path, capsys):
    raw = {"base": dict(SMALL, snapshots={"cost": [0, 30, 60, 90]}, M=90),
           "runs": [{"label": "rc"}, {"method": "lmc", "M": 30, "label": "full"}]}
    cfg = write(tmp_path, "b.json", raw)
    assert main(["benchmark", "--config", cfg, "--out", str(tmp_path)]) == 0
    combined = (tmp_path / "benchmark.csv").read_text().splitlines()
    assert combined[1] == "label," + bench.CSV_HEADER
    assert {ln.split(",")[0] for ln in combined[2:]} == {"rc", "full"}
    dat = (tmp_path / "benchmark.dat").read_text().splitlines()
    assert dat[1] == "# 1:cost 2:error_rc 3:stderr_rc 4:error_full 5:stderr_full"
    assert [ln.split()[0] for ln in dat[2:]] == ["0", "30", "60", "90"]
    full = bench.read_curve_csv((tmp_path / "full.csv").read_text())
    assert full.nominal_cost.tolist() == [0, 30, 60, 90]


def test_benchmark_rejects_mismatched_targets(tmp_path, capsys):
    raw = {"base": SMALL, "runs": [{"label": "a"},
                                   {"label": "b", "target": {"name": "gaussian", "d": 3}}]}
    cfg = write(tmp_path, "b.json", raw)
    assert main(["benchmark", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "different target" in capsys.readouterr().err
    with pytest.raises(ConfigError):
        bench.check_comparable([parse_config(dict(SMALL, label="a")),
                                parse_config(dict(SMALL, label="b", target="block_gaussian"))])


def test_gnuplot_missing_costs_are_nan():
    a = bench.ErrorCurve(*(np.array(v) for v in ([0, 1], [0.0, 1.0], [0, 10], [0.0, 10.0],
                                                  [1.0, 0.5], [0.1, 0.1])), label="a")
    b = bench.ErrorCurve(*(np.array(v) for v in ([0], [0.0], [20], [20.0], [2.0], [0.2])),
                         label="b")
    cs = [parse_config(dict(SMALL, label="a")), parse_config(dict(SMALL, label="b"))]
    rows = bench.gnuplot_dat([a, b], cs).splitlines()[2:]
    assert rows[0].split() == ["0", "1.0", "0.1", "nan", "nan"]
    assert rows[2].split() == ["20", "nan", "nan", "2.0", "0.2"]


def test_ordering_report():
    mk = lambda errs: bench.ErrorCurve(np.arange(5), np.zeros(5), np.arange(0, 500, 100),
                                       np.zeros(5), np.array(errs), np.full(5, 0.01))
    good, bad = mk([5, 1, 1, 1, 1]), mk([5, 2, 2, 0.5, 2])
    rep = bench.ordering_report([good, bad], burn_in=0.2)
    assert rep["n_costs"] == 4 and rep["fraction"] == pytest.approx(3 / 4)
    assert [r["ordered"] for r in rep["detail"]] == [True, True, False, True]


def test_exit_codes(tmp_path, capsys):
    bad = write(tmp_path, "bad.json", dict(SMALL, h=-1))
    assert main(["sample", "--config", bad]) == 2
    assert f"{bad}:" in capsys.readouterr().err
    assert main(["sample"]) == 2
    assert main(["sample", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["verify", "nonsense"]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["--help"]) == 0
    assert main(["plan", "--eps", "0", "--W0", "1", "--mu", "1", "--L", "1"]) == 2
    bad_target = write(tmp_path, "bt.json", dict(SMALL, target={"name": "gaussian"}))
    assert main(["sample", "--config", bad_target]) == 2
    assert f"{bad_target}:" in capsys.readouterr().err


def test_bounds_cli_passthrough(capsys):
    assert main(["bounds", "--method", "lmc", "--W0", "2", "--mu", "1", "--L", "1",
                 "--d", "4", "--h", "0.25", "--json"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["bound"] == 4.0 and rep["admissible"]
    assert main(["bounds", "--W0", "1", "--mu", "1", "--h", "0.0625", "--L", "1,1",
                 "--phi", "0.5,0.5"]) == 0
    assert "bound = 3.5" in capsys.readouterr().out
    assert main(["bounds", "--W0", "1", "--mu", "1", "--h", "0.5", "--L", "1,1",
                 "--phi", "0.5,0.5"]) == 0
    assert "NOT admissible" in capsys.readouterr().out


def test_plan_cli_matches_library(capsys):
    from rclmc import bounds as B
    assert main(["plan", "--eps", "0.01", "--W0", "2", "--mu", "1", "--L", "[1,2,3]",
                 "--alpha", "1", "--json"]) == 0
    got = json.loads(capsys.readouterr().out)
    want = B.rclmc_stopping_case1(0.01, 2.0, 1.0, 3.0, [1.0, 2.0, 3.0], 1.0)
    assert got["h"] == want.h and got["M"] == want.M
    assert main(["plan", "--method", "lmc", "--case", "2", "--eps", "0.01", "--W0", "2",
                 "--mu", "1", "--L", "2", "--H", "0.5", "--d", "10"]) == 0
    out = capsys.readouterr().out
    want = B.lmc_stopping_case2(0.01, 2.0, 1.0, 2.0, 0.5, 10)
    assert f"M = {want.M}" in out


def test_verify_cli_small_suite(tmp_path, capsys, monkeypatch):
    from rclmc import verify
    monkeypatch.setitem(verify.SUITES, "recursion",
                        lambda seed=1: verify.recursion(seed=seed, d=5, N=2000, M=100))
    assert main(["verify", "recursion", "--out", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "verify.json").read_text())
    assert res["suite"] == "recursion" and res["passed"]
