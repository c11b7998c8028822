import json

import numpy as np
import pytest

from stadapt import io
from stadapt.cli import main


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def simulated(tmp_path, capsys):
    code, out, _ = run(["simulate", "--set", 2, "--mu", 150, "--seed", 5, "--out", tmp_path / "p.csv",
                        "--polygon-out", tmp_path / "w.csv", "--truth", tmp_path / "truth.bin"], capsys)
    assert code == 0 and json.loads(out)["n"] > 0
    return tmp_path


def test_simulate_deterministic(simulated, tmp_path, capsys):
    run(["simulate", "--set", 2, "--mu", 150, "--seed", 5, "--out", tmp_path / "q.csv"], capsys)
    assert (simulated / "p.csv").read_bytes() == (tmp_path / "q.csv").read_bytes()


@pytest.mark.parametrize("method", ["fixed", "adaptive-direct", "adaptive-partition"])
def test_estimate_methods_deterministic(simulated, capsys, method):
    d = simulated
    base = ["estimate", "--points", d / "p.csv", "--polygon", d / "w.csv", "--t0", 0, "--t1", 1,
            "--grid", 16, 16, 8, "--method", method]
    assert run(base + ["--out", d / "a.bin"], capsys)[0] == 0
    assert run(base + ["--out", d / "b.bin"], capsys)[0] == 0
    assert (d / "a.bin").read_bytes() == (d / "b.bin").read_bytes()
    g = io.read_grid(d / "a.bin")
    assert g.meta["kind"] == method.replace("fixed", "fixed-fft") and (g.lam >= 0).all()


def test_estimate_overrides_and_slices(simulated, capsys):
    d = simulated
    code, out, _ = run(["estimate", "--points", d / "p.csv", "--polygon", d / "w.csv", "--t0", 0, "--t1", 1,
                        "--grid", 16, 16, 8, "--xi1", 0.25, "--xi2", 0.5, "--eps-star", 0.1,
                        "--delta-star", 0.1, "--out", d / "e.bin", "--csv-slices", d / "sl"], capsys)
    assert code == 0
    g = io.read_grid(d / "e.bin")
    assert g.meta["xi1"] == 0.25 and g.meta["eps_star"] == 0.1
    assert len(list((d / "sl").glob("*.csv"))) == 8


def test_config_file(simulated, capsys):
    d = simulated
    (d / "c.json").write_text(json.dumps({"points": str(d / "p.csv"), "polygon": str(d / "w.csv"),
                                          "t0": 0, "t1": 1, "grid": [16, 16, 8], "method": "fixed"}))
    code, out, _ = run(["estimate", "--config", d / "c.json", "--out", d / "c.bin"], capsys)
    assert code == 0 and json.loads(out)["method"] == "fixed"
    (d / "bad.json").write_text(json.dumps({"nonsense": 1}))
    code, _, err = run(["estimate", "--config", d / "bad.json", "--out", d / "c.bin"], capsys)
    assert code != 0 and "nonsense" in json.loads(err)["message"]


def test_bandwidths_and_ise(simulated, capsys):
    d = simulated
    code, out, _ = run(["bandwidths", "--points", d / "p.csv", "--polygon", d / "w.csv", "--t0", 0, "--t1", 1,
                        "--grid", 16, 16, 8, "--out", d / "bw.csv"], capsys)
    res = json.loads(out)
    assert code == 0 and res["eps_star"] > 0 and res["delta_star"] > 0
    assert (d / "bw.csv").read_text().splitlines()[0] == "x,y,t,eps,delta"
    code, out, _ = run(["ise", "--estimate", d / "truth.bin", "--reference", d / "truth.bin"], capsys)
    assert code == 0 and json.loads(out)["ise"] == 0


def test_bench_bins(tmp_path, capsys):
    code, out, _ = run(["bench-bins", "--n-patterns", 1, "--mu", 100, "--xi", 0.5, 0.25,
                        "--grid", 16, 16, 8, "--out", tmp_path / "r.csv"], capsys)
    assert code == 0 and json.loads(out)["records"] == 2


def test_project(tmp_path, capsys):
    (tmp_path / "ll.csv").write_text("lon,lat,t\n-96,23,0.5\n-100,40,0.25\n")
    code, _, _ = run(["project", "--in", tmp_path / "ll.csv", "--parallels", 29.5, 45.5, "--origin", 23, -96,
                      "--out", tmp_path / "xy.csv"], capsys)
    lines = (tmp_path / "xy.csv").read_text().splitlines()
    assert code == 0 and lines[0] == "x,y,t" and lines[1] == "0.0,0.0,0.5"


@pytest.mark.parametrize("argv", [
    ["frobnicate"],
    ["estimate", "--out", "x.bin"],
    ["simulate", "--set", "7", "--out", "x.csv"],
    ["ise", "--estimate", "missing.bin", "--reference", "missing.bin"],
    ["project", "--in", "x.csv", "--parallels", "30", "-30", "--origin", "0", "0", "--out", "y.csv"],
])
def test_errors_are_json_and_nonzero(argv, capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "x.csv").write_text("lon,lat\n0,10\n")
    code, _, err = run(argv, capsys)
    assert code != 0
    assert {"error", "message"} <= set(json.loads(err))


def test_strict_drops(simulated, capsys):
    d = simulated
    text = (d / "p.csv").read_text() + "5.0,5.0,0.5\n"
    (d / "p2.csv").write_text(text)
    args = ["estimate", "--points", d / "p2.csv", "--polygon", d / "w.csv", "--t0", 0, "--t1", 1,
            "--grid", 16, 16, 8, "--method", "fixed", "--out", d / "s.bin"]
    code, _, err = run(args, capsys)
    assert code == 0 and json.loads(err.strip().splitlines()[-1])["count"] == 1
    code, _, err = run(args + ["--strict"], capsys)
    assert code == 1 and "outside" in json.loads(err)["message"]


def test_module_entry_point():
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "stadapt", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "estimate" in r.stdout
