import json
import subprocess
import sys

import numpy as np
import pytest

from klkit import io as kio
from klkit.cli import main


@pytest.fixture(scope="module")
def bm_file(tmp_path_factory):
    p = tmp_path_factory.mktemp("cli") / "bm.json"
    assert main(["decompose", "--kernel", "brownian", "--grid", "128", "--terms", "10", "--out", str(p)]) == 0
    return p


def last_json(capsys):
    return json.loads(capsys.readouterr().out.strip().splitlines()[-1])


def test_decompose_brownian_512(tmp_path, capsys):
    out = tmp_path / "s.json"
    assert main(["decompose", "--kernel", "brownian", "--grid", "512", "--terms", "10", "--out", str(out)]) == 0
    s = kio.load_spectrum(out)
    assert s.lambdas[0] == pytest.approx(0.405285, rel=0.01)
    assert last_json(capsys)["pairs"] == 10


@pytest.mark.parametrize("argv", [
    ["decompose", "--kernel", "exponential", "--ell", "0", "--out", "x.json"],
    ["decompose", "--kernel", "brownian", "--grid", "1", "--out", "x.json"],
    ["decompose", "--kernel", "brownian", "--terms", "0", "--out", "x.json"],
    ["decompose", "--kernel", "matern", "--out", "x.json"],
    ["decompose", "--kernel", "brownian"],
    ["decompose", "--kernel", "brownian", "--a", "-1", "--out", "x.json"],
    ["check"],
    ["frobnicate"],
    ["sample", "--spectrum", "does-not-exist.json"],
])
def test_bad_input_exits_2(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 2


def test_nonconvergence_exits_3(tmp_path):
    argv = ["decompose", "--kernel", "exponential", "--ell", "0.1", "--grid", "64",
            "--max-sweeps", "1", "--tol", "1e-15", "--out", str(tmp_path / "x.json")]
    assert main(argv) == 3


def test_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kernel": "squared-exponential", "ell": 0.3, "grid": 32, "terms": 4,
                               "out": str(tmp_path / "s.json")}))
    assert main(["decompose", "--config", str(cfg)]) == 0
    assert len(kio.load_spectrum(tmp_path / "s.json")) == 4
    # flags override the file
    assert main(["decompose", "--config", str(cfg), "--terms", "2"]) == 0
    assert len(kio.load_spectrum(tmp_path / "s.json")) == 2
    cfg.write_text(json.dumps({"kernel": "brownian", "colour": "blue"}))
    assert main(["decompose", "--config", str(cfg)]) == 2
    cfg.write_text("[1, 2]")
    assert main(["decompose", "--config", str(cfg)]) == 2


def test_check_exit_codes(tmp_path):
    fail = tmp_path / "fail.json"
    good = tmp_path / "pass.json"
    assert main(["counterexample", "--family", "failing", "--out", str(fail)]) == 0
    assert main(["counterexample", "--family", "passing", "--out", str(good)]) == 0
    rep = tmp_path / "r.json"
    assert main(["check", "--spectrum", str(fail), "--out", str(rep), "--csv", str(tmp_path / "r.csv")]) == 1
    doc = json.loads(rep.read_text())
    assert doc["verdict"] == "fail" and abs(doc["witness"]["x"]) <= 0.25
    assert set(doc) >= {"deltas", "moduli", "envelope", "tail_bound", "verdict", "witness"}
    assert main(["check", "--spectrum", str(good), "--depth", "30"]) == 0


def test_check_inconclusive_exits_4(bm_file):
    assert main(["check", "--spectrum", str(bm_file), "--depth", "12"]) == 4


def test_check_missing_pairs_exits_2(tmp_path, bm_file, capsys):
    doc = json.loads(bm_file.read_text())
    del doc["pairs"]
    p = tmp_path / "broken.json"
    p.write_text(json.dumps(doc))
    assert main(["check", "--spectrum", str(p)]) == 2
    assert "pairs" in capsys.readouterr().err


def test_verify_bounds(tmp_path, bm_file, capsys):
    out = tmp_path / "v.json"
    assert main(["verify-bounds", "--spectrum", str(bm_file), "--kernel", "brownian", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["min_necessity_margin"] >= 0
    assert all(g["sup_gap"] == 0 and g["vn_gap"] == 0 for g in doc["gaps"] if g["n"] == g["m"])
    const = tmp_path / "c.json"
    assert main(["counterexample", "--family", "constant", "--grid", "17", "--out", str(const)]) == 0
    assert main(["verify-bounds", "--spectrum", str(const), "--kernel", "constant", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert all(abs(r["margin"]) <= 1e-15 for r in doc["necessity"])
    # the min-kernel is only defined on nonnegative intervals
    shifted = tmp_path / "shift.json"
    assert main(["decompose", "--kernel", "exponential", "--a", "-1", "--grid", "16", "--terms", "3",
                 "--out", str(shifted)]) == 0
    assert main(["verify-bounds", "--spectrum", str(shifted), "--kernel", "brownian"]) == 2


def test_round_trip_gram(tmp_path, capsys):
    s, gram = tmp_path / "s.json", tmp_path / "g.csv"
    assert main(["decompose", "--kernel", "exponential", "--ell", "0.5", "--grid", "96", "--terms", "96",
                 "--out", str(s), "--gram-csv", str(gram)]) == 0
    capsys.readouterr()
    assert main(["synthesize", "--spectrum", str(s), "--reference", str(gram),
                 "--out", str(tmp_path / "k.csv"), "--vn-csv", str(tmp_path / "v.csv"),
                 "--gaps", str(tmp_path / "gaps.json")]) == 0
    summary = last_json(capsys)
    assert summary["max_error"] <= summary["bound"] + 1e-8
    gaps = json.loads((tmp_path / "gaps.json").read_text())
    assert len(gaps) == 20 and all(g["sup_gap"] <= g["vn_gap"] + 1e-12 for g in gaps)


def test_synthesize_flags_error_above_bound(tmp_path):
    s, gram = tmp_path / "s.json", tmp_path / "g.csv"
    assert main(["decompose", "--kernel", "brownian", "--grid", "32", "--terms", "3",
                 "--out", str(s), "--gram-csv", str(gram)]) == 0
    x, m = kio.read_matrix_csv(gram)
    kio.write_matrix_csv(gram, x, m + 0.5)
    assert main(["synthesize", "--spectrum", str(s), "--reference", str(gram)]) == 3


def test_sample_outputs_and_determinism(tmp_path, bm_file, capsys, monkeypatch):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["sample", "--spectrum", str(bm_file), "--paths", "30", "--seed", "7", "--out", str(a)]) == 0
    monkeypatch.setenv("KLKIT_THREADS", "3")
    assert main(["sample", "--spectrum", str(bm_file), "--paths", "30", "--seed", "7", "--out", str(b),
                 "--cov-csv", str(tmp_path / "c.csv"), "--stderr-csv", str(tmp_path / "e.csv")]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0].startswith("x,path_0,")
    assert "fraction_z_above_3" in last_json(capsys)
    assert main(["sample", "--spectrum", str(bm_file), "--seed", "-3"]) == 2


def test_figures_written(tmp_path, bm_file):
    pytest.importorskip("matplotlib")
    figs = {
        "dec.png": ["decompose", "--kernel", "brownian", "--grid", "32", "--terms", "4",
                    "--out", str(tmp_path / "d.json")],
        "syn.png": ["synthesize", "--spectrum", str(bm_file)],
        "chk.png": ["check", "--spectrum", str(bm_file)],
        "ce.png": ["counterexample", "--family", "brownian", "--terms", "5", "--grid", "65",
                   "--out", str(tmp_path / "ce.json")],
        "smp.png": ["sample", "--spectrum", str(bm_file), "--paths", "5"],
    }
    for name, argv in figs.items():
        assert main(argv + ["--figure", str(tmp_path / name)]) in (0, 1, 4)
        assert (tmp_path / name).read_bytes()[:4] == b"\x89PNG"


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "klkit", "counterexample", "--family", "constant",
                        "--out", str(tmp_path / "c.json")], capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["pairs"] == 1
    r = subprocess.run([sys.executable, "-m", "klkit", "decompose", "--kernel", "brownian", "--grid", "1",
                        "--out", str(tmp_path / "x.json")], capture_output=True, text=True)
    assert r.returncode == 2
