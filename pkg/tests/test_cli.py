import csv
import json

import numpy as np
import pytest

from alphamod import cli
from alphamod.grid import Grid, load_gridfunction, random_bandlimited, save_gridfunction


def run_main(capsys, argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_regions_flags_and_config_agree(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    code, _, _ = run_main(capsys, ["regions", "--beta", "3/2", "--resolution", "11", "--out", a])
    assert code == 0
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"command": "regions", "beta": "3/2", "resolution": 11,
                                "out": str(b)}))
    code, _, _ = run_main(capsys, ["--config", conf])
    assert code == 0
    assert a.read_bytes() == b.read_bytes()
    rows = read_csv(a)
    assert len(rows) == 1 + 11 * 11


def test_unknown_config_key_rejected(tmp_path, capsys):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"command": "regions", "betta": 2, "out": "x.csv"}))
    code, _, err = run_main(capsys, ["--config", conf])
    assert code == 1 and "betta" in err


def test_config_and_command_are_exclusive(tmp_path, capsys):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"command": "regions", "out": "x.csv"}))
    code, _, _ = run_main(capsys, ["--config", conf, "regions", "--out", "y.csv"])
    assert code == 1


def test_wave_case_rejected(tmp_path, capsys):
    code, _, err = run_main(capsys, ["regions", "--beta", "1", "--out", tmp_path / "r.csv"])
    assert code == 1 and "beta=1 excluded" in err
    assert not (tmp_path / "r.csv").exists()
    code, _, err = run_main(capsys, ["sweep", "--beta", "1", "--out", tmp_path / "s.csv"])
    assert code == 1 and "wave" in err


@pytest.mark.parametrize("argv", [
    ["bapu", "--N", "100"],
    ["bapu", "--alpha", "1.5"],
    ["norm", "--p", "0.5", "--out", "x.csv"],
    ["regions", "--resolution", "5", "--out", "x.csv"],
    ["sweep", "--lambdas", "4,8,16", "--out", "x.csv"],
    ["sweep", "--lambdas", "4,8,8,16", "--out", "x.csv"],
    ["nls4", "--dt", "0.03", "--T", "0.1"],
    ["verify", "--checks", "11"],
    ["frobnicate"],
    [],
])
def test_config_errors_exit_one(argv, capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code, _, err = run_main(capsys, argv)
    assert code == 1 and "error" in err
    assert not list(tmp_path.iterdir())


def test_bapu_outputs_and_manifest(tmp_path, capsys):
    j, b, m = tmp_path / "b.json", tmp_path / "b.bin", tmp_path / "m.json"
    code, out, _ = run_main(capsys, ["bapu", "--alpha", "0.5", "--N", "128", "--L", "64",
                                     "--out-json", j, "--out-bin", b, "--manifest", m])
    assert code == 0
    meta = json.loads(j.read_text())
    data = np.frombuffer(b.read_bytes(), dtype="<f8").reshape(len(meta["indices"]), 128)
    assert np.abs(data.sum(axis=0) - 1).max() < 1e-12
    man = json.loads(m.read_text())
    assert man == json.loads(out)
    assert set(man["outputs"]) == {str(j), str(b)}
    assert set(man["versions"]) >= {"numpy", "scipy", "alphamod"}


def test_runs_are_deterministic(tmp_path, capsys):
    hashes = []
    for _ in range(2):
        code, out, _ = run_main(capsys, ["norm", "--seed", "7", "--p", "4", "--q", "inf",
                                         "--s", "0.5", "--alpha", "0.5",
                                         "--out", tmp_path / "n.csv"])
        assert code == 0
        hashes.append(json.loads(out)["outputs"])
    assert hashes[0] == hashes[1]
    rows = read_csv(tmp_path / "n.csv")
    assert [r[5] for r in rows[1:]] == ["lp", "plancherel_l2", "sobolev", "alpha_modulation"]


def test_seed_changes_random_data(tmp_path, capsys):
    outs = []
    for seed in (1, 2):
        _, out, _ = run_main(capsys, ["norm", "--seed", seed, "--out", tmp_path / f"{seed}.csv"])
        outs.append(json.loads(out)["outputs"][str(tmp_path / f"{seed}.csv")])
    assert outs[0] != outs[1]


def test_propagate_roundtrip(tmp_path, capsys):
    g = Grid(1, 128, 32.0)
    f = random_bandlimited(g, np.random.default_rng(3))
    save_gridfunction(f, tmp_path / "f.bin")
    code, _, _ = run_main(capsys, ["propagate", "--input", tmp_path / "f.bin", "--beta", "4",
                                   "--t", "0.3", "--out", tmp_path / "g.bin"])
    assert code == 0
    code, _, _ = run_main(capsys, ["propagate", "--input", tmp_path / "g.bin", "--beta", "4",
                                   "--t", "-0.3", "--out", tmp_path / "h.bin"])
    h = load_gridfunction(tmp_path / "h.bin")
    assert np.abs(h.samples - f.samples).max() < 1e-12


def test_sweep_writes_rows_and_report(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code, _, _ = run_main(capsys, ["sweep", "--family", "modulated_bump", "--beta", "1/2",
                                   "--p", "4", "--q", "2", "--s", "0",
                                   "--lambdas", "4,8,16,32", "--out", out])
    rows = read_csv(out)
    assert len(rows) == 1 + 4
    rep = json.loads(out.with_suffix(".json").read_text())
    assert set(rep["fit"]) == {"lhs", "rhs", "ratio"}
    assert len(rep["residuals"]) == 4
    assert rep["theory"]["family_bound"]["value"] == 0.0
    assert code == (0 if rep["passed"] else 3)
    assert rep["passed"]


def test_sweep_off_canonical_alpha_skips_family_check(tmp_path, capsys):
    # the family bounds are stated at the canonical alpha only
    out = tmp_path / "s.csv"
    code, _, _ = run_main(capsys, ["sweep", "--family", "modulated_bump", "--beta", "1/2",
                                   "--p", "4", "--q", "2", "--s", "-2", "--alpha", "0.5",
                                   "--lambdas", "4,8,16,32", "--out", out])
    rep = json.loads(out.with_suffix(".json").read_text())
    assert "matches_family_bound" not in rep["checks"]
    assert code == (0 if rep["passed"] else 3)


def test_numeric_failure_leaves_no_outputs(tmp_path, capsys):
    rep, traj = tmp_path / "e.csv", tmp_path / "u.bin"
    code, _, err = run_main(capsys, ["nls4", "--N", "64", "--L", "20", "--amplitude", "20",
                                     "--scheme", "picard", "--dt", "0.01", "--T", "1.0",
                                     "--report", rep, "--out", traj])
    assert code == 2 and "numerical failure" in err
    assert not rep.exists() and not traj.exists()


def test_nls4_report(tmp_path, capsys):
    rep = tmp_path / "e.csv"
    code, out, _ = run_main(capsys, ["nls4", "--N", "256", "--L", "40", "--dt", "0.001",
                                     "--T", "0.05", "--report", rep])
    assert code == 0
    rows = read_csv(rep)
    assert rows[0][-1] == "monitored_quantity" and len(rows) == 1 + 51
    summary = json.loads(out)["summary"]
    assert summary["mass_drift"] < 1e-10 and summary["gronwall"]["passed"]


def test_staged_commit_rolls_back(tmp_path):
    st = cli._Staged()
    st.text(tmp_path / "a.txt", "a")
    st.text(tmp_path / "missing" / "deeper" / "\0bad", "b")
    with pytest.raises(Exception):
        st.commit()
    assert not (tmp_path / "a.txt").exists()


def test_verify_subset(tmp_path, capsys):
    out = tmp_path / "v.json"
    code, _, err = run_main(capsys, ["verify", "--checks", "2", "--out", out])
    assert code == 0
    assert "[PASS] criterion 2" in err
    assert json.loads(out.read_text())[0]["number"] == 2
