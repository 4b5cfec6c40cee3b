import json

import pytest

from redsched.cli import EXIT_ERROR, EXIT_OK, EXIT_VERIFY, derive_seed, main

SMALL = ["--machines", "10", "--horizon", "300", "--lambda", "0.2"]


def files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_simulate_writes_metrics(tmp_path, capsys):
    assert main(["simulate", *SMALL, "--seed", "4", "--out", str(tmp_path)]) == EXIT_OK
    names = set(files(tmp_path))
    assert "summary.json" in names
    assert f"SRPT_R_0.2_{derive_seed(4, 0)}.metrics.json" in names
    assert "avg_flowtime" in capsys.readouterr().out


def test_replications_use_distinct_seeds(tmp_path):
    assert main(["simulate", *SMALL, "--replications", "3", "--out", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "summary.json").read_text())
    seeds = [r["seed"] for r in doc["runs"]]
    assert seeds == [derive_seed(0, i) for i in range(3)]
    assert len(set(seeds)) == 3


def test_simulate_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["simulate", *SMALL, "--policy", "FAIR_R", "--seed", "9", "--write-trace",
                     "--out", str(d)]) == EXIT_OK
    assert files(a) == files(b)


def test_sweep_manifest(tmp_path):
    argv = ["sweep", *SMALL, "--policy", "LAPS_R", "--sweep", "beta=0.3,0.6",
            "--sweep", "arrival_rate=0.1,0.2", "--out", str(tmp_path)]
    assert main(argv) == EXIT_OK
    doc = json.loads((tmp_path / "manifest.json").read_text())
    assert len(doc["runs"]) == 4 and len(doc["summary"]) == 4
    assert {(s["beta"], s["arrival_rate"]) for s in doc["summary"]} == {
        (0.3, 0.1), (0.3, 0.2), (0.6, 0.1), (0.6, 0.2)}


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "exp.toml"
    cfg.write_text('replications = 1\n[sim_config]\nM = 5\nhorizon = 200\npolicy = "SRPT"\n'
                   '[workload_params]\narrival_rate = 0.1\n')
    out = tmp_path / "o"
    assert main(["simulate", "--config", str(cfg), "--policy", "FAIR", "--out", str(out)]) == EXIT_OK
    run = json.loads((out / "summary.json").read_text())["runs"][0]
    assert run["policy"] == "FAIR"
    m = json.loads((out / f"{run['name']}.metrics.json").read_text())
    assert m["config"]["M"] == 5


@pytest.mark.parametrize("body,field", [("[sim_config]\nMM = 3\n", "sim_config.MM"),
                                        ("bogus = 1\n", "config.bogus"),
                                        ("replications = 0\n", "replications")])
def test_invalid_config_exits_1(tmp_path, capsys, body, field):
    cfg = tmp_path / "bad.toml"
    cfg.write_text(body)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_ERROR
    assert field in capsys.readouterr().err


def test_laps_without_beta_exits_1(tmp_path, capsys):
    assert main(["simulate", *SMALL, "--policy", "LAPS_R", "--out", str(tmp_path)]) == EXIT_ERROR
    assert "beta" in capsys.readouterr().err


def test_missing_trace_file_exits_1(tmp_path):
    assert main(["simulate", "--trace", str(tmp_path / "none.csv"), "--out", str(tmp_path)]) == EXIT_ERROR


def test_verify_eq14(tmp_path):
    assert main(["verify", "eq14", "--out", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "verify_eq14.json").read_text())
    assert all(c["passed"] for c in doc["checks"])


def test_verify_speedup_unit_model(tmp_path):
    assert main(["verify", "speedup", "--model", "unit", "--replications", "20",
                 "--out", str(tmp_path)]) == EXIT_OK


def test_verify_corrupted_alpha_exits_2(tmp_path, capsys):
    argv = ["verify", "srpt-dual", "--instances", "5", "--corrupt-alpha", "--out", str(tmp_path)]
    assert main(argv) == EXIT_VERIFY
    out = capsys.readouterr().out
    assert "FAIL" in out and "job=" in out and "t=" in out
    assert main(["verify", "srpt-dual", "--instances", "5", "--out", str(tmp_path)]) == EXIT_OK


def test_speedup_table_command(tmp_path):
    argv = ["speedup-table", "--max-r", "3", "--times", "1,5", "--replications", "50",
            "--model", "unit", "--out", str(tmp_path)]
    assert main(argv) == EXIT_OK
    assert len((tmp_path / "speedup_table.csv").read_text().splitlines()) == 7


def test_derive_seed_injective():
    seen = {derive_seed(m, r) for m in range(60) for r in range(60)}
    assert len(seen) == 3600
