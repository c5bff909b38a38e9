import csv
import json
import subprocess
import sys

import pytest

from shallowsep.cli import BASELINE_COLUMNS, SWEEP_COLUMNS, run


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_sample(tmp_path):
    assert run(["sample", "--d", "2", "--trials", "1000", "--seed", "7", "--out-dir", str(tmp_path)]) == 0
    (row,) = rows(tmp_path / "sample.csv")
    assert row["verified"] == "1000" and float(row["success"]) == 1.0 and row["seed"] == "7"
    lines = (tmp_path / "samples.txt").read_text().split()
    assert len(lines) == 1000 and all(len(x) == 256 for x in lines)
    manifest = json.loads((tmp_path / "sample.manifest.json").read_text())
    assert manifest["command"] == "sample" and manifest["parameters"]["trials"] == 1000
    assert manifest["exit_code"] == 0 and "wall_ms" in manifest and "started" in manifest


def test_sample_product(tmp_path):
    assert run(["sample", "--t", "3", "--trials", "20", "--out-dir", str(tmp_path)]) == 0
    assert all(len(x) == 3 * 256 for x in (tmp_path / "samples.txt").read_text().split())


def test_sweep_deterministic_across_runs_and_workers(tmp_path):
    args = ["sweep-noise", "--d", "2", "--p", "0.005,0.01,0.02,0.04", "--trials", "300", "--seed", "7"]
    assert run(args + ["--out-dir", str(tmp_path / "a")]) == 0
    assert run(args + ["--out-dir", str(tmp_path / "b")]) == 0
    assert run(args + ["--out-dir", str(tmp_path / "c"), "--workers", "3"]) == 0
    a = (tmp_path / "a" / "sweep-noise.csv").read_bytes()
    assert a == (tmp_path / "b" / "sweep-noise.csv").read_bytes() == (tmp_path / "c" / "sweep-noise.csv").read_bytes()
    got = rows(tmp_path / "a" / "sweep-noise.csv")
    assert list(got[0]) == SWEEP_COLUMNS and len(got) == 4
    means = [float(r["mean_success"]) for r in got]
    assert means == sorted(means, reverse=True)


def test_sweep_row_reproducible_in_isolation(tmp_path):
    assert run(["sweep-noise", "--p", "0.01,0.02", "--trials", "200", "--out-dir", str(tmp_path / "a")]) == 0
    assert run(["sweep-noise", "--p", "0.02", "--trials", "200", "--out-dir", str(tmp_path / "b")]) == 0
    assert rows(tmp_path / "a" / "sweep-noise.csv")[1] == rows(tmp_path / "b" / "sweep-noise.csv")[0]


def test_wall_time_column(tmp_path):
    assert run(["sweep-noise", "--p", "0.01", "--trials", "50", "--record-wall-time", "--out-dir", str(tmp_path)]) == 0
    assert float(rows(tmp_path / "sweep-noise.csv")[0]["wall_ms"]) > 0


def test_bound_check(tmp_path):
    assert run(["bound-check", "--d", "2", "--p", "0.3", "--trials", "2000", "--out-dir", str(tmp_path)]) == 0
    got = rows(tmp_path / "bound-check.csv")
    checks = {r["check"].split(":")[0] for r in got}
    assert checks == {"theorem2", "fault_free_floor", "cycle"}
    assert all(r["holds"] == "true" for r in got)


def test_baselines(tmp_path):
    assert run(["baseline-guess", "--out-dir", str(tmp_path)]) == 0
    (g,) = rows(tmp_path / "baseline-guess.csv")
    assert list(g) == BASELINE_COLUMNS and g["b"] == ""
    assert run(["baseline-block", "--block-side", "2,4,8", "--trials", "100", "--out-dir", str(tmp_path)]) == 0
    got = rows(tmp_path / "baseline-block.csv")
    assert [r["b"] for r in got] == ["2", "4", "8"]
    assert float(got[-1]["mean_success"]) == 1.0 and got[-1]["affected_count"] == "0"


def test_gen(tmp_path):
    from shallowsep.relation import RelationInstance

    assert run(["gen", "--t", "2", "--epsilon", "1", "--out-dir", str(tmp_path)]) == 0
    inst = RelationInstance.from_json((tmp_path / "instance_1.json").read_text())
    assert inst.grid.d == 2
    manifest = json.loads((tmp_path / "gen.manifest.json").read_text())
    assert manifest["amplification"]["l"] == 1.0


def test_oracle_crosscheck(tmp_path):
    assert run(["oracle-crosscheck", "--trials", "40", "--out-dir", str(tmp_path)]) == 0
    got = rows(tmp_path / "oracle-crosscheck.csv")
    assert {r["kind"] for r in got} == {"clifford", "graph_state", "quantum_input"}
    assert all(r["ok"] == "true" for r in got)


@pytest.mark.parametrize(
    "argv",
    [
        ["sweep-noise", "--p", "0.9"],
        ["sweep-noise", "--p", "abc"],
        ["sample", "--d", "3"],
        ["sample", "--trials", "0"],
        ["sample", "--noise-idle", "maybe"],
        ["gen", "--epsilon", "2"],
        ["bogus"],
        [],
    ],
)
def test_invalid_flags(argv, tmp_path):
    assert run(argv + ["--out-dir", str(tmp_path)] if argv else argv) == 1


def test_verification_failure_exit_code(tmp_path, monkeypatch):
    import shallowsep.cli as cli

    def failing(a):
        return cli.EXIT_VERIFY, ["x"], [{"x": 1}], {}

    monkeypatch.setitem(cli.COMMANDS, "sample", failing)
    assert run(["sample", "--out-dir", str(tmp_path)]) == 2


def test_resource_exit_code(tmp_path, monkeypatch):
    import shallowsep.cli as cli

    def hungry(a):
        raise MemoryError("too big")

    monkeypatch.setitem(cli.COMMANDS, "sample", hungry)
    assert run(["sample", "--out-dir", str(tmp_path)]) == 3


def test_module_entry_point(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "shallowsep", "baseline-guess", "--out-dir", str(tmp_path)], capture_output=True
    )
    assert out.returncode == 0 and (tmp_path / "baseline-guess.csv").exists()
