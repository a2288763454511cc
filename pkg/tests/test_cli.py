import json

import pytest

from mutloc.cli import main


@pytest.fixture(scope="module")
def instance_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "inst.json"
    assert main(["simulate", "--robots", "2", "--samples", "40", "--sigma", "0", "--seed", "7",
                 "--out", str(path)]) == 0
    return path


def test_simulate_then_solve(instance_file, tmp_path):
    out = tmp_path / "sol.json"
    assert main(["solve", str(instance_file), "--variant", "d", "--out", str(out)]) == 0
    sol = json.loads(out.read_text())
    assert sol["certified"] is True
    assert sol["score"]["permutation_correct"] is True
    assert sol["certificate"]["relative_gap"] <= 1e-5


def test_solve_rejects_bad_rotation(instance_file, tmp_path, capsys):
    doc = json.loads(instance_file.read_text())
    doc["observed"][1]["rotations"][3][4] += 0.01
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["solve", str(bad)]) == 2
    assert "observed[1].rotations[3]" in capsys.readouterr().err


def test_unknown_flag_and_command(capsys):
    assert main(["solve", "--bogus", "x"]) == 2
    assert "usage" in capsys.readouterr().err
    assert main(["frobnicate"]) == 2
    assert main([]) == 2


def test_missing_file():
    assert main(["solve", "/nonexistent/file.json"]) == 2


def test_baseline(instance_file, tmp_path):
    out = tmp_path / "b.json"
    assert main(["baseline", str(instance_file), "--method", "am", "--init", "truth",
                 "--out", str(out)]) == 0
    res = json.loads(out.read_text())
    assert res["final_cost"] <= 1e-10
    assert main(["baseline", str(instance_file), "--method", "lm", "--out", str(out)]) == 0


def test_export_sdpa(instance_file, tmp_path):
    out = tmp_path / "x.dat-s"
    assert main(["export-sdpa", str(instance_file), "--variant", "d", "--out", str(out)]) == 0
    body = [ln for ln in out.read_text().splitlines() if not ln.startswith("*")]
    assert body[2] == "245"


def test_heatmap(instance_file, tmp_path):
    out = tmp_path / "h.csv"
    assert main(["heatmap", str(instance_file), "--grid", "2", "--method", "am",
                 "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 5


def test_benchmark_row_count(tmp_path):
    out = tmp_path / "bench.csv"
    assert main(["benchmark", "--robots", "1..2", "--sigma", "0,0.1", "--trials", "2",
                 "--samples", "9", "--variant", "d", "--methods", "AM,LM", "--omit-timing",
                 "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 1 + 2 * 2 * 2 * 2
    assert main(["benchmark", "--methods", "NOPE"]) == 2


def test_benchmark_is_bit_identical(tmp_path):
    args = ["benchmark", "--robots", "1", "--sigma", "0.1", "--trials", "2", "--samples", "11",
            "--variant", "d", "--methods", "SDP,AM", "--omit-timing"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
