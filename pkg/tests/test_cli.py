import json

import numpy as np
import pytest

from rpisynth import cli, io
from rpisynth.polyhedra import hull_volume
from rpisynth.report import TABLE_COLUMNS


def fx(name):
    return str(io.fixture_path(name))


def test_certify_published_design_loose_tolerance(capsys):
    code = cli.main(["certify", fx("example2.json"), fx("example2_solution.json"), "--tol", "1e-2"])
    out = capsys.readouterr().out
    assert code == cli.EXIT_OK
    assert "verdict: certified" in out
    assert "lambda* = 0.99892" in out


def test_certify_published_design_tight_tolerance_names_condition(capsys):
    code = cli.main(["certify", fx("example2.json"), fx("example2_solution.json"), "--tol", "1e-9"])
    out = capsys.readouterr().out
    assert code == cli.EXIT_UNCERTIFIED
    assert "worst violation" in out
    assert "violated: inner" in out
    assert "NOT certified" in out


def test_corrupted_gains_fail_certification(tmp_path, capsys):
    doc = json.loads(io.fixture_path("example1_lti_theta1_solution.json").read_text())
    doc["gains"]["Khat"] = (10 * np.asarray(doc["gains"]["Khat"], dtype=float) - 1.0).tolist()
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    code = cli.main(["certify", fx("example1_lti.json"), str(bad)])
    out = capsys.readouterr().out
    assert code == cli.EXIT_UNCERTIFIED
    assert "violated:" in out


def test_missing_plant_is_an_input_error(tmp_path, capsys):
    doc = json.loads(io.fixture_path("example1_lti.json").read_text())
    del doc["plant"]
    path = tmp_path / "p.json"
    path.write_text(json.dumps(doc))
    code = cli.main(["certify", str(path), fx("example1_lti_theta1_solution.json")])
    assert code == cli.EXIT_USAGE
    assert "/plant" in capsys.readouterr().err


def test_solution_for_wrong_problem_is_rejected(capsys):
    code = cli.main(["certify", fx("example2.json"), fx("example1_lti_theta1_solution.json")])
    assert code == cli.EXIT_USAGE
    assert "/gains" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["simulate", "p.json", "s.json", "--out", "o", "--rollouts", "0"],
    ["simulate", "p.json", "s.json", "--out", "o", "--horizon", "-3"],
    ["simulate", "p.json", "s.json", "--out", "o", "--scenario", "chaos"],
    ["design", "p.json"],
    [],
])
def test_bad_arguments_exit_with_usage_code(argv):
    with pytest.raises(SystemExit) as info:
        cli.main(argv)
    assert info.value.code == cli.EXIT_USAGE


def test_simulate_writes_trajectories_and_summary(tmp_path, capsys):
    out = tmp_path / "sim"
    code = cli.main(["simulate", fx("example1_lti.json"), fx("example1_lti_theta1_solution.json"),
                     "--out", str(out), "--rollouts", "100", "--horizon", "60", "--seed", "3"])
    capsys.readouterr()
    assert code == cli.EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert summary["certified"] is True
    assert summary["rollouts"] == 100
    assert sum(summary["violations"].values()) == 0
    csvs = sorted(out.glob("rollout_*.csv"))
    assert len(csvs) == 100 and csvs[0].name == "rollout_00.csv"
    rows = csvs[0].read_text().splitlines()
    assert rows[0] == "k,x1,x2,u1,du1,in_inner"
    assert len(rows) == 1 + 61
    assert (out / "lambda_vertices.txt").exists()
    assert (out / "lambda0_projection_x1x2.txt").exists()


def test_report_boundary_polyline_matches_published_area(tmp_path, capsys):
    code = cli.main(["report", fx("example2.json"), fx("example2_solution.json"),
                     "--out", str(tmp_path), "--tol", "1e-2"])
    out = capsys.readouterr().out
    assert code == cli.EXIT_OK
    for col in TABLE_COLUMNS:
        assert col in out
    pts = np.loadtxt(tmp_path / "lambda_projection_x1x2.txt")
    assert hull_volume(pts) == pytest.approx(99.59, rel=0.01)


def test_design_prints_table_and_writes_solution(tmp_path, capsys):
    out = tmp_path / "sol.json"
    code = cli.main(["design", fx("example1_lti.json"), "-o", str(out), "--theta", "1",
                     "--starts", "1", "--seed", "0"])
    text = capsys.readouterr().out
    assert code == cli.EXIT_OK
    assert "J = " in text and "lambda = " in text
    for col in TABLE_COLUMNS:
        assert col in text
    sol = io.load_solution(out)
    assert sol["L"].shape[1] == 3
    assert json.loads(out.read_text())["certification"]["tol"] == 1e-6
