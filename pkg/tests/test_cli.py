import json

from chance_rrt.cli import main


def test_run_writes_reports(tmp_path, capsys):
    assert main(["run", "--scenario", "empty_road", "--trials", "1", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "metrics.csv").exists() and (tmp_path / "pu_seed0.svg").exists()
    assert "wrote" in capsys.readouterr().out


def test_compare_modes(tmp_path):
    assert main(["compare", "--scenario", "empty_road", "--modes", "pu,cl", "--trials", "1", "--no-svg",
                 "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "metrics.csv").read_text().splitlines()
    assert [r.split(",")[0] for r in rows[1:]] == ["pu", "cl"]
    assert not list(tmp_path.glob("*.svg"))


def test_scenario_error_exit_1(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"name": "x", "lanes": {}, "ego": {"x": 0, "y": 1}, "goal": {"x": 1, "y": 1},
                               "extra": 1}))
    assert main(["run", "--scenario", str(bad), "--out", str(tmp_path / "o")]) == 1


def test_missing_file_exit_2(tmp_path):
    assert main(["run", "--scenario", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2


def test_unwritable_out_exit_2(tmp_path):
    blocker = tmp_path / "f"
    blocker.write_text("")
    assert main(["run", "--scenario", "empty_road", "--trials", "1", "--out", str(blocker / "x")]) == 2


def test_sense_sweep(tmp_path):
    prof = tmp_path / "p.json"
    prof.write_text("{}")
    assert main(["sense-sweep", "--profile", str(prof), "--out", str(tmp_path), "--distances", "10,20",
                 "--azimuths", "0,30", "--frames", "5"]) == 0
    rows = (tmp_path / "sense_sweep.csv").read_text().splitlines()
    assert rows[0].startswith("distance_m,azimuth_rad,var_x") and len(rows) == 5
