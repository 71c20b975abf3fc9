import json

import pytest

from chance_rrt.errors import ScenarioError
from chance_rrt.scenario import builtin_scenarios, load_profile, load_scenario, scenario_from_dict

BASE = {
    "name": "t",
    "lanes": {"lane_count": 3, "lane_width": 3.5, "length": 60.0},
    "ego": {"x": 5.0, "y": 5.25, "speed": 5.0},
    "goal": {"x": 50.0, "y": 5.25},
}


def with_(**kw):
    data = json.loads(json.dumps(BASE))
    data.update(kw)
    return data


def test_minimal_scenario_defaults():
    sc = scenario_from_dict(BASE)
    assert sc.trials == 1 and sc.obstacles == []
    assert sc.lanes.bounds == (0.0, 60.0, 0.0, 10.5)


def test_unknown_field_names_dotted_path():
    with pytest.raises(ScenarioError) as exc:
        scenario_from_dict(with_(planner={"n_candidates": 5, "bogus": 1}))
    assert exc.value.field == "planner.bogus"
    with pytest.raises(ScenarioError) as exc:
        scenario_from_dict(with_(obstacles=[{"id": "a", "x": 1, "y": 2, "colour": "red"}]))
    assert exc.value.field == "obstacles.0.colour"


def test_wrong_type_names_field():
    with pytest.raises(ScenarioError) as exc:
        scenario_from_dict(with_(ego={"x": "left", "y": 1.0}))
    assert exc.value.field == "ego.x"


def test_goal_outside_road_rejected():
    with pytest.raises(ScenarioError):
        scenario_from_dict(with_(goal={"x": 70.0, "y": 5.25}))
    with pytest.raises(ScenarioError):
        scenario_from_dict(with_(trials=0))


def test_builtins_load():
    names = builtin_scenarios()
    assert {"dense_t1", "dense_t2", "dense_t3", "dense_t4", "lane_change", "empty_road", "wall"} <= set(names)
    for n in names:
        assert load_scenario(n).name == n


def test_file_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ScenarioError):
        load_scenario(bad)
    with pytest.raises(OSError):
        load_scenario(tmp_path / "missing.json")


def test_profile_from_scenario_or_bare(tmp_path):
    p = tmp_path / "p.json"
    p.write_text(json.dumps({"k_dist": 0.02}))
    assert load_profile(p).k_dist == 0.02
    s = tmp_path / "s.json"
    s.write_text(json.dumps(with_(noise={"k_dist": 0.03})))
    assert load_profile(s).k_dist == 0.03
