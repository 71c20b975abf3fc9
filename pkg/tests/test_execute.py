from dataclasses import replace

import numpy as np

from chance_rrt.execute import Status, execute
from chance_rrt.planner import Mode
from chance_rrt.scenario import GoalSpec, load_scenario


def test_start_in_goal_returns_immediately():
    sc = load_scenario("empty_road")
    sc = replace(sc, goal=GoalSpec(sc.ego.x + 0.5, sc.ego.y, 2.0))
    tr = execute(sc, Mode.PU)
    assert tr.status is Status.GOAL_REACHED
    assert tr.cycles == [] and tr.length == 0.0


def test_empty_road_reaches_goal():
    sc = load_scenario("empty_road")
    tr = execute(sc, Mode.PU, seed=0)
    assert tr.status is Status.GOAL_REACHED and not tr.deadlock
    straight = sc.goal.x - sc.ego.x
    assert tr.length >= straight - sc.goal.radius
    assert tr.collisions == 0 and tr.cc_violations == 0
    assert len(tr.step_risk) == len(tr.states) - 1


def test_wall_times_out_without_collision():
    sc = load_scenario("wall")
    for mode in (Mode.PU, Mode.CC):
        for seed in range(3):
            tr = execute(sc, mode, seed=seed)
            assert tr.status is Status.TIMEOUT
            assert tr.collisions == 0 and tr.deadlock
            assert max(s[0] for s in tr.states) < 30.0


def test_wall_never_reached_past_by_cl():
    tr = execute(load_scenario("wall"), Mode.CL, seed=1)
    assert tr.status is not Status.GOAL_REACHED


def test_execution_is_deterministic():
    sc = load_scenario("lane_change")
    a, b = execute(sc, Mode.PU, seed=4), execute(sc, Mode.PU, seed=4)
    assert a.status == b.status
    assert np.array_equal(np.array(a.states), np.array(b.states))
    assert a.to_records() == b.to_records()


def test_tree_callback_sees_every_cycle():
    sc = load_scenario("empty_road")
    seen = []
    tr = execute(sc, Mode.PU, seed=0, on_tree=lambda c, tree: seen.append((c, len(tree))))
    assert [c for c, _ in seen] == list(range(len(tr.cycles)))
    assert all(n >= 1 for _, n in seen)
