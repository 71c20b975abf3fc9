"""Receding-horizon execution of the planner in the simulated scenario."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from .dynamics import ControlInput, EgoState, MotionConfig, StateBelief, brake_trajectory, polygon_arrays, propagate_covariance, step
from .errors import DomainError
from .geometry import box_corners, boxes_overlap
from .perception import GroundTruthObstacle, SensorNoiseProfile, sense
from .planner import Mode, PlanTree, PlannerConfig, baseline_mode_transform, expand_tree, select_path
from .risk import ObstacleField, RiskConfig, batch_risk
from .scenario import ScenarioConfig
from .spatial import ObstacleBelief, filter_misdetections, make_obstacle_belief
from .uncertainty import fuse_samples


class Status(str, Enum):
    GOAL_REACHED = "GoalReached"
    COLLISION = "Collision"
    TIMEOUT = "Timeout"


@dataclass
class BeliefSnapshot:
    x: float
    y: float
    heading: float
    half_length: float
    half_width: float
    semi_axis_lon: float
    semi_axis_lat: float
    pe: float
    mi: float
    source_id: Optional[str]

    @classmethod
    def of(cls, ob: ObstacleBelief) -> "BeliefSnapshot":
        return cls(ob.center[0], ob.center[1], ob.heading, ob.half_length, ob.half_width,
                   ob.semi_axis_lon, ob.semi_axis_lat, ob.pe, ob.mi, ob.source_id)


@dataclass
class CycleRecord:
    cycle: int
    time: float
    ego: tuple[float, float, float, float]
    n_detections: int
    n_kept: int
    n_rejected: int
    n_clutter_kept: int
    n_true_rejected: int
    tree_size: int
    n_goal_paths: int
    iterations: int
    goal_path: bool
    executed_steps: int
    waypoints: int
    max_risk: float
    beliefs: list[BeliefSnapshot] = field(default_factory=list)


@dataclass
class RunTrace:
    mode: str
    seed: int
    status: Status = Status.TIMEOUT
    states: list[tuple[float, float, float, float]] = field(default_factory=list)
    step_risk: list[float] = field(default_factory=list)
    cycles: list[CycleRecord] = field(default_factory=list)
    deadlock: bool = False
    cc_violations: int = 0
    collisions: int = 0

    @property
    def length(self) -> float:
        if len(self.states) < 2:
            return 0.0
        xy = np.array([s[:2] for s in self.states])
        return float(np.sum(np.hypot(*np.diff(xy, axis=0).T)))

    @property
    def n_waypoints(self) -> int:
        return sum(c.waypoints for c in self.cycles)

    def to_records(self) -> list[dict]:
        out = []
        for c in self.cycles:
            rec = asdict(c)
            rec.update(mode=self.mode, seed=self.seed)
            out.append(rec)
        return out


def perceive(
    ego: EgoState,
    truth: Sequence[GroundTruthObstacle],
    profile: SensorNoiseProfile,
    seed,
    pe_max: float,
    mi_max: float,
) -> tuple[list[ObstacleBelief], list[ObstacleBelief], int]:
    """Sense, fuse and filter one frame: ``(kept, rejected, n_detections)``.

    Detections whose yaw spread is too wide to build a belief are dropped as
    suspect without an ObstacleBelief.
    """
    detections = sense(ego, truth, profile, seed)
    beliefs = []
    for det in detections:
        try:
            beliefs.append(make_obstacle_belief(fuse_samples(det.samples), det.velocity, det.truth_id))
        except DomainError:
            continue
    kept, rejected = filter_misdetections(beliefs, pe_max, mi_max)
    return kept, rejected, len(detections)


def _path_controls(tree: PlanTree, path: list[int]) -> tuple[np.ndarray, list[int]]:
    """Concatenated controls along ``path`` and the cumulative step count at each node."""
    chunks = []
    ends = []
    total = 0
    for nid in path[1:]:
        traj = tree.nodes[nid].trajectory
        chunks.append(traj.controls)
        total += len(traj)
        ends.append(total)
    controls = np.vstack(chunks) if chunks else np.empty((0, 2))
    return controls, ends


def _collides(state: EgoState, motion: MotionConfig, truth: Sequence[GroundTruthObstacle]) -> bool:
    ego = None
    reach = 0.5 * math.hypot(motion.ego_length, motion.ego_width)
    for ob in truth:
        if math.hypot(ob.x - state.x, ob.y - state.y) > reach + 0.5 * math.hypot(ob.l, ob.w):
            continue
        if ego is None:
            ego = box_corners(state.x, state.y, state.heading, motion.ego_length / 2, motion.ego_width / 2)
        if boxes_overlap(ego, box_corners(ob.x, ob.y, ob.heading, ob.l / 2, ob.w / 2)):
            return True
    return False


def _remaining_waypoints(tree: PlanTree, path: list[int], ends: list[int], executed: int,
                         spacing: float, start: EgoState) -> list[tuple[float, float]]:
    """Positions of not-yet-reached path nodes, thinned to about ``spacing`` metres."""
    if spacing <= 0:
        return []
    out: list[tuple[float, float]] = []
    last = start.position
    ahead = [nid for nid, end in zip(path[1:], ends) if end > executed]
    for i, nid in enumerate(ahead):
        p = tree.nodes[nid].position
        final = i == len(ahead) - 1
        if final or math.hypot(p[0] - last[0], p[1] - last[1]) >= spacing:
            out.append(p)
            last = p
    return out


def _noise_factor(cov: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(cov)
    return v * np.sqrt(np.clip(w, 0.0, None))


def execute(
    scenario: ScenarioConfig,
    mode: Optional[Mode] = None,
    seed: Optional[int] = None,
    planner_cfg: Optional[PlannerConfig] = None,
    motion: Optional[MotionConfig] = None,
    risk_cfg: Optional[RiskConfig] = None,
    on_tree: Optional[Callable[[int, PlanTree], None]] = None,
) -> RunTrace:
    """Plan-and-act loop until the goal is reached, a collision occurs or time runs out.

    Every cycle re-senses, re-initialises the tree at the current belief,
    expands it, and applies the first ``horizon`` seconds of the selected path
    with process noise injected. Step risk is always scored with the full
    perception beliefs, whatever the planner mode saw. ``on_tree(cycle, tree)``
    is called after every expansion.
    """
    cfg = planner_cfg or scenario.planner
    if mode is not None:
        cfg = replace(cfg, mode=Mode(mode))
    motion = motion or scenario.motion
    risk_cfg = risk_cfg or RiskConfig(p_safe=cfg.p_safe)
    seed = scenario.base_seed if seed is None else seed

    root_seq = np.random.SeedSequence(seed)
    plan_seq, motion_seq = root_seq.spawn(2)
    plan_rng = np.random.default_rng(plan_seq)
    motion_rng = np.random.default_rng(motion_seq)
    noise_factor = _noise_factor(motion.process_noise_matrix)
    A, Q = motion.transition_matrix, motion.process_noise_matrix
    sigma0 = motion.initial_cov_matrix
    dt = motion.dt
    steps_per_cycle = max(1, int(round(cfg.horizon / dt)))
    bounds = scenario.lanes.bounds
    goal = (scenario.goal.x, scenario.goal.y)
    delta = risk_cfg.delta

    e = scenario.ego
    state = EgoState(e.x, e.y, e.heading, e.speed)
    trace = RunTrace(mode=Mode(cfg.mode).value, seed=seed)
    trace.states.append((state.x, state.y, state.heading, state.speed))

    def in_goal(s: EgoState) -> bool:
        return math.hypot(s.x - goal[0], s.y - goal[1]) <= scenario.goal.radius

    if in_goal(state):
        trace.status = Status.GOAL_REACHED
        return trace

    t = 0.0
    cycle = 0
    warm: list[tuple[float, float]] = []
    while t < scenario.max_time - 1e-9:
        truth_now = [o.at(t) for o in scenario.obstacles]
        kept, rejected, n_det = perceive(state, truth_now, scenario.noise, [seed, cycle, 7], cfg.pe_max, cfg.mi_max)
        planning_obs = baseline_mode_transform(kept, cfg)
        root_cov = np.zeros((2, 2)) if cfg.mode is Mode.CL else sigma0
        tree = PlanTree(StateBelief(state, root_cov), goal, scenario.goal.radius, bounds)
        budget = cfg.expansion_interval if cfg.wall_clock else None
        iterations = expand_tree(tree, planning_obs, cfg, motion, risk_cfg, rng=plan_rng, time_budget=budget,
                                 warm_start=warm)
        if on_tree is not None:
            on_tree(cycle, tree)
        path, reaches = select_path(tree)
        controls, ends = _path_controls(tree, path)
        n_exec = min(steps_per_cycle, len(controls))
        if n_exec == 0:
            trace.deadlock = True
            controls = brake_trajectory(state, motion, steps_per_cycle).controls
            n_exec = steps_per_cycle

        report_field = ObstacleField.from_beliefs(kept)
        cov = sigma0
        cycle_risk = 0.0
        executed = 0
        status = None
        for k in range(n_exec):
            prev = state
            state = step(state, ControlInput(float(controls[k, 0]), float(controls[k, 1])), motion)
            gx, gy = noise_factor @ motion_rng.standard_normal(2)
            # a parked vehicle does not drift
            if prev.speed > 0 or state.speed > 0:
                state = EgoState(float(state.x + gx), float(state.y + gy), state.heading, state.speed)
            cov = propagate_covariance(cov, A, Q)
            normals, offsets = polygon_arrays(np.array([state.x]), np.array([state.y]), np.array([state.heading]), motion)
            risk = float(batch_risk(normals, offsets, cov[None], report_field, np.array([(k + 1) * dt]), risk_cfg)[0])
            executed += 1
            trace.states.append((state.x, state.y, state.heading, state.speed))
            trace.step_risk.append(risk)
            cycle_risk = max(cycle_risk, risk)
            if risk >= delta:
                trace.cc_violations += 1
            if _collides(state, motion, [o.at(t + (k + 1) * dt) for o in scenario.obstacles]):
                trace.collisions += 1
                status = Status.COLLISION
                break
            if in_goal(state):
                status = Status.GOAL_REACHED
                break

        trace.cycles.append(CycleRecord(
            cycle=cycle,
            time=t,
            ego=trace.states[-executed - 1],
            n_detections=n_det,
            n_kept=len(kept),
            n_rejected=len(rejected),
            n_clutter_kept=sum(1 for o in kept if o.source_id is None),
            n_true_rejected=sum(1 for o in rejected if o.source_id is not None),
            tree_size=len(tree),
            n_goal_paths=len(tree.paths),
            iterations=iterations,
            goal_path=reaches,
            executed_steps=executed,
            waypoints=sum(1 for end in ends if end <= executed),
            max_risk=cycle_risk,
            beliefs=[BeliefSnapshot.of(o) for o in kept],
        ))
        warm = _remaining_waypoints(tree, path, ends, executed, cfg.warm_start_spacing, state) if reaches else []
        t += executed * dt
        cycle += 1
        if status is not None:
            trace.status = status
            return trace
    trace.status = Status.TIMEOUT
    return trace
