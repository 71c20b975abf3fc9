"""Chance-constrained closed-loop RRT: tree expansion, cost-to-go bounds and
path selection, with fixed-uncertainty (CC) and uncertainty-blind (CL) modes.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from pydantic import ConfigDict

from .dynamics import EgoState, MotionConfig, StateBelief, Trajectory, brake_trajectory, polygon_arrays, propagate_sequence, steer_to
from .errors import DomainError
from .geometry import wrap_angle
from .risk import ObstacleField, RiskConfig, batch_risk
from .spatial import DEFAULT_MI_MAX, DEFAULT_PE_MAX, ObstacleBelief

Region = tuple[float, float, float, float]  # xmin, xmax, ymin, ymax


class Mode(str, Enum):
    PU = "pu"
    CC = "cc"
    CL = "cl"


@dataclass(frozen=True)
class PlannerConfig:
    __pydantic_config__ = ConfigDict(extra="forbid")

    mode: Mode = Mode.PU
    p_safe: float = 0.99
    k_cc: float = 100.0
    k_dist: float = 1.0
    n_candidates: int = 15
    max_iterations: int = 200
    expansion_interval: float = 3.0
    # wall-clock budgets make runs irreproducible; off unless asked for
    wall_clock: bool = False
    goal_radius: float = 2.0
    sample_region: Optional[Region] = None
    goal_bias: float = 0.05
    cc_fixed_sigma: float = 0.5
    node_interval: float = 0.5
    horizon: float = 1.0
    max_extend_steps: int = 50
    max_connect_steps: int = 150
    max_bearing: float = math.pi / 2
    min_extend_distance: float = 1.0
    connect_every: int = 2
    max_goal_paths: int = 0
    max_nodes: int = 5000
    # spacing of the previous path's waypoints replayed next cycle; 0 disables
    warm_start_spacing: float = 8.0
    pe_max: float = DEFAULT_PE_MAX
    mi_max: float = DEFAULT_MI_MAX
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.n_candidates < 1:
            raise DomainError("n_candidates must be at least 1")
        if self.k_cc < 0 or self.k_dist < 0 or (self.k_cc == 0 and self.k_dist == 0):
            raise DomainError("cost weights must be non-negative and not both zero")
        if not 0 < self.p_safe < 1:
            raise DomainError("p_safe must lie in (0, 1)")
        if self.goal_radius <= 0 or self.node_interval <= 0 or self.horizon <= 0:
            raise DomainError("goal_radius, node_interval and horizon must be positive")
        if not 0 <= self.goal_bias <= 1:
            raise DomainError("goal_bias must lie in [0, 1]")
        if self.cc_fixed_sigma < 0:
            raise DomainError("cc_fixed_sigma must be non-negative")
        if self.connect_every < 1:
            raise DomainError("connect_every must be at least 1")


@dataclass(eq=False)
class TreeNode:
    id: int
    parent: Optional[int]
    belief: StateBelief
    delta_t: float
    trajectory: Optional[Trajectory]
    edge_cost: float
    c_lb: float
    c_ub: float = math.inf
    time: float = 0.0
    in_goal: bool = False
    children: list[int] = field(default_factory=list)
    # None: not checked; False: an emergency stop from here violates the constraint
    stoppable: Optional[bool] = None

    @property
    def position(self) -> tuple[float, float]:
        return (self.belief.mean.x, self.belief.mean.y)


class PlanTree:
    """Node arena rooted at the current vehicle belief."""

    def __init__(self, root: StateBelief, goal, goal_radius: float, bounds: Optional[Region] = None):
        self.goal = (float(goal[0]), float(goal[1]))
        self.goal_radius = float(goal_radius)
        self.bounds = bounds
        self.nodes: list[TreeNode] = []
        self.paths: list[int] = []
        self._xy: list[tuple[float, float]] = []
        self._risk: list[float] = []
        c_lb = self.distance_to_goal(root.mean.x, root.mean.y)
        self._add(TreeNode(0, None, root, 0.0, None, 0.0, c_lb, time=0.0))

    @property
    def root(self) -> TreeNode:
        return self.nodes[0]

    def __len__(self) -> int:
        return len(self.nodes)

    def distance_to_goal(self, x: float, y: float) -> float:
        return math.hypot(x - self.goal[0], y - self.goal[1])

    def in_goal(self, x: float, y: float) -> bool:
        return self.distance_to_goal(x, y) <= self.goal_radius

    def _add(self, node: TreeNode) -> TreeNode:
        node.id = len(self.nodes)
        node.in_goal = self.in_goal(*node.position)
        if node.in_goal:
            node.c_ub = node.c_lb
        self.nodes.append(node)
        self._xy.append(node.position)
        self._risk.append(node.delta_t)
        if node.parent is not None:
            self.nodes[node.parent].children.append(node.id)
        return node

    def path_to(self, node_id: int) -> list[int]:
        out = []
        cur: Optional[int] = node_id
        while cur is not None:
            out.append(cur)
            cur = self.nodes[cur].parent
        return out[::-1]

    def positions(self) -> np.ndarray:
        return np.array(self._xy)

    def risks(self) -> np.ndarray:
        return np.array(self._risk)


def node_cost(node: TreeNode, sample, cfg: PlannerConfig) -> float:
    """Connection heuristic: weighted node risk plus distance to the sample."""
    x, y = node.position
    return cfg.k_cc * node.delta_t + cfg.k_dist * math.hypot(sample[0] - x, sample[1] - y)


def arc_length(parent: TreeNode, child: TreeNode) -> float:
    if child.trajectory is None or len(child.trajectory) == 0:
        return 0.0
    pts = np.vstack([np.array(parent.position), child.trajectory.states[:, :2]])
    return float(np.sum(np.hypot(*np.diff(pts, axis=0).T)))


def edge_cost(parent: TreeNode, child: TreeNode, cfg: PlannerConfig) -> float:
    return cfg.k_cc * child.delta_t + cfg.k_dist * arc_length(parent, child)


def update_cub(tree: PlanTree, from_node_id: int) -> None:
    """Propagate cost-to-go upper bounds from ``from_node_id`` towards the root."""
    node = tree.nodes[from_node_id]
    if node.in_goal:
        node.c_ub = node.c_lb
    while node.parent is not None:
        parent = tree.nodes[node.parent]
        if parent.in_goal:
            break
        best = min(tree.nodes[c].edge_cost + tree.nodes[c].c_ub for c in parent.children)
        if best >= parent.c_ub:
            break
        parent.c_ub = best
        node = parent


def path_score(tree: PlanTree, path: Sequence[int]) -> float:
    return max(tree.nodes[i].c_ub for i in path)


def select_path(tree: PlanTree) -> tuple[list[int], bool]:
    """Return ``(node ids root..end, reaches_goal)``.

    Goal paths are ranked by the largest C_UB along them, then by node count,
    then by discovery order. Without goal paths, the route to the node closest
    to the goal is returned, skipping nodes known not to be stoppable; if no
    node qualifies the root alone is returned.
    """
    if tree.paths:
        candidates = []
        for idx, goal_id in enumerate(tree.paths):
            path = tree.path_to(goal_id)
            candidates.append((path_score(tree, path), len(path), idx, path))
        return min(candidates, key=lambda c: c[:3])[3], True
    eligible = [n for n in tree.nodes if n.stoppable is not False]
    if not eligible:
        return [0], False
    best = min(eligible, key=lambda n: (n.c_lb, n.id))
    return tree.path_to(best.id), False


def baseline_mode_transform(obstacles: Sequence[ObstacleBelief], cfg: PlannerConfig) -> list[ObstacleBelief]:
    """Rewrite perception beliefs to what each planner mode is allowed to see."""
    mode = Mode(cfg.mode)
    if mode is Mode.PU:
        return list(obstacles)
    if mode is Mode.CC:
        s = cfg.cc_fixed_sigma
        cov = np.diag([s * s, s * s])
        sig_lon = sig_lat = s
    elif mode is Mode.CL:
        cov = np.zeros((2, 2))
        sig_lon = sig_lat = 0.0
    else:  # pragma: no cover - Mode() already rejects unknown values
        raise DomainError(f"unknown mode {cfg.mode!r}")
    return [
        replace(
            ob,
            covariance=cov.copy(),
            sigma_lon=sig_lon,
            sigma_lat=sig_lat,
            delta_a=0.0,
            delta_b=0.0,
            semi_axis_lon=ob.half_length + sig_lon,
            semi_axis_lat=ob.half_width + sig_lat,
        )
        for ob in obstacles
    ]


class _Segment:
    """A simulated, risk-checked extension waiting to be committed to the tree."""

    def __init__(self, start: TreeNode, traj: Trajectory, risks: np.ndarray, covs: np.ndarray,
                 keep: int, reached_goal: bool):
        self.start = start
        self.traj = traj
        self.risks = risks
        self.covs = covs
        self.keep = keep
        self.reached_goal = reached_goal


class Expander:
    """Binds a tree to one obstacle snapshot and the configs for expansion."""

    def __init__(self, tree: PlanTree, obstacles: Sequence[ObstacleBelief], cfg: PlannerConfig,
                 motion: MotionConfig, risk_cfg: Optional[RiskConfig] = None):
        self.tree = tree
        self.cfg = cfg
        self.motion = motion
        self.risk_cfg = risk_cfg or RiskConfig(p_safe=cfg.p_safe)
        self.field = ObstacleField.from_beliefs(obstacles)
        self.deterministic = Mode(cfg.mode) is Mode.CL
        self.node_steps = max(1, int(round(cfg.node_interval / motion.dt)))

    def risk_along(self, start: TreeNode, traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
        n = len(traj)
        st = traj.states
        normals, offsets = polygon_arrays(st[:, 0], st[:, 1], st[:, 2], self.motion)
        times = start.time + self.motion.dt * np.arange(1, n + 1)
        if self.deterministic:
            covs = np.zeros((n, 2, 2))
        else:
            covs = propagate_sequence(start.belief.covariance, n, self.motion)
        risks = batch_risk(normals, offsets, covs, self.field, times, self.risk_cfg)
        if self.deterministic:
            risks = np.where(risks > 0, 1.0, 0.0)
        return risks, covs

    def inside_bounds(self, states: np.ndarray) -> np.ndarray:
        b = self.tree.bounds
        if b is None:
            return np.ones(len(states), dtype=bool)
        hl, hw = self.motion.ego_length / 2, self.motion.ego_width / 2
        c, s = np.cos(states[:, 2]), np.sin(states[:, 2])
        ext_x = np.abs(c) * hl + np.abs(s) * hw
        ext_y = np.abs(s) * hl + np.abs(c) * hw
        return ((states[:, 0] - ext_x >= b[0]) & (states[:, 0] + ext_x <= b[1])
                & (states[:, 1] - ext_y >= b[2]) & (states[:, 1] + ext_y <= b[3]))

    def simulate(self, start: TreeNode, target, max_steps: int, tolerance: float) -> Optional[_Segment]:
        traj = steer_to(start.belief.mean, target, self.motion, max_steps=max_steps, tolerance=tolerance)
        n = len(traj)
        if n == 0:
            return None
        risks, covs = self.risk_along(start, traj)
        ok = (risks < self.risk_cfg.delta) & self.inside_bounds(traj.states)
        bad = np.flatnonzero(~ok)
        keep = int(bad[0]) if bad.size else n
        gx, gy = self.tree.goal
        d_goal = np.hypot(traj.states[:keep, 0] - gx, traj.states[:keep, 1] - gy)
        hits = np.flatnonzero(d_goal <= self.tree.goal_radius)
        reached = bool(hits.size)
        if reached:
            keep = int(hits[0]) + 1
        return _Segment(start, traj, risks, covs, keep, reached)

    def commit(self, seg: _Segment) -> list[int]:
        """Insert nodes every ``node_interval`` along the kept prefix, plus its end."""
        if seg.keep == 0:
            return []
        idx = list(range(self.node_steps - 1, seg.keep, self.node_steps))
        if not idx or idx[-1] != seg.keep - 1:
            idx.append(seg.keep - 1)
        tree = self.tree
        parent = seg.start
        prev = -1
        new_ids = []
        for i in idx:
            st = seg.traj.states[i]
            part = Trajectory(seg.traj.states[prev + 1:i + 1], seg.traj.controls[prev + 1:i + 1], True)
            belief = StateBelief(EgoState(float(st[0]), float(st[1]), float(st[2]), float(st[3])), seg.covs[i])
            node = TreeNode(
                id=-1,
                parent=parent.id,
                belief=belief,
                delta_t=float(seg.risks[i]),
                trajectory=part,
                edge_cost=0.0,
                c_lb=tree.distance_to_goal(float(st[0]), float(st[1])),
                time=seg.start.time + self.motion.dt * (i + 1),
            )
            node.edge_cost = edge_cost(parent, node, self.cfg)
            tree._add(node)
            new_ids.append(node.id)
            if node.in_goal:
                tree.paths.append(node.id)
                update_cub(tree, node.id)
            parent = node
            prev = i
        return new_ids

    def replay(self, waypoints) -> None:
        """Re-simulate a chain of waypoints from the root, then try the goal."""
        node = self.tree.root
        for wp in waypoints:
            seg = self.simulate(node, wp, self.cfg.max_connect_steps, self.motion.goal_tolerance)
            if seg is None:
                continue
            new_ids = self.commit(seg)
            if not new_ids:
                return
            node = self.tree.nodes[new_ids[-1]]
            if seg.reached_goal or seg.keep < len(seg.traj):
                return
        self.try_connect(node)

    def brake_ok(self, node: TreeNode) -> bool:
        """Whether full braking straight ahead from ``node`` stays chance-feasible."""
        traj = brake_trajectory(node.belief.mean, self.motion)
        risks, _ = self.risk_along(node, traj)
        return bool(np.all(risks < self.risk_cfg.delta) and np.all(self.inside_bounds(traj.states)))

    def mark_fallback(self) -> None:
        """Check stoppability in closest-to-goal order until one node passes."""
        for node in sorted(self.tree.nodes, key=lambda n: (n.c_lb, n.id)):
            if node.stoppable is None:
                node.stoppable = self.brake_ok(node)
            if node.stoppable:
                return

    def sample(self, rng: np.random.Generator) -> tuple[float, float]:
        if rng.uniform() < self.cfg.goal_bias:
            return self.tree.goal
        region = self.cfg.sample_region or self.tree.bounds
        if region is None:
            raise DomainError("no sample region: set PlannerConfig.sample_region or tree bounds")
        return (float(rng.uniform(region[0], region[1])), float(rng.uniform(region[2], region[3])))

    def candidates(self, sample) -> list[TreeNode]:
        xy = self.tree.positions()
        cost = self.cfg.k_cc * self.tree.risks() + self.cfg.k_dist * np.hypot(xy[:, 0] - sample[0], xy[:, 1] - sample[1])
        order = np.argsort(cost, kind="stable")
        picked = []
        for i in order:
            node = self.tree.nodes[int(i)]
            dx, dy = sample[0] - node.position[0], sample[1] - node.position[1]
            if math.hypot(dx, dy) < self.cfg.min_extend_distance:
                continue
            if abs(wrap_angle(math.atan2(dy, dx) - node.belief.mean.heading)) > self.cfg.max_bearing:
                continue
            picked.append(node)
            if len(picked) == self.cfg.n_candidates:
                break
        return picked

    def try_connect(self, node: TreeNode) -> bool:
        if node.in_goal:
            return False
        seg = self.simulate(node, self.tree.goal, self.cfg.max_connect_steps, self.tree.goal_radius)
        if seg is None or not seg.reached_goal:
            return False
        self.commit(seg)
        return True

    def iterate(self, rng: np.random.Generator) -> None:
        sample = self.sample(rng)
        for node in self.candidates(sample):
            seg = self.simulate(node, sample, self.cfg.max_extend_steps, self.motion.goal_tolerance)
            if seg is None:
                continue
            new_ids = self.commit(seg)
            if not new_ids or seg.reached_goal:
                continue
            stride = self.cfg.connect_every
            tries = new_ids[stride - 1::stride]
            if new_ids[-1] not in tries:
                tries.append(new_ids[-1])
            for nid in tries:
                if self.try_connect(self.tree.nodes[nid]):
                    break

    def done(self) -> bool:
        cap = self.cfg.max_goal_paths
        return (cap > 0 and len(self.tree.paths) >= cap) or len(self.tree) >= self.cfg.max_nodes


def expand_tree(
    tree: PlanTree,
    obstacles: Sequence[ObstacleBelief],
    cfg: PlannerConfig,
    motion: MotionConfig,
    risk_cfg: Optional[RiskConfig] = None,
    rng: Optional[np.random.Generator] = None,
    time_budget: Optional[float] = None,
    max_iterations: Optional[int] = None,
    warm_start: Optional[Sequence[tuple[float, float]]] = None,
) -> int:
    """Grow ``tree`` in place; returns the number of sampling iterations run.

    Stops at ``max_iterations`` (default ``cfg.max_iterations``), when the
    optional wall-clock ``time_budget`` (seconds) is spent, or once
    ``cfg.max_goal_paths`` goal paths are recorded. ``warm_start`` waypoints
    (typically the previous cycle's choice) are replayed before sampling.
    """
    if time_budget is not None and time_budget <= 0:
        return 0
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    iters = cfg.max_iterations if max_iterations is None else max_iterations
    ex = Expander(tree, obstacles, cfg, motion, risk_cfg)
    deadline = None if time_budget is None else time.perf_counter() + time_budget
    if warm_start:
        ex.replay(warm_start)
    done = 0
    while done < iters and not ex.done():
        if deadline is not None and time.perf_counter() >= deadline:
            break
        ex.iterate(rng)
        done += 1
    if not tree.paths:
        ex.mark_fallback()
    return done
