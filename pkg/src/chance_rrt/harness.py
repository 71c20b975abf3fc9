"""Batch experiments: paired trials per planner mode, Table-I style metrics and
the perception sensitivity sweep."""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .dynamics import EgoState
from .errors import DomainError
from .execute import RunTrace, Status, execute
from .perception import GroundTruthObstacle, SensorNoiseProfile, sense
from .planner import Mode
from .scenario import ScenarioConfig
from .uncertainty import fuse_samples

THREADS_ENV = "CHANCE_RRT_THREADS"
METRICS_HEADER = ("mode", "rate_succ_1", "rate_succ_2", "rate_succ_3", "risk_max", "risk_avg",
                  "n_waypoints", "traj_length_m")
BOX_ELEMENTS = ("x", "y", "z", "h", "w", "l", "theta")


@dataclass(frozen=True)
class RunMetrics:
    """Per-mode aggregate over a batch of trials.

    Rates are trial fractions. ``risk_max`` / ``risk_avg`` pool every executed
    step of every trial. ``n_waypoints`` and ``traj_length_m`` average over
    goal-reaching trials only and are NaN when none reached the goal.
    """

    mode: str
    rate_succ_1: float
    rate_succ_2: float
    rate_succ_3: float
    risk_max: float
    risk_avg: float
    n_waypoints: float
    traj_length_m: float

    def row(self) -> list[str]:
        return [self.mode] + [_fmt(v) for v in astuple(self)[1:]]


def _fmt(v: float) -> str:
    return "nan" if math.isnan(v) else f"{v:.6f}"


def compute_metrics(mode: str, traces: Sequence[RunTrace]) -> RunMetrics:
    if not traces:
        raise DomainError("no traces to summarise")
    n = len(traces)
    succ1 = sum(1 for t in traces if not t.deadlock)
    goal = [t for t in traces if t.status is Status.GOAL_REACHED and t.collisions == 0]
    succ3 = sum(1 for t in goal if t.cc_violations == 0)
    risks = np.concatenate([np.asarray(t.step_risk, dtype=float) for t in traces])
    return RunMetrics(
        mode=mode,
        rate_succ_1=succ1 / n,
        rate_succ_2=len(goal) / n,
        rate_succ_3=succ3 / n,
        risk_max=float(risks.max()) if risks.size else 0.0,
        risk_avg=float(risks.mean()) if risks.size else 0.0,
        n_waypoints=float(np.mean([t.n_waypoints for t in goal])) if goal else math.nan,
        traj_length_m=float(np.mean([t.length for t in goal])) if goal else math.nan,
    )


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise DomainError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise DomainError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def _trial(job: tuple[ScenarioConfig, str, int]) -> RunTrace:
    scenario, mode, seed = job
    return execute(scenario, mode=Mode(mode), seed=seed)


def run_trials(
    scenario: ScenarioConfig,
    modes: Iterable,
    trials: Optional[int] = None,
    base_seed: Optional[int] = None,
    threads: Optional[int] = None,
) -> dict[str, list[RunTrace]]:
    """Trial i of every mode uses seed base_seed + i; results keep trial order."""
    trials = scenario.trials if trials is None else trials
    base_seed = scenario.base_seed if base_seed is None else base_seed
    if trials < 0:
        raise DomainError("trials must be non-negative")
    mode_names = [Mode(m).value for m in modes]
    jobs = [(scenario, m, base_seed + i) for m in mode_names for i in range(trials)]
    threads = thread_count() if threads is None else threads
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
            results = list(pool.map(_trial, jobs))
    else:
        results = [_trial(j) for j in jobs]
    out: dict[str, list[RunTrace]] = {m: [] for m in mode_names}
    for (_, m, _), trace in zip(jobs, results):
        out[m].append(trace)
    return out


def run_batch(
    scenario: ScenarioConfig,
    modes: Iterable,
    trials: Optional[int] = None,
    base_seed: Optional[int] = None,
    threads: Optional[int] = None,
) -> tuple[list[RunMetrics], dict[str, list[RunTrace]]]:
    """Run paired trials and summarise; modes with zero trials get no metrics row."""
    traces = run_trials(scenario, modes, trials, base_seed, threads)
    metrics = [compute_metrics(m, ts) for m, ts in traces.items() if ts]
    return metrics, traces


def write_metrics_csv(metrics: Sequence[RunMetrics], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for m in metrics:
            w.writerow(m.row())
    return path


@dataclass(frozen=True)
class SweepCell:
    distance: float
    azimuth: float
    mean: tuple[float, ...]
    stderr: tuple[float, ...]


def _cell_seed(seed: int, distance: float, azimuth: float, frame: int) -> list[int]:
    # keyed on |azimuth| so mirrored cells see identical noise draws
    return [seed, frame, int(round(distance * 1e3)), int(round(abs(azimuth) * 1e6))]


def sense_sweep(
    profile: SensorNoiseProfile,
    distances: Sequence[float],
    azimuths: Sequence[float],
    frames: int,
    seed: int = 0,
) -> list[SweepCell]:
    """Mean fused total variance per box element for a lone vehicle at each (d, phi).

    Azimuths are in radians; the ego sits at the origin facing +x.
    """
    if not len(distances) or not len(azimuths):
        raise DomainError("distance and azimuth grids must be nonempty")
    if frames < 1:
        raise DomainError("frames must be at least 1")
    profile = replace(profile, misdetect_rate=0.0, occlusion_misdetect_rate=0.0, clutter_rate=0.0,
                      max_range=max(profile.max_range, max(distances) + 1.0))
    ego = EgoState(0.0, 0.0, 0.0, 0.0)
    cells = []
    for d in distances:
        for phi in azimuths:
            target = GroundTruthObstacle("target", d * math.cos(phi), d * math.sin(phi))
            var = np.empty((frames, 7))
            for f in range(frames):
                (det,) = sense(ego, [target], profile, _cell_seed(seed, d, phi, f))
                var[f] = fuse_samples(det.samples).var_total
            mean = var.mean(axis=0)
            stderr = var.std(axis=0, ddof=1) / math.sqrt(frames) if frames > 1 else np.zeros(7)
            cells.append(SweepCell(float(d), float(phi), tuple(map(float, mean)), tuple(map(float, stderr))))
    return cells


def write_sweep_csv(cells: Sequence[SweepCell], path) -> Path:
    path = Path(path)
    header = ["distance_m", "azimuth_rad"]
    header += [f"var_{e}" for e in BOX_ELEMENTS] + [f"stderr_{e}" for e in BOX_ELEMENTS]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for c in cells:
            w.writerow([f"{c.distance:.6f}", f"{c.azimuth:.6f}"] + [f"{v:.9e}" for v in c.mean + c.stderr])
    return path
