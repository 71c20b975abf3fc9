"""Scenario files: JSON with strict schema checking.

Unknown keys are rejected; errors name the offending field as a dotted path,
e.g. ``planner.k_cc``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Union

from pydantic import ConfigDict, TypeAdapter, ValidationError

from .dynamics import MotionConfig
from .errors import DomainError, ScenarioError
from .perception import GroundTruthObstacle, SensorNoiseProfile
from .planner import PlannerConfig


@dataclass(frozen=True)
class LaneGeometry:
    __pydantic_config__ = ConfigDict(extra="forbid")

    lane_count: int = 3
    lane_width: float = 3.5
    length: float = 100.0
    x_start: float = 0.0

    @property
    def width(self) -> float:
        return self.lane_count * self.lane_width

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (self.x_start, self.x_start + self.length, 0.0, self.width)

    def lane_center(self, index: int) -> float:
        return (index + 0.5) * self.lane_width


@dataclass(frozen=True)
class EgoStart:
    __pydantic_config__ = ConfigDict(extra="forbid")

    x: float
    y: float
    heading: float = 0.0
    speed: float = 0.0


@dataclass(frozen=True)
class GoalSpec:
    __pydantic_config__ = ConfigDict(extra="forbid")

    x: float
    y: float
    radius: float = 2.0


@dataclass(frozen=True)
class ScenarioConfig:
    __pydantic_config__ = ConfigDict(extra="forbid")

    name: str
    lanes: LaneGeometry
    ego: EgoStart
    goal: GoalSpec
    obstacles: list[GroundTruthObstacle] = field(default_factory=list)
    noise: SensorNoiseProfile = field(default_factory=SensorNoiseProfile)
    motion: MotionConfig = field(default_factory=MotionConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    trials: int = 1
    base_seed: int = 0
    max_time: float = 30.0

    def __post_init__(self):
        if self.trials < 1:
            raise DomainError("trials must be at least 1")
        if self.max_time <= 0:
            raise DomainError("max_time must be positive")
        x0, x1, y0, y1 = self.lanes.bounds
        if not (x0 <= self.goal.x <= x1 and y0 <= self.goal.y <= y1):
            raise DomainError("goal must lie inside the drivable region")


_SCENARIO = TypeAdapter(ScenarioConfig)
_PROFILE = TypeAdapter(SensorNoiseProfile)


def _first_error(exc: ValidationError) -> ScenarioError:
    err = exc.errors()[0]
    loc = ".".join(str(p) for p in err["loc"]) or "<root>"
    msg = err["msg"]
    if err["type"] == "extra_forbidden":
        msg = "unknown field"
    return ScenarioError(loc, msg)


def _parse(adapter: TypeAdapter, data: dict):
    try:
        return adapter.validate_python(data)
    except ValidationError as exc:
        raise _first_error(exc) from None
    except DomainError as exc:
        raise ScenarioError("<root>", str(exc)) from None


def _read_json(path: Path) -> dict:
    text = path.read_text()  # OSError propagates: an I/O problem, not a schema one
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(str(path), f"invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ScenarioError("<root>", "expected a JSON object")
    return data


def scenario_from_dict(data: dict) -> ScenarioConfig:
    return _parse(_SCENARIO, data)


def builtin_scenarios() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("chance_rrt.scenarios").iterdir() if p.name.endswith(".json"))


def load_scenario(source: Union[str, Path]) -> ScenarioConfig:
    """Load a scenario from a path, or a bundled scenario by bare name."""
    path = Path(source)
    if not path.exists() and str(source) in builtin_scenarios():
        path = Path(str(resources.files("chance_rrt.scenarios") / f"{source}.json"))
    return scenario_from_dict(_read_json(path))


def load_profile(source: Union[str, Path]) -> SensorNoiseProfile:
    """Load a noise profile; a full scenario file is accepted and its ``noise`` used."""
    data = _read_json(Path(source))
    if "noise" in data and "lanes" in data:
        return scenario_from_dict(data).noise
    return _parse(_PROFILE, data)
