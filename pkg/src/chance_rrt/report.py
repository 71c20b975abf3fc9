"""Report files: metrics CSV, per-trial SVG plots and a JSON-lines cycle trace."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .execute import BeliefSnapshot, RunTrace
from .geometry import box_corners
from .harness import RunMetrics, write_metrics_csv
from .scenario import ScenarioConfig

PX_PER_M = 10.0
MARGIN_PX = 20.0


def _num(v: float) -> str:
    return f"{v:.6f}"


def _polygon(corners, **attrs) -> str:
    pts = " ".join(f"{_num(x)},{_num(y)}" for x, y in corners)
    extra = "".join(f' {k.replace("_", "-")}="{v}"' for k, v in attrs.items())
    return f'<polygon points="{pts}"{extra}/>'


def _ellipse(b: BeliefSnapshot) -> str:
    deg = math.degrees(b.heading)
    return (
        f'<ellipse cx="0" cy="0" rx="{_num(b.semi_axis_lon)}" ry="{_num(b.semi_axis_lat)}" '
        f'transform="translate({_num(b.x)},{_num(b.y)}) rotate({_num(deg)})" '
        f'fill="none" stroke="#d62728" stroke-width="0.08"/>'
    )


def trial_svg(trace: RunTrace, scenario: ScenarioConfig, cycle: int = 0) -> str:
    """Plan view in metres: y grows upward, one px scale applied by a group transform.

    Estimated boxes and their uncertainty ellipses are taken from planning
    cycle ``cycle`` (clamped to the last one recorded).
    """
    x0, x1, y0, y1 = scenario.lanes.bounds
    width = (x1 - x0) * PX_PER_M + 2 * MARGIN_PX
    height = (y1 - y0) * PX_PER_M + 2 * MARGIN_PX
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_num(width)}" height="{_num(height)}" '
        f'viewBox="0 0 {_num(width)} {_num(height)}">',
        f'<title>{scenario.name} {trace.mode} seed {trace.seed}: {trace.status.value}</title>',
        f'<g transform="translate({_num(MARGIN_PX - x0 * PX_PER_M)},{_num(height - MARGIN_PX + y0 * PX_PER_M)}) '
        f'scale({_num(PX_PER_M)},{_num(-PX_PER_M)})">',
        f'<rect x="{_num(x0)}" y="{_num(y0)}" width="{_num(x1 - x0)}" height="{_num(y1 - y0)}" fill="#f4f4f4"/>',
    ]
    for i in range(scenario.lanes.lane_count + 1):
        y = y0 + i * scenario.lanes.lane_width
        dash = "" if i in (0, scenario.lanes.lane_count) else ' stroke-dasharray="1,1"'
        out.append(f'<line x1="{_num(x0)}" y1="{_num(y)}" x2="{_num(x1)}" y2="{_num(y)}" '
                   f'stroke="#888888" stroke-width="0.08"{dash}/>')
    g = scenario.goal
    out.append(f'<circle class="goal" cx="{_num(g.x)}" cy="{_num(g.y)}" r="{_num(g.radius)}" '
               f'fill="#2ca02c" fill-opacity="0.2"/>')
    for ob in scenario.obstacles:
        out.append(_polygon(box_corners(ob.x, ob.y, ob.heading, ob.l / 2, ob.w / 2),
                            class_="truth", fill="#333333", fill_opacity="0.6"))
    if trace.cycles:
        rec = trace.cycles[min(cycle, len(trace.cycles) - 1)]
        for b in rec.beliefs:
            out.append(_polygon(box_corners(b.x, b.y, b.heading, b.half_length, b.half_width),
                                class_="estimate", fill="none", stroke="#1f77b4", stroke_width="0.08"))
            out.append(_ellipse(b))
    if trace.states:
        pts = " ".join(f"{_num(s[0])},{_num(s[1])}" for s in trace.states)
        out.append(f'<polyline class="trajectory" points="{pts}" fill="none" stroke="#ff7f0e" stroke-width="0.15"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_report(
    metrics: Sequence[RunMetrics],
    traces: Mapping[str, Sequence[RunTrace]],
    out_path,
    scenario: Optional[ScenarioConfig] = None,
) -> list[Path]:
    """Write metrics.csv, trace.jsonl and (given a scenario) one SVG per trial.

    Raises OSError when ``out_path`` cannot be created or written.
    """
    out = Path(out_path)
    out.mkdir(parents=True, exist_ok=True)
    written = [write_metrics_csv(metrics, out / "metrics.csv")]
    trace_path = out / "trace.jsonl"
    with trace_path.open("w") as fh:
        for mode_traces in traces.values():
            for tr in mode_traces:
                for rec in tr.to_records():
                    rec["status"] = tr.status.value
                    fh.write(json.dumps(rec, sort_keys=True) + "\n")
    written.append(trace_path)
    if scenario is not None:
        for mode_traces in traces.values():
            for tr in mode_traces:
                svg = out / f"{tr.mode}_seed{tr.seed}.svg"
                svg.write_text(trial_svg(tr, scenario))
                written.append(svg)
    return written
