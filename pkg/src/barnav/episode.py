"""Closed-loop episode: sense, plan, control and integrate at a fixed timestep."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .costmap import Costmap
from .fsm import FsmController, FsmState
from .geometry import ZERO_TWIST, Pose2D, RobotFootprint, Twist2D
from .planner import GlobalPlanner
from .rng import substream
from .sim import SimConfig, check_collision, scan, step
from .worldgen import WorldSpec

TRACE_COLUMNS = ("t", "x", "y", "theta", "v_cmd", "w_cmd", "fsm_state", "safety_flag",
                 "first_unsafe_step", "min_scan_range", "event")


class Outcome(str, Enum):
    SUCCESS = "Success"
    COLLISION = "Collision"
    TIMEOUT = "Timeout"


@dataclass
class EpisodeResult:
    outcome: Outcome
    actual_time: float
    trace: list[tuple] = field(default_factory=list)
    transitions: list[tuple[float, str, str, str]] = field(default_factory=list)
    loop_detected: bool = False
    final_pose: Pose2D | None = None
    costmap: Costmap | None = None

    @property
    def states(self) -> list[str]:
        return [row[6] for row in self.trace]

    def fsm_summary(self) -> dict[str, float]:
        """Share of controller ticks spent in each state."""
        if not self.trace:
            return {}
        counts: dict[str, int] = {}
        for s in self.states:
            counts[s] = counts.get(s, 0) + 1
        n = len(self.trace)
        return {s.value: counts.get(s.value, 0) / n for s in FsmState}

    def transition_log(self) -> str:
        lines = [f"t={t:.2f} {a} --{label}--> {b}" for t, a, label, b in self.transitions]
        if self.loop_detected:
            lines.append("loop guard: repeated backtracking in one area")
        lines.append(f"outcome={self.outcome.value} time={self.actual_time:.2f}")
        return "\n".join(lines) + "\n"

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in self.trace:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return v


def read_trace_csv(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    if rows and tuple(rows[0].keys()) != TRACE_COLUMNS:
        raise ValueError(f"unexpected trace columns in {path}")
    return rows


def start_pose(world: WorldSpec, config: SimConfig) -> Pose2D:
    jp, jt = config.start_jitter
    if jp == 0 and jt == 0:
        return world.start
    rng = substream(config.seed, "episode", "start")
    dx, dy = rng.uniform(-jp, jp, size=2)
    dth = rng.uniform(-jt, jt)
    s = world.start
    return Pose2D(s.x + dx, s.y + dy, s.theta + dth)


def _limit(prev: Twist2D, cmd: Twist2D, config: SimConfig) -> Twist2D:
    cmd = cmd.clamped(config.v_max, config.w_max)
    if config.accel_limits is None:
        return cmd
    av, aw = config.accel_limits
    dv, dw = av * config.dt, aw * config.dt
    return Twist2D(prev.v + min(max(cmd.v - prev.v, -dv), dv), prev.w + min(max(cmd.w - prev.w, -dw), dw))


def run_episode(world: WorldSpec, controller: FsmController, config: SimConfig = SimConfig(),
                planner: GlobalPlanner | None = None, costmap_kw: dict | None = None) -> EpisodeResult:
    """Simulate one trial until success, collision or timeout."""
    grid = world.grid
    footprint: RobotFootprint = controller.footprint
    planner = planner or GlobalPlanner(grid, world.goal)
    controller.reset()
    pose = start_pose(world, config)
    costmap = Costmap(pose, **(costmap_kw or {}))
    gx, gy = world.goal
    result = EpisodeResult(Outcome.TIMEOUT, 0.0)

    def finish(outcome: Outcome, t: float) -> EpisodeResult:
        result.outcome = outcome
        result.actual_time = t
        result.loop_detected = controller.loop_detected
        result.final_pose = pose
        result.costmap = costmap
        return result

    if check_collision(grid, pose, footprint):
        return finish(Outcome.COLLISION, 0.0)
    if pose.distance_to(gx, gy) <= config.goal_tolerance:
        return finish(Outcome.SUCCESS, 0.0)

    n_steps = int(math.ceil(config.timeout / config.dt - 1e-9))
    applied = ZERO_TWIST
    cmd = ZERO_TWIST
    for k in range(n_steps):
        if k % config.control_every == 0:
            t = k * config.dt
            sc = scan(grid, pose, config.lidar)
            costmap.integrate_scan(sc)
            needs_path = controller.state is not FsmState.BACKTRACK
            path = planner.plan(pose) if needs_path else None
            before = controller.state
            tick = controller.tick(pose, sc, path, costmap)
            cmd = tick.cmd
            if tick.state != before:
                result.transitions.append((t, before.value, tick.label, tick.state.value))
            result.trace.append((
                t, pose.x, pose.y, pose.theta, cmd.v, cmd.w, tick.state.value,
                0 if tick.verdict.safe else 1, tick.verdict.first_unsafe_step,
                sc.min_range(), tick.label,
            ))
        applied = _limit(applied, cmd, config)
        pose = step(pose, applied, config.dt)
        t = (k + 1) * config.dt
        if not grid.contains_point(pose.x, pose.y) or check_collision(grid, pose, footprint):
            return finish(Outcome.COLLISION, t)
        if pose.distance_to(gx, gy) <= config.goal_tolerance:
            return finish(Outcome.SUCCESS, t)
    return finish(Outcome.TIMEOUT, min(n_steps * config.dt, config.timeout))
