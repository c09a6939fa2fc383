"""Five-state navigation controller: heading alignment, drive policy, and recovery.

States and edges follow the controller diagram exactly; ``TRANSITIONS`` is the
full edge table and ``validate_timeline`` rejects any state change outside it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Protocol

import numpy as np

from .costmap import Costmap, RearRoi
from .errors import DegenerateLookahead, DegenerateTarget, RoiOutOfWindow
from .geometry import ZERO_TWIST, Pose2D, RobotFootprint, Twist2D, wrap_angle
from .planner import GlobalPath, heading_error, sample_lookahead
from .safety import SAFE, ForwardSafety, SafetyMode, SafetyVerdict
from .sim import LaserScan


class FsmState(str, Enum):
    INITIAL = "Initial"
    HEADING = "Heading"
    DRIVE = "Drive"
    BACKTRACK = "Backtrack"
    FORWARD = "Forward"


S = FsmState
TRANSITIONS: frozenset[tuple[FsmState, str, FsmState]] = frozenset({
    (S.INITIAL, "no path", S.INITIAL),
    (S.INITIAL, "path", S.HEADING),
    (S.HEADING, "no path", S.INITIAL),
    (S.HEADING, "aligned", S.DRIVE),
    (S.DRIVE, "safe", S.DRIVE),
    (S.DRIVE, "not aligned", S.HEADING),
    (S.DRIVE, "dangerous", S.BACKTRACK),
    (S.BACKTRACK, "safe", S.BACKTRACK),
    (S.BACKTRACK, "stuck", S.FORWARD),
    (S.BACKTRACK, "recovered", S.HEADING),
    (S.FORWARD, "safe", S.FORWARD),
    (S.FORWARD, "recovered", S.HEADING),
    (S.FORWARD, "stuck", S.BACKTRACK),
})
ALLOWED_CHANGES = frozenset((a, b) for a, _, b in TRANSITIONS if a != b)


class IllegalTransition(AssertionError):
    pass


def validate_timeline(states, labels=None) -> None:
    """Raise IllegalTransition on any state change (or labeled edge) not in the table."""
    states = [FsmState(s) for s in states]
    for i in range(1, len(states)):
        a, b = states[i - 1], states[i]
        if a != b and (a, b) not in ALLOWED_CHANGES:
            raise IllegalTransition(f"tick {i}: {a.value} -> {b.value}")
        if labels is not None and a != b and (a, labels[i], b) not in TRANSITIONS:
            raise IllegalTransition(f"tick {i}: {a.value} -[{labels[i]}]-> {b.value}")


class DrivePolicy(Protocol):
    def __call__(self, scan: LaserScan, lookahead_rel: tuple[float, float], v_max: float) -> Twist2D: ...


def front_min_range(scan: LaserScan, half_cone: float = math.pi / 4) -> float:
    a = scan.angles()
    sel = np.abs(a) <= half_cone + 1e-12
    return float(scan.ranges[sel].min()) if sel.any() else scan.range_max


def pure_pursuit_policy(scan: LaserScan, lookahead_rel, v_max: float, w_max: float = 1.5,
                        d_slow: float = 1.0) -> Twist2D:
    """Geometric stand-in for the learned drive model: same inputs, a Twist out."""
    x, y = lookahead_rel
    d2 = x * x + y * y
    if d2 < 1e-12:
        raise DegenerateLookahead("lookahead point at robot origin")
    kappa = 2.0 * y / d2
    v = v_max * min(1.0, front_min_range(scan) / d_slow)
    return Twist2D(v, kappa * v).clamped(v_max, w_max)


@dataclass(frozen=True)
class ControllerConfig:
    heading_enter: float = math.radians(25.0)   # "aligned" at or below
    heading_exit: float = math.radians(30.0)    # "not aligned" at or above
    lookahead: float = 0.5
    backtrack_distance: float = 0.3
    slow_forward_speed: float = 0.2
    slow_reverse_speed: float = 0.15
    v_max: float = 0.7
    w_max: float = 1.5
    k_theta: float = 2.0
    arrival_tolerance: float = 0.05
    rear_align_tolerance: float = math.radians(5.0)
    recover_distance: float = 0.3
    trail_spacing: float = 0.05
    d_slow: float = 1.0
    loop_guard: bool = True
    loop_guard_count: int = 5
    loop_guard_radius: float = 3.0

    def __post_init__(self):
        for name in ("heading_enter", "heading_exit", "lookahead", "backtrack_distance", "slow_forward_speed",
                     "slow_reverse_speed", "v_max", "w_max", "arrival_tolerance", "recover_distance", "trail_spacing"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not self.heading_enter <= self.heading_exit < math.pi / 2:
            raise ValueError("need heading_enter <= heading_exit < pi/2")


@dataclass
class BreadcrumbTrail:
    spacing: float = 0.05
    poses: list[Pose2D] = field(default_factory=list)

    def record(self, pose: Pose2D) -> None:
        if not self.poses or self.poses[-1].distance_to(pose.x, pose.y) >= self.spacing:
            self.poses.append(pose)

    def clear(self) -> None:
        self.poses.clear()

    def __len__(self) -> int:
        return len(self.poses)

    def sample_behind(self, pose: Pose2D, distance: float) -> tuple[int, tuple[float, float]] | None:
        """Trail point whose arclength back from ``pose`` is nearest ``distance``.

        Returns (index, point), or None when the trail is shorter than ``distance``.
        """
        if not self.poses:
            return None
        s = 0.0
        prev = (pose.x, pose.y)
        best = None
        for i in range(len(self.poses) - 1, -1, -1):
            p = self.poses[i]
            s += math.hypot(p.x - prev[0], p.y - prev[1])
            prev = (p.x, p.y)
            err = abs(s - distance)
            if best is None or err < best[0]:
                best = (err, i)
            if s >= distance:
                break
        if s < distance:
            return None
        i = best[1]
        return i, (self.poses[i].x, self.poses[i].y)


def heading_behavior(pose: Pose2D, target, config: ControllerConfig = ControllerConfig()) -> tuple[Twist2D, bool]:
    """Rotate in place toward ``target``; the flag reports alignment within tolerance."""
    try:
        err = heading_error(pose, target)
    except DegenerateTarget:
        return ZERO_TWIST, True
    w = min(max(config.k_theta * err, -config.w_max), config.w_max)
    return Twist2D(0.0, w), abs(err) <= config.heading_enter


@dataclass
class TickResult:
    cmd: Twist2D
    state: FsmState
    label: str
    verdict: SafetyVerdict = SAFE


class FsmController:
    """State-bearing controller for one episode; call ``tick`` at the control rate."""

    def __init__(self, config: ControllerConfig = ControllerConfig(),
                 safety: ForwardSafety | None = None,
                 policy: Callable[..., Twist2D] | None = None,
                 footprint: RobotFootprint = RobotFootprint(),
                 roi: RearRoi | None = None):
        self.config = config
        self.safety = safety if safety is not None else ForwardSafety(SafetyMode.FI, footprint)
        self.policy = policy or (lambda scan, rel, v_max: pure_pursuit_policy(
            scan, rel, v_max, config.w_max, config.d_slow))
        self.footprint = footprint
        self.roi = roi or RearRoi.for_footprint(footprint)
        self.reset()

    def reset(self) -> None:
        self.state = FsmState.INITIAL
        self.trail = BreadcrumbTrail(self.config.trail_spacing)
        self.path: GlobalPath | None = None
        self.backtrack_target: tuple[float, float] | None = None
        self.backtrack_phase = "align"
        self.forward_entry: Pose2D | None = None
        self.backtrack_entries: list[tuple[float, float]] = []
        self.loop_detected = False
        self.transitions: list[tuple[FsmState, str, FsmState]] = []

    # -- behaviors -----------------------------------------------------------------

    def _enter_backtrack(self, pose: Pose2D) -> None:
        cfg = self.config
        sampled = self.trail.sample_behind(pose, cfg.backtrack_distance)
        if sampled is None:
            d = cfg.backtrack_distance
            self.backtrack_target = (pose.x - d * math.cos(pose.theta), pose.y - d * math.sin(pose.theta))
        else:
            i, self.backtrack_target = sampled
            # the reversed-over stretch is consumed so repeated recoveries walk further back
            del self.trail.poses[i + 1:]
        self.backtrack_phase = "align"
        if cfg.loop_guard:
            near = sum(1 for p in self.backtrack_entries
                       if math.hypot(p[0] - pose.x, p[1] - pose.y) <= cfg.loop_guard_radius)
            if near + 1 > cfg.loop_guard_count:
                self.loop_detected = True
        self.backtrack_entries.append((pose.x, pose.y))

    def backtrack_behavior(self, pose: Pose2D, costmap: Costmap) -> tuple[Twist2D, str]:
        """One tick of backtracking; status is 'stuck', 'recovered' or 'safe'."""
        cfg = self.config
        tx, ty = self.backtrack_target
        try:
            clear = costmap.roi_clear(pose, self.roi)
        except RoiOutOfWindow:
            clear = False
        if not clear:
            return ZERO_TWIST, "stuck"
        dist = math.hypot(tx - pose.x, ty - pose.y)
        if dist <= cfg.arrival_tolerance:
            return ZERO_TWIST, "recovered"
        # rear axis error: bearing to target measured from the reversed heading
        err = wrap_angle(math.atan2(ty - pose.y, tx - pose.x) - (pose.theta + math.pi))
        along = -((tx - pose.x) * math.cos(pose.theta) + (ty - pose.y) * math.sin(pose.theta))
        if self.backtrack_phase == "reverse":
            if along <= 0.0:
                # passed abeam of the target without entering the tolerance disc
                return ZERO_TWIST, "recovered"
            if abs(err) > 3 * cfg.rear_align_tolerance and dist > 2 * cfg.arrival_tolerance:
                self.backtrack_phase = "align"
        if self.backtrack_phase == "align":
            if abs(err) <= cfg.rear_align_tolerance:
                self.backtrack_phase = "reverse"
            else:
                return Twist2D(0.0, min(max(cfg.k_theta * err, -cfg.w_max), cfg.w_max)), "safe"
        return Twist2D(-cfg.slow_reverse_speed, 0.0), "safe"

    def forward_behavior(self, pose: Pose2D, scan: LaserScan, path: GlobalPath | None) -> tuple[Twist2D, str, SafetyVerdict]:
        cfg = self.config
        cmd = Twist2D(cfg.slow_forward_speed, 0.0)
        verdict = self.safety(scan, cmd)
        if not verdict.safe:
            return ZERO_TWIST, "stuck", verdict
        moved = self.forward_entry.distance_to(pose.x, pose.y)
        if moved >= cfg.recover_distance and path is not None:
            return ZERO_TWIST, "recovered", verdict
        return cmd, "safe", verdict

    # -- main step -------------------------------------------------------------------

    def _go(self, new: FsmState, label: str, cmd: Twist2D, verdict: SafetyVerdict = SAFE) -> TickResult:
        old = self.state
        if (old, label, new) not in TRANSITIONS:
            raise IllegalTransition(f"{old.value} -[{label}]-> {new.value}")
        if old != new:
            self.transitions.append((old, label, new))
        self.state = new
        return TickResult(cmd, new, label, verdict)

    def _stay(self, cmd: Twist2D, label: str, verdict: SafetyVerdict = SAFE) -> TickResult:
        # Heading holds while rotating; that is not a drawn edge, so it bypasses the table
        return TickResult(cmd, self.state, label, verdict)

    def tick(self, pose: Pose2D, scan: LaserScan, path: GlobalPath | None, costmap: Costmap) -> TickResult:
        cfg = self.config
        if path is not None:
            self.path = path
        st = self.state

        if st is S.INITIAL:
            if path is None:
                return self._go(S.INITIAL, "no path", ZERO_TWIST)
            return self._go(S.HEADING, "path", ZERO_TWIST)

        if st is S.HEADING:
            if path is None:
                return self._go(S.INITIAL, "no path", ZERO_TWIST)
            target = sample_lookahead(path, pose, cfg.lookahead)
            cmd, aligned = heading_behavior(pose, target, cfg)
            if aligned:
                return self._go(S.DRIVE, "aligned", cmd)
            return self._stay(cmd, "aligning")

        if st is S.DRIVE:
            target = sample_lookahead(self.path, pose, cfg.lookahead)
            lx, ly = pose.to_local(target[0], target[1])
            lx, ly = float(lx), float(ly)
            if math.hypot(lx, ly) < 1e-6:
                cmd = ZERO_TWIST
            else:
                cmd = self.policy(scan, (lx, ly), cfg.v_max).clamped(cfg.v_max, cfg.w_max)
            verdict = self.safety(scan, cmd)
            if not verdict.safe:
                self._enter_backtrack(pose)
                return self._go(S.BACKTRACK, "dangerous", ZERO_TWIST, verdict)
            if math.hypot(lx, ly) >= 1e-6 and abs(math.atan2(ly, lx)) >= cfg.heading_exit:
                return self._go(S.HEADING, "not aligned", ZERO_TWIST, verdict)
            if cmd.v > 0:
                self.trail.record(pose)
            return self._go(S.DRIVE, "safe", cmd, verdict)

        if st is S.BACKTRACK:
            cmd, status = self.backtrack_behavior(pose, costmap)
            if status == "stuck":
                self.forward_entry = pose
                return self._go(S.FORWARD, "stuck", ZERO_TWIST)
            if status == "recovered":
                return self._go(S.HEADING, "recovered", ZERO_TWIST)
            return self._go(S.BACKTRACK, "safe", cmd)

        cmd, status, verdict = self.forward_behavior(pose, scan, path)
        if status == "stuck":
            self._enter_backtrack(pose)
            return self._go(S.BACKTRACK, "stuck", ZERO_TWIST, verdict)
        if status == "recovered":
            return self._go(S.HEADING, "recovered", ZERO_TWIST, verdict)
        self.trail.record(pose)
        return self._go(S.FORWARD, "safe", cmd, verdict)
