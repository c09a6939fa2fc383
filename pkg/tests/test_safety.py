import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from barnav.geometry import Pose2D, RobotFootprint, Twist2D
from barnav.safety import (ForwardSafety, InflatedFootprint, MpcParams, SafetyMode, SafetyVerdict, fi_check,
                           forward_safe, mpc_check, rollout, scan_to_points)
from barnav.sim import LaserScan, step

from oracles import arc_pose, in_oriented_rect

FP = RobotFootprint()
FI = InflatedFootprint(FP, 0.04)


def beams(ranges, fov=math.radians(270), range_max=10.0):
    ranges = np.asarray(ranges, dtype=float)
    return LaserScan(-fov / 2, fov / 2, ranges, range_max, Pose2D(0, 0, 0))


def mpc_oracle(points, v, w, fp=FP, steps=20, dt=0.01, margin=0.0):
    """First step k whose closed-form pose puts a point inside the footprint, else None."""
    for k in range(1, steps + 1):
        x, y, th = arc_pose(0.0, 0.0, 0.0, v, w, k * dt)
        for px, py in points:
            if in_oriented_rect(px, py, x, y, th, fp.length + 2 * margin, fp.width + 2 * margin):
                return k
    return None


def test_verdict_invariant():
    with pytest.raises(ValueError):
        SafetyVerdict(False)
    with pytest.raises(ValueError):
        SafetyVerdict(True, 3)


def test_param_validation():
    with pytest.raises(ValueError):
        InflatedFootprint(FP, -0.01)
    with pytest.raises(ValueError):
        MpcParams(horizon_steps=0)
    assert MpcParams().horizon == pytest.approx(0.2)
    rect = FI.rect
    assert (rect.width, rect.length) == pytest.approx((0.43 + 0.08, 0.508 + 0.08))


def test_scan_to_points():
    assert scan_to_points(beams([10.0] * 5)).shape == (0, 2)
    s = beams([10.0, 1.0, 10.0])
    assert scan_to_points(s) == pytest.approx(np.array([[1.0, 0.0]]))
    s = beams([2.0, 10.0, 10.0], fov=math.radians(270))  # first beam at -135 deg
    assert scan_to_points(s)[0] == pytest.approx([-math.sqrt(2), -math.sqrt(2)])
    s = LaserScan(math.radians(135), math.radians(135), np.array([2.0]), 10.0, Pose2D(0, 0, 0))
    assert scan_to_points(s)[0] == pytest.approx([-math.sqrt(2), math.sqrt(2)])


def test_fi_examples():
    assert fi_check(np.zeros((0, 2)), FI).safe
    assert fi_check([(0.30, 0.0)], FI).safe
    v = fi_check([(0.29, 0.0)], FI)
    assert not v.safe and v.first_unsafe_step == 0 and v.offending_point == (0.29, 0.0)
    assert not fi_check([(0.0, 0.25)], FI).safe
    assert fi_check([(0.0, 0.26)], FI).safe


def test_fi_reports_first_point_in_beam_order():
    v = fi_check([(5.0, 0.0), (0.1, 0.1), (0.0, 0.0)], FI)
    assert v.offending_point == (0.1, 0.1)


def test_fi_matches_rectangle_oracle():
    rng = np.random.default_rng(31)
    for _ in range(1000):
        pts = rng.uniform(-0.6, 0.6, size=(int(rng.integers(0, 5)), 2))
        want = any(in_oriented_rect(px, py, 0, 0, 0, FI.rect.length, FI.rect.width) for px, py in pts)
        assert fi_check(pts, FI).safe != want


@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(0, 0.2), st.floats(0, 0.2))
def test_fi_monotone_in_offset(px, py, o1, extra):
    if not fi_check([(px, py)], InflatedFootprint(FP, o1)).safe:
        assert not fi_check([(px, py)], InflatedFootprint(FP, o1 + extra)).safe


def test_mpc_stationary_safe():
    assert mpc_check([(1.0, 0.0), (0.0, 0.5)], Twist2D(0, 0)).safe


def test_mpc_straight_examples():
    bumper = FP.length / 2
    assert mpc_check([(bumper + 0.5, 0.0)], Twist2D(0.7, 0)).safe
    v = mpc_check([(bumper + 0.1, 0.0)], Twist2D(0.7, 0))
    assert not v.safe
    assert v.first_unsafe_step == mpc_oracle([(bumper + 0.1, 0.0)], 0.7, 0.0)


def test_mpc_arc_example():
    x, y, th = arc_pose(0, 0, 0, 0.5, 2.0, 0.1)
    pt = (x + FP.length / 2 * math.cos(th), y + FP.length / 2 * math.sin(th))
    v = mpc_check([pt], Twist2D(0.5, 2.0))
    assert not v.safe
    assert v.first_unsafe_step == mpc_oracle([pt], 0.5, 2.0)
    assert abs(v.first_unsafe_step - 10) <= 1


def test_rollout_matches_closed_form():
    rng = np.random.default_rng(5)
    for _ in range(100):
        cmd = Twist2D(rng.uniform(-2, 2), rng.uniform(-1.5, 1.5))
        for k, pose in enumerate(rollout(cmd, MpcParams()), start=1):
            x, y, th = arc_pose(0, 0, 0, cmd.v, cmd.w, k * 0.01)
            assert math.hypot(pose.x - x, pose.y - y) < 1e-9
        # same integrator as the simulator
        p = Pose2D(0, 0, 0)
        for pose in rollout(cmd, MpcParams()):
            p = step(p, cmd, 0.01)
            assert (p.x, p.y, p.theta) == (pose.x, pose.y, pose.theta)


def test_mpc_matches_oracle_random():
    rng = np.random.default_rng(6)
    for _ in range(300):
        pts = rng.uniform(-0.8, 0.8, size=(3, 2))
        pts = pts[~np.array([in_oriented_rect(px, py, 0, 0, 0, FP.length, FP.width) for px, py in pts])]
        v, w = rng.uniform(-1, 1), rng.uniform(-1.5, 1.5)
        assert mpc_check(pts, Twist2D(v, w)).first_unsafe_step == mpc_oracle(pts, v, w)


def test_mpc_monotone_in_horizon():
    rng = np.random.default_rng(8)
    for _ in range(1000):
        pts = rng.uniform(-1.0, 1.0, size=(int(rng.integers(1, 6)), 2))
        cmd = Twist2D(rng.uniform(-0.7, 0.7), rng.uniform(-1.5, 1.5))
        h = int(rng.integers(1, 20))
        if not mpc_check(pts, cmd, FP, MpcParams(horizon_steps=h)).safe:
            assert not mpc_check(pts, cmd, FP, MpcParams(horizon_steps=h + int(rng.integers(1, 10)))).safe


def test_mpc_short_horizon_converges_to_fi():
    rng = np.random.default_rng(10)
    tiny = MpcParams(horizon_steps=1, step_dt=1e-12, margin=0.04)
    for _ in range(1000):
        pts = rng.uniform(-0.5, 0.5, size=(int(rng.integers(0, 4)), 2))
        cmd = Twist2D(rng.uniform(-0.7, 0.7), rng.uniform(-1.5, 1.5))
        assert mpc_check(pts, cmd, FP, tiny).safe == fi_check(pts, FI).safe


def test_forward_safe_dispatch():
    empty = beams([10.0] * 9)
    assert forward_safe(empty, Twist2D(0.7, 0), SafetyMode.FI).safe
    ahead = beams([10.0] * 4 + [1.0] + [10.0] * 4)
    assert forward_safe(ahead, Twist2D(0, 0), SafetyMode.MPC).safe
    assert forward_safe(ahead, Twist2D(0.7, 0), "none").safe


def test_fi_conservative_vs_mpc():
    # obstacle just beside the body, straight command: FI stops, MPC does not
    s = LaserScan(math.pi / 2, math.pi / 2, np.array([0.24]), 10.0, Pose2D(0, 0, 0))
    cmd = Twist2D(0.7, 0.0)
    assert not ForwardSafety(SafetyMode.FI)(s, cmd).safe
    assert ForwardSafety(SafetyMode.MPC)(s, cmd).safe
    pt = scan_to_points(s)
    assert mpc_oracle(pt, 0.7, 0.0) is None
    assert in_oriented_rect(*pt[0], 0, 0, 0, FI.rect.length, FI.rect.width)


def test_checks_are_pure():
    pts = np.array([[0.3, 0.1], [0.5, -0.2]])
    cmd = Twist2D(0.5, 0.3)
    assert mpc_check(pts, cmd) == mpc_check(pts.copy(), cmd)
    assert fi_check(pts) == fi_check(pts.copy())
