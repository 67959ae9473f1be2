"""Shortest bounded-curvature paths between poses, by the six-word closed forms.

Poses use the vehicle convention: heading is measured from the +y axis
toward +x, so heading 0 drives along +y and positive steering turns
clockwise. Internally the word formulas run in the textbook frame
(heading from +x, counterclockwise positive); the change of angle
variable is handled here so callers never see it. An L segment turns
counterclockwise (heading decreases in vehicle convention), R turns
clockwise, S runs straight; arc radius is rho.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

__all__ = [
    "Pose",
    "DubinsResult",
    "shortest_path",
    "sample_path",
    "completion_steps",
    "pose_from_state",
    "state_from_pose",
]

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float  # radians from +y axis, clockwise positive

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.heading])


@dataclass(frozen=True)
class DubinsResult:
    """Winning word and its segment lengths (physical units, not angles)."""

    word: str
    lengths: Tuple[float, float, float]
    rho: float
    start: Pose
    goal: Pose

    @property
    def length(self) -> float:
        return float(sum(self.lengths))


def pose_from_state(state) -> Pose:
    """Vehicle planar state [x, y, heading] as a Pose (same convention)."""
    state = np.asarray(state, dtype=float)
    if state.shape != (3,):
        raise ValueError(f"expected a 3-state [x, y, heading], got shape {state.shape}")
    return Pose(x=float(state[0]), y=float(state[1]), heading=float(state[2]))


def state_from_pose(pose: Pose) -> np.ndarray:
    return pose.as_array()


def _mod2pi(angle: float) -> float:
    return angle - _TWO_PI * math.floor(angle / _TWO_PI)


def _lsl(alpha, beta, d):
    p_sq = 2 + d * d - 2 * math.cos(alpha - beta) + 2 * d * (math.sin(alpha) - math.sin(beta))
    if p_sq < 0:
        return None
    tmp = math.atan2(math.cos(beta) - math.cos(alpha), d + math.sin(alpha) - math.sin(beta))
    return _mod2pi(tmp - alpha), math.sqrt(p_sq), _mod2pi(beta - tmp)


def _rsr(alpha, beta, d):
    p_sq = 2 + d * d - 2 * math.cos(alpha - beta) + 2 * d * (math.sin(beta) - math.sin(alpha))
    if p_sq < 0:
        return None
    tmp = math.atan2(math.cos(alpha) - math.cos(beta), d - math.sin(alpha) + math.sin(beta))
    return _mod2pi(alpha - tmp), math.sqrt(p_sq), _mod2pi(tmp - beta)


def _lsr(alpha, beta, d):
    p_sq = -2 + d * d + 2 * math.cos(alpha - beta) + 2 * d * (math.sin(alpha) + math.sin(beta))
    if p_sq < 0:
        return None
    p = math.sqrt(p_sq)
    tmp = math.atan2(
        -math.cos(alpha) - math.cos(beta), d + math.sin(alpha) + math.sin(beta)
    ) - math.atan2(-2.0, p)
    return _mod2pi(tmp - alpha), p, _mod2pi(tmp - _mod2pi(beta))


def _rsl(alpha, beta, d):
    p_sq = d * d - 2 + 2 * math.cos(alpha - beta) - 2 * d * (math.sin(alpha) + math.sin(beta))
    if p_sq < 0:
        return None
    p = math.sqrt(p_sq)
    tmp = math.atan2(
        math.cos(alpha) + math.cos(beta), d - math.sin(alpha) - math.sin(beta)
    ) - math.atan2(2.0, p)
    return _mod2pi(alpha - tmp), p, _mod2pi(beta - tmp)


def _rlr(alpha, beta, d):
    tmp = (6.0 - d * d + 2 * math.cos(alpha - beta)
           + 2 * d * (math.sin(alpha) - math.sin(beta))) / 8.0
    if abs(tmp) > 1:
        return None
    p = _mod2pi(_TWO_PI - math.acos(tmp))
    t = _mod2pi(
        alpha
        - math.atan2(math.cos(alpha) - math.cos(beta), d - math.sin(alpha) + math.sin(beta))
        + _mod2pi(p / 2.0)
    )
    return t, p, _mod2pi(alpha - beta - t + _mod2pi(p))


def _lrl(alpha, beta, d):
    tmp = (6.0 - d * d + 2 * math.cos(alpha - beta)
           + 2 * d * (math.sin(beta) - math.sin(alpha))) / 8.0
    if abs(tmp) > 1:
        return None
    p = _mod2pi(_TWO_PI - math.acos(tmp))
    t = _mod2pi(
        -alpha
        - math.atan2(math.cos(alpha) - math.cos(beta), d + math.sin(alpha) - math.sin(beta))
        + p / 2.0
    )
    return t, p, _mod2pi(_mod2pi(beta) - alpha - t + _mod2pi(p))


_WORDS = (
    ("LSL", _lsl),
    ("RSR", _rsr),
    ("LSR", _lsr),
    ("RSL", _rsl),
    ("RLR", _rlr),
    ("LRL", _lrl),
)


def shortest_path(start: Pose, goal: Pose, rho: float) -> DubinsResult:
    """Shortest path from start to goal with turning radius rho."""
    if rho <= 0:
        raise ValueError("turning radius must be positive")
    dx = goal.x - start.x
    dy = goal.y - start.y
    d = math.hypot(dx, dy) / rho
    # textbook frame: heading from +x axis, counterclockwise
    theta = math.atan2(dy, dx)
    alpha = _mod2pi((math.pi / 2 - start.heading) - theta)
    beta = _mod2pi((math.pi / 2 - goal.heading) - theta)

    best: Optional[Tuple[float, str, Tuple[float, float, float]]] = None
    for word, formula in _WORDS:
        out = formula(alpha, beta, d)
        if out is None:
            continue
        total = sum(out)
        if best is None or total < best[0]:
            best = (total, word, out)
    if best is None:
        raise RuntimeError("no feasible word (cannot happen for valid poses)")
    _, word, (t, p, q) = best
    return DubinsResult(
        word=word,
        lengths=(t * rho, p * rho, q * rho),
        rho=rho,
        start=start,
        goal=goal,
    )


def _advance(x: float, y: float, th: float, seg: str, ln: float, rho: float):
    if seg == "S":
        return x + ln * math.sin(th), y + ln * math.cos(th), th
    turn = 1.0 if seg == "R" else -1.0
    cx = x + turn * rho * math.cos(th)
    cy = y - turn * rho * math.sin(th)
    th2 = th + turn * ln / rho
    return cx - turn * rho * math.cos(th2), cy + turn * rho * math.sin(th2), th2


def sample_path(result: DubinsResult, spacing: float = 0.01) -> np.ndarray:
    """Poses along the path at roughly the given arc-length spacing.

    Returns an (n, 3) array of [x, y, heading] rows, first row the start
    pose, last row the path endpoint.
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    poses = [(result.start.x, result.start.y, result.start.heading)]
    x, y, th = poses[0]
    for seg, ln in zip(result.word, result.lengths):
        n_steps = max(1, int(math.ceil(ln / spacing)))
        for i in range(1, n_steps + 1):
            poses.append(_advance(x, y, th, seg, ln * i / n_steps, rho=result.rho))
        x, y, th = poses[-1]
    return np.array(poses)


def path_endpoint(result: DubinsResult) -> np.ndarray:
    """Endpoint pose reached by driving the word's segments."""
    x, y, th = result.start.x, result.start.y, result.start.heading
    for seg, ln in zip(result.word, result.lengths):
        x, y, th = _advance(x, y, th, seg, ln, rho=result.rho)
    return np.array([x, y, th])


def completion_steps(path_length: float, v_max: float, ts: float) -> int:
    """Discrete steps to traverse a path at full speed, rounded up.

    A tiny relative slack keeps exact multiples from rounding up one
    extra step through floating-point noise.
    """
    if v_max <= 0 or ts <= 0:
        raise ValueError("v_max and ts must be positive")
    if path_length <= 0:
        return 0
    return int(math.ceil(path_length / (v_max * ts) - 1e-9))
