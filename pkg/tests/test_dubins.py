"""Shortest-path words: geometric specials, invariances, oracle cross-check."""

import math

import numpy as np
import pytest

from etoc.dubins import (
    DubinsResult,
    Pose,
    completion_steps,
    path_endpoint,
    pose_from_state,
    sample_path,
    shortest_path,
)

from _oracles import propagate_word, shortest_path_reference


def test_straight_ahead():
    res = shortest_path(Pose(0, 0, 0), Pose(0, 5, 0), rho=1.0)
    assert res.length == pytest.approx(5.0, abs=1e-12)


def test_semicircle():
    # heading 0 to heading pi at (2 rho, 0): one clockwise half turn
    res = shortest_path(Pose(0, 0, 0), Pose(2, 0, math.pi), rho=1.0)
    assert res.length == pytest.approx(math.pi, abs=1e-9)


def test_full_circle_heading_only():
    # same position, heading rotated: best is a circle arc pair or full loop;
    # for a pi turn in place the optimum is 4 rho shifted... just check the
    # lower bound and endpoint instead of guessing the value
    res = shortest_path(Pose(0, 0, 0), Pose(0, 0, math.pi), rho=0.5)
    end = path_endpoint(res)
    assert np.hypot(end[0], end[1]) < 1e-9
    assert (end[2] - math.pi) % (2 * math.pi) == pytest.approx(0.0, abs=1e-9)


def test_length_lower_bound_is_euclidean():
    rng = np.random.default_rng(5)
    for _ in range(50):
        a = rng.uniform(-2, 2, size=3)
        b = rng.uniform(-2, 2, size=3)
        res = shortest_path(Pose(*a), Pose(*b), rho=0.3)
        assert res.length >= np.hypot(b[0] - a[0], b[1] - a[1]) - 1e-9


def test_translation_invariance():
    res1 = shortest_path(Pose(0, -1, 0), Pose(0.4, 0.3, 2.0), rho=0.1)
    res2 = shortest_path(Pose(3, 6, 0), Pose(3.4, 7.3, 2.0), rho=0.1)
    assert res1.length == pytest.approx(res2.length, rel=1e-12)
    assert res1.word == res2.word


def test_scale_invariance():
    # scaling positions and rho together scales the length
    res1 = shortest_path(Pose(0, -1, 0), Pose(0.4, 0.3, 2.0), rho=0.1)
    res2 = shortest_path(Pose(0, -10, 0), Pose(4.0, 3.0, 2.0), rho=1.0)
    assert res2.length == pytest.approx(10 * res1.length, rel=1e-9)


def test_endpoint_closes():
    rng = np.random.default_rng(17)
    for _ in range(200):
        start = Pose(*rng.uniform(-1, 1, size=2), rng.uniform(-math.pi, math.pi))
        goal = Pose(*rng.uniform(-1, 1, size=2), rng.uniform(-math.pi, math.pi))
        res = shortest_path(start, goal, rho=0.1)
        end = path_endpoint(res)
        assert np.hypot(end[0] - goal.x, end[1] - goal.y) < 1e-9
        dth = (end[2] - goal.heading + math.pi) % (2 * math.pi) - math.pi
        assert abs(dth) < 1e-9


def test_sample_path_starts_and_ends_right():
    res = shortest_path(Pose(0, -1, 0), Pose(0.4, 0.3, 2.0), rho=0.1)
    pts = sample_path(res, spacing=0.01)
    assert np.allclose(pts[0], [0, -1, 0])
    assert np.allclose(pts[-1][:2], [0.4, 0.3], atol=1e-9)
    # consecutive points no farther apart than the spacing (plus slack)
    gaps = np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1]))
    assert gaps.max() <= 0.011


def test_matches_oracle_on_random_pairs():
    rng = np.random.default_rng(23)
    worst = 0.0
    for _ in range(60):
        start = np.array([*rng.uniform(-1, 1, size=2), rng.uniform(0, 2 * math.pi)])
        goal = np.array([*rng.uniform(-1, 1, size=2), rng.uniform(0, 2 * math.pi)])
        res = shortest_path(Pose(*start), Pose(*goal), rho=0.1)
        ref_len, _, _ = shortest_path_reference(start, goal, rho=0.1)
        rel = abs(res.length - ref_len) / max(ref_len, 1e-12)
        worst = max(worst, rel)
        assert rel < 1e-6, f"{start} -> {goal}: {res.length} vs {ref_len}"
    assert worst < 1e-6


def test_oracle_propagation_agrees_with_library_endpoint():
    # drive the library's word through the oracle's independent propagator
    start = np.array([0.0, -1.0, 0.0])
    goal = np.array([0.4, 0.3, 2.0])
    res = shortest_path(Pose(*start), Pose(*goal), rho=0.1)
    end = propagate_word(start, res.word, res.lengths, 0.1)
    assert np.hypot(end[0] - goal[0], end[1] - goal[1]) < 1e-9


def test_completion_steps():
    assert completion_steps(0.0, v_max=0.5, ts=0.4) == 0
    assert completion_steps(1.0, v_max=0.5, ts=0.4) == 5  # exactly 5 steps
    assert completion_steps(1.01, v_max=0.5, ts=0.4) == 6
    assert completion_steps(0.19, v_max=0.5, ts=0.4) == 1
    with pytest.raises(ValueError):
        completion_steps(1.0, v_max=0.0, ts=0.4)


def test_pose_from_state_identity():
    pose = pose_from_state(np.array([0.3, -1.2, 0.7]))
    assert pose == Pose(0.3, -1.2, 0.7)
    with pytest.raises(ValueError):
        pose_from_state(np.zeros(4))


def test_result_fields():
    res = shortest_path(Pose(0, 0, 0), Pose(0, 3, 0), rho=1.0)
    assert isinstance(res, DubinsResult)
    assert res.word in {"LSL", "RSR", "LSR", "RSL", "RLR", "LRL"}
    assert len(res.lengths) == 3
    assert all(l >= -1e-12 for l in res.lengths)
    assert res.rho == 1.0
