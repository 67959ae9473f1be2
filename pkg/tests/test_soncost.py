"""Weighted sum-of-norm cost: hand-computed values, invariances, terminal steps."""

import numpy as np
import pytest

from etoc.soncost import (
    WEIGHT_KINDS,
    check_persistence,
    custom_weights,
    expected_sonc_cost,
    terminal_report,
    terminal_step,
    weight_sequence,
)


def test_weight_profiles():
    gamma = 5  # steps k = 1..5
    k = np.arange(1, 6, dtype=float)
    assert np.array_equal(weight_sequence("const", gamma).values, np.ones(5))
    assert np.array_equal(weight_sequence("lin", gamma).values, k)
    assert np.array_equal(weight_sequence("quad", gamma).values, k ** 2)
    assert weight_sequence("quad", gamma).values[2] == 9.0  # k=3 -> 9


def test_log_weight_clamped_at_first_step():
    ws = weight_sequence("log", 4)
    assert ws.values[0] == 1e-6  # ln 1 = 0 violates positivity, clamped
    assert np.allclose(ws.values[1:], np.log([2.0, 3.0, 4.0]))
    assert np.all(ws.values > 0)


def test_weight_validation():
    with pytest.raises(ValueError):
        weight_sequence("cubic", 5)
    with pytest.raises(ValueError):
        weight_sequence("lin", 1)
    for kind in WEIGHT_KINDS:
        ws = weight_sequence(kind, 7)
        assert ws.horizon == 7
        assert np.all(ws.values > 0)
        assert np.all(np.diff(ws.values) >= 0)


def test_custom_weights():
    ws = custom_weights([1.0, 1.5, 4.0])
    assert ws.kind == "custom" and ws.horizon == 3
    with pytest.raises(ValueError):
        custom_weights([1.0, 0.5])  # decreasing
    with pytest.raises(ValueError):
        custom_weights([0.0, 1.0])  # not positive


def test_cost_hand_example_lin():
    # m=2, Gamma=2, lin weights w = [1, 2]
    # particle 1 norms [1, 0]: 1*1 + 2*0 = 1
    # particle 2 norms [0, 1]: 1*0 + 2*1 = 2   -> mean 1.5
    t1 = np.array([[1.0, 0.0], [0.0, 0.0]])
    t2 = np.array([[0.0, 0.0], [0.0, 1.0]])
    ws = weight_sequence("lin", 2)
    assert expected_sonc_cost([t1, t2], ws) == pytest.approx(1.5)


def test_cost_hand_example_const():
    # single particle, const weights, norms [2, 1, 0] -> 3
    traj = np.array([[2.0], [1.0], [0.0]])
    ws = weight_sequence("const", 3)
    assert expected_sonc_cost([traj], ws) == pytest.approx(3.0)


def test_cost_zero_trajectories():
    ws = weight_sequence("quad", 4)
    assert expected_sonc_cost([np.zeros((4, 3))] * 5, ws) == 0.0


def test_cost_permutation_invariance():
    rng = np.random.default_rng(0)
    trajs = [rng.normal(size=(6, 3)) for _ in range(4)]
    ws = weight_sequence("quad", 6)
    assert expected_sonc_cost(trajs, ws) == pytest.approx(
        expected_sonc_cost(list(reversed(trajs)), ws)
    )


def test_cost_positive_homogeneity():
    rng = np.random.default_rng(1)
    trajs = [rng.normal(size=(5, 2)) for _ in range(3)]
    ws = weight_sequence("lin", 5)
    base = expected_sonc_cost(trajs, ws)
    assert expected_sonc_cost([3.0 * t for t in trajs], ws) == pytest.approx(3.0 * base)


def test_cost_shape_mismatch():
    ws = weight_sequence("lin", 4)
    with pytest.raises(ValueError):
        expected_sonc_cost([np.zeros((3, 2))], ws)
    with pytest.raises(ValueError):
        expected_sonc_cost([], ws)


def test_terminal_step_examples():
    tol = 1e-3
    # norms [1, 0.5, 0, 0]: zero from step 3 on -> 3
    assert terminal_step(np.array([[1.0], [0.5], [0.0], [0.0]]), tol) == 3
    # norms [1, 0, 0.5, 0]: transient zero at k=2 does not count -> 4
    assert terminal_step(np.array([[1.0], [0.0], [0.5], [0.0]]), tol) == 4
    # never settles -> not converged
    assert terminal_step(np.array([[1.0], [1.0], [1.0]]), tol) is None
    # zero only at the final step still counts (k = Gamma)
    assert terminal_step(np.array([[2.0], [1.0], [0.0]]), tol) == 3
    # starts at zero and stays
    assert terminal_step(np.zeros((5, 2)), tol) == 1


def test_terminal_step_l0_identity():
    # exactly sparse profile: terminal step = 1 + number of nonzero norms
    traj = np.array([[1.0], [0.5], [0.0], [0.0]])
    norms = np.linalg.norm(traj, axis=1)
    assert terminal_step(traj, 1e-12) == 1 + np.count_nonzero(norms)


def test_terminal_step_tolerance_sensitivity():
    traj = np.array([[1.0], [1e-8], [1e-8]])
    assert terminal_step(traj, tol=1e-6) == 2
    assert terminal_step(traj, tol=1e-9) is None
    with pytest.raises(ValueError):
        terminal_step(traj, tol=0.0)


def test_check_persistence():
    assert check_persistence(np.array([[1.0], [0.5], [0.0], [0.0]]), tol=1e-9)
    assert not check_persistence(np.array([[1.0], [0.0], [0.5], [0.0]]), tol=1e-9)
    # never reaching tol is vacuously persistent
    assert check_persistence(np.ones((4, 1)), tol=1e-9)
    # tolerance large enough to absorb the revisit
    assert check_persistence(np.array([[1.0], [0.0], [0.5], [0.0]]), tol=0.5)


def test_terminal_report():
    t1 = np.array([[1.0], [0.0], [0.0]])
    t2 = np.array([[1.0], [1.0], [0.0]])
    rep = terminal_report([t1, t2], tol=1e-3)
    assert rep.terminal_steps.tolist() == [2, 3]
    assert rep.mean_terminal == pytest.approx(2.5)
    assert rep.all_converged and rep.persistent

    never = np.ones((3, 1))
    rep2 = terminal_report([t1, never], tol=1e-3)
    assert rep2.terminal_steps.tolist() == [2, -1]
    assert not rep2.all_converged
    assert rep2.mean_terminal == pytest.approx(2.0)  # converged particles only

    bad = np.array([[1.0], [0.0], [1.0]])
    assert not terminal_report([bad], tol=1e-3).persistent
    with pytest.raises(ValueError):
        terminal_report([], tol=1e-3)
