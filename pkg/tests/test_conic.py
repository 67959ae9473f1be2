"""Cone programs: validation, backend translation, cross-check vs barrier oracle."""

import numpy as np
import pytest
import scipy.sparse as sp

from etoc.conic import (
    ConicProgram,
    SecondOrderCone,
    SolverSettings,
    dump_program,
    load_program,
    solve,
)

from _oracles import (
    BarrierSocp,
    random_strictly_feasible_socp,
    solve_socp_reference,
)


def simple_norm_program():
    # min t  s.t.  z = (3, 4), ||z|| <= t
    return ConicProgram(
        c=np.array([1.0, 0.0, 0.0]),
        a_eq=sp.csc_matrix(np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])),
        b_eq=np.array([3.0, 4.0]),
        lower=np.array([-np.inf] * 3),
        upper=np.array([np.inf] * 3),
        cones=(SecondOrderCone(t=0, z=(1, 2)),),
    )


def test_norm_program_solves_to_hypotenuse():
    sol = solve(simple_norm_program())
    assert sol.status == "optimal" and sol.ok
    assert sol.objective == pytest.approx(5.0, abs=1e-6)
    assert sol.x[0] == pytest.approx(5.0, abs=1e-6)
    assert sol.iterations > 0 and sol.solve_time > 0
    assert sol.primal_residual <= 10 * sol.feas_tol


def test_box_lp():
    # min x1 + x2 over the box [-1, 2]^2  ->  -2 at (-1, -1)
    prog = ConicProgram(
        c=np.ones(2),
        a_eq=sp.csc_matrix((0, 2)),
        b_eq=np.zeros(0),
        lower=-np.ones(2),
        upper=2 * np.ones(2),
    )
    sol = solve(prog)
    assert sol.ok
    assert sol.objective == pytest.approx(-2.0, abs=1e-6)
    assert np.allclose(sol.x, [-1.0, -1.0], atol=1e-6)


def test_one_sided_bounds():
    # min x s.t. x >= 3 (upper infinite)
    prog = ConicProgram(
        c=np.array([1.0]),
        a_eq=sp.csc_matrix((0, 1)),
        b_eq=np.zeros(0),
        lower=np.array([3.0]),
        upper=np.array([np.inf]),
    )
    sol = solve(prog)
    assert sol.ok and sol.objective == pytest.approx(3.0, abs=1e-6)


def test_infeasible_detected():
    # x = 0 and x >= 1 cannot both hold
    prog = ConicProgram(
        c=np.array([0.0]),
        a_eq=sp.csc_matrix(np.array([[1.0]])),
        b_eq=np.array([0.0]),
        lower=np.array([1.0]),
        upper=np.array([np.inf]),
    )
    sol = solve(prog)
    assert sol.status == "infeasible"
    assert sol.x is None and sol.objective is None


def test_unbounded_detected():
    prog = ConicProgram(
        c=np.array([1.0]),
        a_eq=sp.csc_matrix((0, 1)),
        b_eq=np.zeros(0),
        lower=np.array([-np.inf]),
        upper=np.array([np.inf]),
    )
    sol = solve(prog)
    assert sol.status == "unbounded"


def test_validation_errors():
    with pytest.raises(ValueError):
        SecondOrderCone(t=0, z=())
    with pytest.raises(ValueError):
        SecondOrderCone(t=1, z=(1, 2))
    with pytest.raises(ValueError):  # empty box
        ConicProgram(
            c=np.zeros(1), a_eq=sp.csc_matrix((0, 1)), b_eq=np.zeros(0),
            lower=np.array([2.0]), upper=np.array([1.0]),
        )
    with pytest.raises(ValueError):  # cone index out of range
        ConicProgram(
            c=np.zeros(2), a_eq=sp.csc_matrix((0, 2)), b_eq=np.zeros(0),
            lower=np.full(2, -np.inf), upper=np.full(2, np.inf),
            cones=(SecondOrderCone(t=0, z=(5,)),),
        )
    with pytest.raises(ValueError):  # same t slot twice
        ConicProgram(
            c=np.zeros(3), a_eq=sp.csc_matrix((0, 3)), b_eq=np.zeros(0),
            lower=np.full(3, -np.inf), upper=np.full(3, np.inf),
            cones=(SecondOrderCone(t=0, z=(1,)), SecondOrderCone(t=0, z=(2,))),
        )
    with pytest.raises(ValueError):  # b shape mismatch
        ConicProgram(
            c=np.zeros(2), a_eq=sp.csc_matrix(np.eye(2)), b_eq=np.zeros(3),
            lower=np.full(2, -np.inf), upper=np.full(2, np.inf),
        )


def test_objective_scaling_invariance():
    prog = simple_norm_program()
    scaled = ConicProgram(
        c=7.0 * prog.c, a_eq=prog.a_eq, b_eq=prog.b_eq,
        lower=prog.lower, upper=prog.upper, cones=prog.cones,
    )
    s1, s2 = solve(prog), solve(scaled)
    assert s2.objective == pytest.approx(7.0 * s1.objective, rel=1e-6)
    assert np.allclose(s1.x, s2.x, atol=1e-5)


def test_deterministic_resolve():
    prog = simple_norm_program()
    s1, s2 = solve(prog), solve(prog)
    assert np.array_equal(s1.x, s2.x)
    assert s1.objective == s2.objective


def test_dump_load_round_trip(tmp_path):
    prog = ConicProgram(
        c=np.array([1.0, -2.0, 0.5]),
        a_eq=sp.csc_matrix(np.array([[1.0, 1.0, 0.0]])),
        b_eq=np.array([2.0]),
        lower=np.array([-np.inf, 0.0, -1.0]),
        upper=np.array([np.inf, np.inf, 1.0]),
        cones=(SecondOrderCone(t=1, z=(2,)),),
    )
    path = str(tmp_path / "prog.json")
    dump_program(prog, path)
    back = load_program(path)
    assert np.array_equal(back.c, prog.c)
    assert np.array_equal(back.b_eq, prog.b_eq)
    assert np.array_equal(back.lower, prog.lower)
    assert np.array_equal(back.upper, prog.upper)
    assert (back.a_eq != prog.a_eq).nnz == 0
    assert back.cones == prog.cones
    assert solve(back).objective == pytest.approx(solve(prog).objective, abs=1e-9)


def oracle_to_program(ref: BarrierSocp) -> ConicProgram:
    return ConicProgram(
        c=ref.c,
        a_eq=sp.csc_matrix(ref.a_eq),
        b_eq=ref.b_eq,
        lower=ref.lower,
        upper=ref.upper,
        cones=tuple(SecondOrderCone(t=t, z=z) for t, z in ref.cones),
    )


def test_matches_barrier_oracle_on_random_programs():
    mismatches = []
    for seed in range(110):
        ref = random_strictly_feasible_socp(seed)
        sol = solve(oracle_to_program(ref), SolverSettings(feas_tol=1e-9))
        assert sol.ok, f"seed {seed}: solver returned {sol.status}"
        _, obj_ref = solve_socp_reference(ref)
        rel = abs(sol.objective - obj_ref) / max(1.0, abs(obj_ref))
        if rel > 1e-5:
            mismatches.append((seed, sol.objective, obj_ref, rel))
    assert not mismatches, f"objective mismatches: {mismatches[:5]}"


def test_weak_duality_holds_against_oracle():
    # the solver's optimum can never beat the oracle's by more than tolerance
    for seed in (0, 7, 21):
        ref = random_strictly_feasible_socp(seed)
        sol = solve(oracle_to_program(ref))
        _, obj_ref = solve_socp_reference(ref)
        feas_point_obj = float(ref.c @ ref.x_strict)
        assert sol.objective <= feas_point_obj + 1e-7
        assert sol.objective <= obj_ref + 1e-5 * max(1.0, abs(obj_ref))
