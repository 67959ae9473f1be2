"""Standard-form second-order cone programs and a deterministic solver backend.

A program is

    minimize    c'x
    subject to  A x = b
                lower <= x <= upper     (entries may be +-inf)
                || x[z] || <= x[t]      for each cone (t, z)

which is exactly the shape every subproblem in this library takes: the
epigraph variables t carry the norm costs, the boxes carry control limits
and trust regions, and the equalities carry dynamics. The backend
translates to Clarabel's form (A x + s = b, s in K) by moving each
constraint family into the matching cone block; Clarabel is an
interior-point method, so repeated solves of the same program give
bit-identical answers.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

import clarabel

__all__ = [
    "SecondOrderCone",
    "ConicProgram",
    "ConicSolution",
    "SolverSettings",
    "solve",
    "dump_program",
    "load_program",
]


@dataclass(frozen=True)
class SecondOrderCone:
    """Indices (t, z) encoding || x[z] || <= x[t]."""

    t: int
    z: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "z", tuple(int(i) for i in self.z))
        object.__setattr__(self, "t", int(self.t))
        if len(self.z) == 0:
            raise ValueError("cone needs at least one norm coordinate")
        if self.t in self.z:
            raise ValueError(f"cone t index {self.t} reappears in z")


@dataclass(frozen=True, eq=False)
class ConicProgram:
    """Immutable standard-form program; validated once at construction."""

    c: np.ndarray
    a_eq: sp.csc_matrix
    b_eq: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    cones: Tuple[SecondOrderCone, ...] = ()

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        n = c.shape[0]
        a = sp.csc_matrix(self.a_eq, dtype=float)
        b = np.asarray(self.b_eq, dtype=float)
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if a.shape[1] != n:
            raise ValueError(f"A has {a.shape[1]} columns for {n} variables")
        if b.shape != (a.shape[0],):
            raise ValueError(f"b has shape {b.shape}, expected ({a.shape[0]},)")
        if lower.shape != (n,) or upper.shape != (n,):
            raise ValueError("bounds must match the variable count")
        if not np.all(lower <= upper):
            j = int(np.argmax(lower > upper))
            raise ValueError(f"empty box on variable {j}: [{lower[j]}, {upper[j]}]")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(b))):
            raise ValueError("objective and equality right-hand side must be finite")
        cones = tuple(self.cones)
        seen_t: set = set()
        for cone in cones:
            if not (0 <= cone.t < n) or any(not (0 <= i < n) for i in cone.z):
                raise ValueError(f"cone {cone} references variables outside 0..{n - 1}")
            if cone.t in seen_t:
                raise ValueError(f"variable {cone.t} is the t slot of two cones")
            seen_t.add(cone.t)
        for arr in (c, b, lower, upper):
            arr.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "a_eq", a)
        object.__setattr__(self, "b_eq", b)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "cones", cones)

    @property
    def n(self) -> int:
        return self.c.shape[0]

    @property
    def n_eq(self) -> int:
        return self.b_eq.shape[0]


@dataclass(frozen=True, eq=False)
class SolverSettings:
    """Backend knobs; defaults match the experiments in this package."""

    feas_tol: float = 1e-8
    max_iter: int = 200
    verbose: bool = False
    time_limit: float = 0.0  # seconds; 0 disables


@dataclass(frozen=True, eq=False)
class ConicSolution:
    """Solver outcome; x is populated only when status is "optimal"."""

    status: str  # optimal | infeasible | unbounded | max_iter | numerical
    x: Optional[np.ndarray]
    objective: Optional[float]
    iterations: int
    solve_time: float
    primal_residual: float
    dual_residual: float
    feas_tol: float

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


_STATUS_MAP = {
    "Solved": "optimal",
    "AlmostSolved": "optimal",
    "PrimalInfeasible": "infeasible",
    "AlmostPrimalInfeasible": "infeasible",
    "DualInfeasible": "unbounded",
    "AlmostDualInfeasible": "unbounded",
    "MaxIterations": "max_iter",
    "MaxTime": "max_iter",
}


def _to_backend(prog: ConicProgram):
    """Rows and cone blocks in Clarabel's A x + s = b, s in K form."""
    n = prog.n
    rows: List[sp.csc_matrix] = []
    rhs: List[np.ndarray] = []
    cones: List = []

    if prog.n_eq:
        rows.append(prog.a_eq)
        rhs.append(prog.b_eq)
        cones.append(clarabel.ZeroConeT(prog.n_eq))

    fin_up = np.flatnonzero(np.isfinite(prog.upper))
    fin_lo = np.flatnonzero(np.isfinite(prog.lower))
    n_box = fin_up.size + fin_lo.size
    if n_box:
        data = np.concatenate([np.ones(fin_up.size), -np.ones(fin_lo.size)])
        r = np.arange(n_box)
        col = np.concatenate([fin_up, fin_lo])
        rows.append(sp.csc_matrix((data, (r, col)), shape=(n_box, n)))
        rhs.append(np.concatenate([prog.upper[fin_up], -prog.lower[fin_lo]]))
        cones.append(clarabel.NonnegativeConeT(int(n_box)))

    for cone in prog.cones:
        dim = 1 + len(cone.z)
        col = np.array([cone.t, *cone.z])
        block = sp.csc_matrix((-np.ones(dim), (np.arange(dim), col)), shape=(dim, n))
        rows.append(block)
        rhs.append(np.zeros(dim))
        cones.append(clarabel.SecondOrderConeT(dim))

    a = sp.vstack(rows, format="csc") if rows else sp.csc_matrix((0, n))
    b = np.concatenate(rhs) if rhs else np.zeros(0)
    return a, b, cones


def solve(prog: ConicProgram, settings: Optional[SolverSettings] = None) -> ConicSolution:
    """Solve the program; never raises on solver-reported failure modes."""
    settings = settings or SolverSettings()
    a, b, cones = _to_backend(prog)
    p = sp.csc_matrix((prog.n, prog.n))

    opts = clarabel.DefaultSettings()
    opts.verbose = settings.verbose
    opts.max_iter = settings.max_iter
    opts.tol_feas = settings.feas_tol
    opts.tol_gap_abs = settings.feas_tol
    opts.tol_gap_rel = settings.feas_tol
    if settings.time_limit > 0:
        opts.time_limit = settings.time_limit

    t0 = time.perf_counter()
    solver = clarabel.DefaultSolver(p, prog.c, a, b, cones, opts)
    result = solver.solve()
    wall = time.perf_counter() - t0

    status = _STATUS_MAP.get(str(result.status), "numerical")
    x = np.asarray(result.x, dtype=float) if status == "optimal" else None
    objective = float(prog.c @ x) if x is not None else None
    return ConicSolution(
        status=status,
        x=x,
        objective=objective,
        iterations=int(result.iterations),
        solve_time=wall,
        primal_residual=float(result.r_prim),
        dual_residual=float(result.r_dual),
        feas_tol=settings.feas_tol,
    )


def dump_program(prog: ConicProgram, path: str) -> None:
    """Write the program to a JSON file for offline inspection."""
    coo = prog.a_eq.tocoo()

    def encode_bound(v: float):
        if v == np.inf:
            return "inf"
        if v == -np.inf:
            return "-inf"
        return v

    payload = {
        "n": prog.n,
        "c": prog.c.tolist(),
        "a_eq": {
            "shape": list(prog.a_eq.shape),
            "row": coo.row.tolist(),
            "col": coo.col.tolist(),
            "data": coo.data.tolist(),
        },
        "b_eq": prog.b_eq.tolist(),
        "lower": [encode_bound(v) for v in prog.lower],
        "upper": [encode_bound(v) for v in prog.upper],
        "cones": [{"t": cone.t, "z": list(cone.z)} for cone in prog.cones],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_program(path: str) -> ConicProgram:
    """Inverse of dump_program."""
    with open(path) as fh:
        payload = json.load(fh)

    def decode_bound(v):
        if v == "inf":
            return np.inf
        if v == "-inf":
            return -np.inf
        return float(v)

    a_spec = payload["a_eq"]
    a = sp.csc_matrix(
        (a_spec["data"], (a_spec["row"], a_spec["col"])), shape=tuple(a_spec["shape"])
    )
    return ConicProgram(
        c=np.array(payload["c"], dtype=float),
        a_eq=a,
        b_eq=np.array(payload["b_eq"], dtype=float),
        lower=np.array([decode_bound(v) for v in payload["lower"]]),
        upper=np.array([decode_bound(v) for v in payload["upper"]]),
        cones=tuple(SecondOrderCone(t=c["t"], z=tuple(c["z"])) for c in payload["cones"]),
    )
