"""Builds the scenario cone programs: shared-prefix controls, norm epigraphs.

Two builders share one variable layout. The plain builder transcribes the
convex relaxation for linear dynamics directly: per-particle states over
steps 1..Gamma, controls over 1..Gamma-1 with the first Tc-1 steps
represented by a single consensus block shared by every particle, and one
epigraph scalar per (particle, step) carrying the weighted norm cost. The
trust-region builder wraps the same skeleton around dynamics linearized
along a reference: equalities gain virtual-control slack splits, and a
single scalar tau bounds every normalized deviation from the reference,
entering the objective as an infinity-norm penalty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .conic import ConicProgram, SecondOrderCone
from .models import DynamicsModel, LinearDynamics, linearize_along
from .soncost import WeightSequence
from .stochastic import ParticleEnsemble

__all__ = [
    "SolveConfig",
    "VariableLayout",
    "build_problem4_linear",
    "build_ptr_subproblem",
    "with_initial_states",
    "ScalingMap",
]


@dataclass(frozen=True, eq=False)
class SolveConfig:
    """Problem dimensions, weights, and trust-region parameters.

    gamma counts state steps (states 1..gamma, controls 1..gamma-1); tc is
    the consensus horizon (controls before step tc are shared). The
    trust-region fields only matter on the linearized path.
    """

    gamma: int
    tc: int
    weights: WeightSequence
    control_lower: np.ndarray
    control_upper: np.ndarray
    omega_vc: float = 1e2
    omega_tr: float = 1e-2
    delta_tol: float = 5e-3
    trust_norm: float = math.inf
    feas_tol: float = 1e-8
    max_scp_iter: int = 30
    nu_tol: float = 1e-5
    guess_control: Optional[np.ndarray] = None
    scaling_margin: float = 0.1

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.control_lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.control_upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("control bounds must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("control bounds must be finite")
        if not np.all(lo < hi):
            raise ValueError("control bounds must satisfy lower < upper")
        if self.gamma < 2:
            raise ValueError("gamma must be at least 2")
        if not (2 <= self.tc <= self.gamma):
            raise ValueError(f"consensus horizon tc={self.tc} must satisfy 2 <= tc <= gamma={self.gamma}")
        if self.weights.horizon != self.gamma:
            raise ValueError(
                f"weights cover {self.weights.horizon} steps, gamma is {self.gamma}"
            )
        if self.omega_vc <= 0 or self.omega_tr <= 0:
            raise ValueError("omega_vc and omega_tr must be positive")
        if self.delta_tol <= 0 or self.feas_tol <= 0:
            raise ValueError("delta_tol and feas_tol must be positive")
        if not math.isinf(self.trust_norm):
            raise ValueError("only the infinity-norm trust region is implemented")
        if self.max_scp_iter < 1:
            raise ValueError("max_scp_iter must be at least 1")
        guess = self.guess_control
        if guess is not None:
            guess = np.atleast_1d(np.asarray(guess, dtype=float))
            if guess.shape != lo.shape:
                raise ValueError("guess_control must match the control dimension")
            guess.setflags(write=False)
        for arr in (lo, hi):
            arr.setflags(write=False)
        object.__setattr__(self, "control_lower", lo)
        object.__setattr__(self, "control_upper", hi)
        object.__setattr__(self, "guess_control", guess)

    @classmethod
    def for_model(cls, model: DynamicsModel, gamma: int, tc: int,
                  weights: WeightSequence, **kwargs) -> "SolveConfig":
        """Config with control bounds taken from the model."""
        return cls(
            gamma=gamma, tc=tc, weights=weights,
            control_lower=model.control_lower, control_upper=model.control_upper,
            **kwargs,
        )

    @property
    def n_u(self) -> int:
        return self.control_lower.shape[0]


@dataclass(frozen=True, eq=False)
class VariableLayout:
    """Index bookkeeping for one transcribed program.

    Variable order: per-particle states, the shared consensus control
    block, per-particle free controls, epigraph scalars, then (linearized
    path only) virtual-control splits, the trust-region scalar, and the
    inequality slacks. Equality row order: initial-state pins first (so
    callers can re-target a built program by patching the right-hand
    side), then dynamics rows, then trust-region rows.
    """

    m: int
    gamma: int
    n_x: int
    n_u: int
    tc: int
    has_ptr: bool
    n_vars: int
    off_consensus: int
    off_free: int
    off_epigraph: int
    off_nu_plus: int
    off_nu_minus: int
    off_tau: int
    off_slack: int
    n_tr_components: int

    # ---- variable index helpers (k is 1-based throughout) ----

    def x_idx(self, i: int, k: int) -> np.ndarray:
        if not (1 <= k <= self.gamma):
            raise IndexError(f"state step {k} outside 1..{self.gamma}")
        start = (i * self.gamma + (k - 1)) * self.n_x
        return np.arange(start, start + self.n_x)

    def ubar_idx(self, k: int) -> np.ndarray:
        if not (1 <= k < self.tc):
            raise IndexError(f"consensus step {k} outside 1..{self.tc - 1}")
        start = self.off_consensus + (k - 1) * self.n_u
        return np.arange(start, start + self.n_u)

    def u_idx(self, i: int, k: int) -> np.ndarray:
        """Control indices for particle i at step k; the consensus block
        is returned for every particle when k < tc (it is one variable)."""
        if not (1 <= k <= self.gamma - 1):
            raise IndexError(f"control step {k} outside 1..{self.gamma - 1}")
        if k < self.tc:
            return self.ubar_idx(k)
        start = self.off_free + (i * (self.gamma - self.tc) + (k - self.tc)) * self.n_u
        return np.arange(start, start + self.n_u)

    def epi_idx(self, i: int, k: int) -> int:
        if not (1 <= k <= self.gamma):
            raise IndexError(f"epigraph step {k} outside 1..{self.gamma}")
        return self.off_epigraph + i * self.gamma + (k - 1)

    def nu_idx(self, i: int, k: int) -> Tuple[np.ndarray, np.ndarray]:
        """(positive, negative) split indices for the step-k dynamics row."""
        if not self.has_ptr:
            raise ValueError("layout has no virtual-control block")
        if not (1 <= k <= self.gamma - 1):
            raise IndexError(f"dynamics step {k} outside 1..{self.gamma - 1}")
        start = (i * (self.gamma - 1) + (k - 1)) * self.n_x
        plus = np.arange(self.off_nu_plus + start, self.off_nu_plus + start + self.n_x)
        minus = np.arange(self.off_nu_minus + start, self.off_nu_minus + start + self.n_x)
        return plus, minus

    @property
    def tau_idx(self) -> int:
        if not self.has_ptr:
            raise ValueError("layout has no trust-region scalar")
        return self.off_tau

    # ---- equality row helpers ----

    def initial_rows(self, i: int) -> slice:
        return slice(i * self.n_x, (i + 1) * self.n_x)

    def dynamics_rows(self, i: int, k: int) -> slice:
        base = self.m * self.n_x + (i * (self.gamma - 1) + (k - 1)) * self.n_x
        return slice(base, base + self.n_x)

    # ---- block counts (asserted in tests) ----

    @property
    def n_state_vars(self) -> int:
        return self.m * self.gamma * self.n_x

    @property
    def n_consensus_vars(self) -> int:
        return (self.tc - 1) * self.n_u

    @property
    def n_free_vars(self) -> int:
        return self.m * (self.gamma - self.tc) * self.n_u

    @property
    def n_epigraph_vars(self) -> int:
        return self.m * self.gamma

    # ---- solution extraction ----

    def states_from(self, x: np.ndarray) -> np.ndarray:
        return x[: self.n_state_vars].reshape(self.m, self.gamma, self.n_x)

    def consensus_from(self, x: np.ndarray) -> np.ndarray:
        return x[self.off_consensus : self.off_consensus + self.n_consensus_vars].reshape(
            self.tc - 1, self.n_u
        )

    def controls_from(self, x: np.ndarray) -> np.ndarray:
        """(m, gamma-1, n_u) controls with the consensus block substituted."""
        out = np.empty((self.m, self.gamma - 1, self.n_u))
        cons = self.consensus_from(x)
        out[:, : self.tc - 1, :] = cons
        if self.gamma > self.tc:
            free = x[self.off_free : self.off_free + self.n_free_vars]
            out[:, self.tc - 1 :, :] = free.reshape(self.m, self.gamma - self.tc, self.n_u)
        return out

    def nu_from(self, x: np.ndarray) -> np.ndarray:
        """(m, gamma-1, n_x) virtual control nu = nu_plus - nu_minus."""
        if not self.has_ptr:
            raise ValueError("layout has no virtual-control block")
        size = self.m * (self.gamma - 1) * self.n_x
        plus = x[self.off_nu_plus : self.off_nu_plus + size]
        minus = x[self.off_nu_minus : self.off_nu_minus + size]
        return (plus - minus).reshape(self.m, self.gamma - 1, self.n_x)


def _make_layout(m: int, gamma: int, n_x: int, n_u: int, tc: int,
                 ptr: bool, n_tr_components: int = 0) -> VariableLayout:
    off_consensus = m * gamma * n_x
    off_free = off_consensus + (tc - 1) * n_u
    off_epigraph = off_free + m * (gamma - tc) * n_u
    base = off_epigraph + m * gamma
    if ptr:
        nu_size = m * (gamma - 1) * n_x
        off_nu_plus = base
        off_nu_minus = off_nu_plus + nu_size
        off_tau = off_nu_minus + nu_size
        off_slack = off_tau + 1
        n_vars = off_slack + 2 * n_tr_components
    else:
        off_nu_plus = off_nu_minus = off_tau = off_slack = base
        n_vars = base
    return VariableLayout(
        m=m, gamma=gamma, n_x=n_x, n_u=n_u, tc=tc, has_ptr=ptr, n_vars=n_vars,
        off_consensus=off_consensus, off_free=off_free, off_epigraph=off_epigraph,
        off_nu_plus=off_nu_plus, off_nu_minus=off_nu_minus, off_tau=off_tau,
        off_slack=off_slack, n_tr_components=n_tr_components,
    )


class _Triplets:
    """COO accumulator for the equality matrix."""

    def __init__(self):
        self.rows: List[np.ndarray] = []
        self.cols: List[np.ndarray] = []
        self.data: List[np.ndarray] = []

    def add_block(self, row_start: int, cols: np.ndarray, block: np.ndarray):
        n_r, n_c = block.shape
        self.rows.append(np.repeat(np.arange(row_start, row_start + n_r), n_c))
        self.cols.append(np.tile(cols, n_r))
        self.data.append(block.ravel())

    def add_entries(self, rows: np.ndarray, cols: np.ndarray, data: np.ndarray):
        self.rows.append(np.asarray(rows))
        self.cols.append(np.asarray(cols))
        self.data.append(np.asarray(data))

    def matrix(self, n_rows: int, n_cols: int) -> sp.csc_matrix:
        if not self.rows:
            return sp.csc_matrix((n_rows, n_cols))
        return sp.csc_matrix(
            (
                np.concatenate(self.data),
                (np.concatenate(self.rows), np.concatenate(self.cols)),
            ),
            shape=(n_rows, n_cols),
        )


def _base_skeleton(layout: VariableLayout, cfg: SolveConfig, ensemble: ParticleEnsemble):
    """Initial-state rows, bounds, epigraph objective, and cones shared by
    both builders. Returns (triplets, b_list, c, lower, upper, cones)."""
    m, gamma, n_x = layout.m, layout.gamma, layout.n_x
    tri = _Triplets()
    b_parts: List[np.ndarray] = []

    for i in range(m):
        rows = layout.initial_rows(i)
        tri.add_block(rows.start, layout.x_idx(i, 1), np.eye(n_x))
        b_parts.append(ensemble.particles[i])

    c = np.zeros(layout.n_vars)
    for i in range(m):
        for k in range(1, gamma + 1):
            c[layout.epi_idx(i, k)] = cfg.weights.values[k - 1] / m

    lower = np.full(layout.n_vars, -np.inf)
    upper = np.full(layout.n_vars, np.inf)
    for k in range(1, layout.tc):
        idx = layout.ubar_idx(k)
        lower[idx] = cfg.control_lower
        upper[idx] = cfg.control_upper
    for i in range(m):
        for k in range(layout.tc, gamma):
            idx = layout.u_idx(i, k)
            lower[idx] = cfg.control_lower
            upper[idx] = cfg.control_upper

    cones = tuple(
        SecondOrderCone(t=layout.epi_idx(i, k), z=tuple(layout.x_idx(i, k)))
        for i in range(m)
        for k in range(1, gamma + 1)
    )
    return tri, b_parts, c, lower, upper, cones


def build_problem4_linear(
    model: LinearDynamics, ensemble: ParticleEnsemble, cfg: SolveConfig
) -> Tuple[ConicProgram, VariableLayout]:
    """Transcribe the convex relaxation for a linear model.

    Equalities pin each particle's first state and encode x(k+1) =
    A x(k) + B u(k) over the whole horizon; controls are boxed; the
    objective is the weighted epigraph sum. No terminal constraint:
    reaching the origin is induced by the cost.
    """
    if not model.is_linear:
        raise ValueError("linear builder requires a linear model")
    _check_model_fits(model, ensemble, cfg)
    m, gamma, n_x = ensemble.m, cfg.gamma, model.state_dim
    layout = _make_layout(m, gamma, n_x, model.control_dim, cfg.tc, ptr=False)
    tri, b_parts, c, lower, upper, cones = _base_skeleton(layout, cfg, ensemble)

    neg_a = -model.a
    neg_b = -model.b
    eye = np.eye(n_x)
    for i in range(m):
        for k in range(1, gamma):
            rows = layout.dynamics_rows(i, k)
            tri.add_block(rows.start, layout.x_idx(i, k + 1), eye)
            tri.add_block(rows.start, layout.x_idx(i, k), neg_a)
            tri.add_block(rows.start, layout.u_idx(i, k), neg_b)
            b_parts.append(np.zeros(n_x))

    n_rows = m * n_x + m * (gamma - 1) * n_x
    prog = ConicProgram(
        c=c,
        a_eq=tri.matrix(n_rows, layout.n_vars),
        b_eq=np.concatenate(b_parts),
        lower=lower,
        upper=upper,
        cones=cones,
    )
    return prog, layout


def build_ptr_subproblem(
    model: DynamicsModel,
    ensemble: ParticleEnsemble,
    cfg: SolveConfig,
    ref_states: np.ndarray,
    ref_controls: np.ndarray,
    scales: "ScalingMap",
) -> Tuple[ConicProgram, VariableLayout]:
    """Transcribe one linearized subproblem around a reference.

    Dynamics along the reference gain a virtual-control split (x(k+1) =
    A_k x(k) + B_k u(k) + c_k + nu_plus - nu_minus, both splits
    nonnegative) penalized through omega_vc in normalized units, and a
    scalar tau bounds every normalized state/control deviation from the
    reference, penalized through omega_tr. ref_states is (m, gamma, n_x),
    ref_controls (m, gamma-1, n_u).
    """
    _check_model_fits(model, ensemble, cfg)
    m, gamma = ensemble.m, cfg.gamma
    n_x, n_u = model.state_dim, model.control_dim
    if ref_states.shape != (m, gamma, n_x):
        raise ValueError(f"reference states must be {(m, gamma, n_x)}, got {ref_states.shape}")
    if ref_controls.shape != (m, gamma - 1, n_u):
        raise ValueError(
            f"reference controls must be {(m, gamma - 1, n_u)}, got {ref_controls.shape}"
        )
    state_span, control_span = scales.spans()

    # deviation components: every state, plus each distinct control variable
    # (the shared consensus block counts once, against particle 0's reference)
    n_tr = m * gamma * n_x + (cfg.tc - 1) * n_u + m * (gamma - cfg.tc) * n_u
    layout = _make_layout(m, gamma, n_x, n_u, cfg.tc, ptr=True, n_tr_components=n_tr)
    tri, b_parts, c, lower, upper, cones = _base_skeleton(layout, cfg, ensemble)

    eye = np.eye(n_x)
    nu_weight = cfg.omega_vc / state_span
    for i in range(m):
        jacs = linearize_along(model, ref_states[i], ref_controls[i])
        for k in range(1, gamma):
            a_k, b_k, c_k = jacs[k - 1]
            rows = layout.dynamics_rows(i, k)
            tri.add_block(rows.start, layout.x_idx(i, k + 1), eye)
            tri.add_block(rows.start, layout.x_idx(i, k), -a_k)
            tri.add_block(rows.start, layout.u_idx(i, k), -b_k)
            plus, minus = layout.nu_idx(i, k)
            tri.add_block(rows.start, plus, -eye)
            tri.add_block(rows.start, minus, eye)
            b_parts.append(c_k)
            c[plus] = nu_weight
            c[minus] = nu_weight
            lower[plus] = 0.0
            lower[minus] = 0.0

    tau = layout.tau_idx
    c[tau] = cfg.omega_tr
    lower[tau] = 0.0

    # trust-region rows: +-(v - ref)/span <= tau, one slack per inequality
    tr_vars: List[int] = []
    tr_refs: List[float] = []
    tr_spans: List[float] = []
    for i in range(m):
        for k in range(1, gamma + 1):
            for j, var in enumerate(layout.x_idx(i, k)):
                tr_vars.append(int(var))
                tr_refs.append(float(ref_states[i, k - 1, j]))
                tr_spans.append(float(state_span[j]))
    for k in range(1, cfg.tc):
        for j, var in enumerate(layout.ubar_idx(k)):
            tr_vars.append(int(var))
            tr_refs.append(float(ref_controls[0, k - 1, j]))
            tr_spans.append(float(control_span[j]))
    for i in range(m):
        for k in range(cfg.tc, gamma):
            for j, var in enumerate(layout.u_idx(i, k)):
                tr_vars.append(int(var))
                tr_refs.append(float(ref_controls[i, k - 1, j]))
                tr_spans.append(float(control_span[j]))
    assert len(tr_vars) == n_tr

    row0 = layout.m * n_x + m * (gamma - 1) * n_x
    var_arr = np.array(tr_vars)
    ref_arr = np.array(tr_refs)
    span_arr = np.array(tr_spans)
    inv_span = 1.0 / span_arr
    slack_arr = layout.off_slack + np.arange(2 * n_tr)
    rows_plus = row0 + np.arange(n_tr)
    rows_minus = row0 + n_tr + np.arange(n_tr)
    # v/span - tau + s = ref/span
    tri.add_entries(rows_plus, var_arr, inv_span)
    tri.add_entries(rows_plus, np.full(n_tr, tau), -np.ones(n_tr))
    tri.add_entries(rows_plus, slack_arr[:n_tr], np.ones(n_tr))
    # -v/span - tau + s = -ref/span
    tri.add_entries(rows_minus, var_arr, -inv_span)
    tri.add_entries(rows_minus, np.full(n_tr, tau), -np.ones(n_tr))
    tri.add_entries(rows_minus, slack_arr[n_tr:], np.ones(n_tr))
    b_parts.append(ref_arr * inv_span)
    b_parts.append(-ref_arr * inv_span)
    lower[slack_arr] = 0.0

    n_rows = row0 + 2 * n_tr
    prog = ConicProgram(
        c=c,
        a_eq=tri.matrix(n_rows, layout.n_vars),
        b_eq=np.concatenate(b_parts),
        lower=lower,
        upper=upper,
        cones=cones,
    )
    return prog, layout


def with_initial_states(
    prog: ConicProgram, layout: VariableLayout, particles: np.ndarray
) -> ConicProgram:
    """Same program re-targeted at new initial states (right-hand side patch).

    Reuses the matrix, bounds, and cones; only the pinned initial-state
    rows change, which makes repeated solves over fresh samples cheap.
    """
    particles = np.atleast_2d(np.asarray(particles, dtype=float))
    if particles.shape != (layout.m, layout.n_x):
        raise ValueError(f"need {(layout.m, layout.n_x)} initial states, got {particles.shape}")
    b = prog.b_eq.copy()
    for i in range(layout.m):
        b[layout.initial_rows(i)] = particles[i]
    return ConicProgram(
        c=prog.c, a_eq=prog.a_eq, b_eq=b,
        lower=prog.lower, upper=prog.upper, cones=prog.cones,
    )


def _check_model_fits(model: DynamicsModel, ensemble: ParticleEnsemble, cfg: SolveConfig):
    if ensemble.state_dim != model.state_dim:
        raise ValueError(
            f"ensemble states have dimension {ensemble.state_dim}, model expects {model.state_dim}"
        )
    if cfg.n_u != model.control_dim:
        raise ValueError(
            f"config control bounds have dimension {cfg.n_u}, model expects {model.control_dim}"
        )


class ScalingMap:
    """Per-dimension affine normalization to [0, 1] for states and controls.

    Stored as (lower, width) pairs; normalize maps physical values v to
    (v - lower)/width. Used by the trust-region builder for deviation
    spans and by the iteration loop for its convergence metric.
    """

    def __init__(self, state_lower: np.ndarray, state_upper: np.ndarray,
                 control_lower: np.ndarray, control_upper: np.ndarray):
        state_lower = np.asarray(state_lower, dtype=float)
        state_upper = np.asarray(state_upper, dtype=float)
        control_lower = np.asarray(control_lower, dtype=float)
        control_upper = np.asarray(control_upper, dtype=float)
        if state_lower.shape != state_upper.shape or control_lower.shape != control_upper.shape:
            raise ValueError("bound shapes disagree")
        state_span = state_upper - state_lower
        control_span = control_upper - control_lower
        if np.any(state_span <= 0) or np.any(control_span <= 0):
            raise ValueError("scaling spans must be positive")
        self.state_lower = state_lower
        self.state_span = state_span
        self.control_lower = control_lower
        self.control_span = control_span

    def spans(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.state_span, self.control_span

    def normalize_states(self, states: np.ndarray) -> np.ndarray:
        return (states - self.state_lower) / self.state_span

    def normalize_controls(self, controls: np.ndarray) -> np.ndarray:
        return (controls - self.control_lower) / self.control_span
