"""Iteration loop around the transcribed subproblems.

Linear models need exactly one conic solve. Nonlinear models start from a
straight-line guess, normalize all variables to the guess envelope, and
repeat linearize-build-solve, replacing the reference with each new
solution, until the largest normalized change between successive iterates
falls below delta_tol and the virtual control has vanished. Diagnostics
(per-iteration deviation and virtual-control mass) ride along on the
returned solution.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .conic import ConicSolution, SolverSettings, solve
from .models import DynamicsModel
from .soncost import expected_sonc_cost
from .stochastic import ParticleEnsemble
from .transcription import (
    ScalingMap,
    SolveConfig,
    VariableLayout,
    build_problem4_linear,
    build_ptr_subproblem,
)

__all__ = [
    "TrajectorySolution",
    "SubproblemInfeasible",
    "initial_guess",
    "make_scaling",
    "solve_expected_time",
    "propagation_residual",
]

log = logging.getLogger("etoc.scp")


class SubproblemInfeasible(RuntimeError):
    """A conic subproblem failed; carries the iteration it happened at."""

    def __init__(self, iteration: int, status: str):
        super().__init__(f"subproblem at iteration {iteration} returned status {status!r}")
        self.iteration = iteration
        self.status = status


@dataclass(frozen=True, eq=False)
class TrajectorySolution:
    """Planned trajectories for every particle plus solve diagnostics.

    states is (m, gamma, n_x), controls (m, gamma-1, n_u) with the shared
    consensus prefix already substituted into every particle's row, and
    consensus (tc-1, n_u) the prefix itself. objective is the weighted
    sum-of-norm cost of the states (penalty terms excluded).
    """

    states: np.ndarray
    controls: np.ndarray
    consensus: np.ndarray
    objective: float
    iterations: int
    converged: bool
    deviation_history: Tuple[float, ...] = ()
    nu_history: Tuple[float, ...] = ()

    def __post_init__(self):
        for name in ("states", "controls", "consensus"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "deviation_history", tuple(self.deviation_history))
        object.__setattr__(self, "nu_history", tuple(self.nu_history))

    @property
    def m(self) -> int:
        return self.states.shape[0]


def initial_guess(
    model: DynamicsModel,
    ensemble: ParticleEnsemble,
    cfg: SolveConfig,
    x_f: Optional[np.ndarray] = None,
) -> TrajectorySolution:
    """Straight-line state interpolation with a constant control guess.

    Each particle's states run linearly from its sampled start to x_f
    (origin by default). The control guess is cfg.guess_control when set,
    otherwise zero for linear models and the control-box midpoint for
    nonlinear ones.
    """
    m, gamma = ensemble.m, cfg.gamma
    n_x, n_u = model.state_dim, model.control_dim
    x_f = np.zeros(n_x) if x_f is None else np.asarray(x_f, dtype=float)
    if x_f.shape != (n_x,):
        raise ValueError(f"x_f must have shape ({n_x},)")

    alphas = np.linspace(0.0, 1.0, gamma)[None, :, None]  # (1, gamma, 1)
    starts = ensemble.particles[:, None, :]  # (m, 1, n_x)
    states = starts + alphas * (x_f[None, None, :] - starts)

    if cfg.guess_control is not None:
        u0 = cfg.guess_control
    elif model.is_linear:
        u0 = np.zeros(n_u)
    else:
        u0 = 0.5 * (model.control_lower + model.control_upper)
    controls = np.broadcast_to(u0, (m, gamma - 1, n_u)).copy()
    consensus = np.broadcast_to(u0, (cfg.tc - 1, n_u)).copy()

    return TrajectorySolution(
        states=states, controls=controls, consensus=consensus,
        objective=expected_sonc_cost(list(states), cfg.weights),
        iterations=0, converged=False,
    )


def make_scaling(
    model: DynamicsModel,
    ensemble: ParticleEnsemble,
    cfg: SolveConfig,
    x_f: Optional[np.ndarray] = None,
) -> ScalingMap:
    """Normalization ranges: control boxes as-is, state envelope of the
    initial guess inflated by the configured margin, degenerate ranges
    repaired to unit width."""
    guess = initial_guess(model, ensemble, cfg, x_f)
    lo = guess.states.min(axis=(0, 1))
    hi = guess.states.max(axis=(0, 1))
    width = hi - lo
    pad = 0.5 * cfg.scaling_margin * width
    lo, hi = lo - pad, hi + pad
    degenerate = (hi - lo) < 1e-9
    lo = np.where(degenerate, lo - 0.5, lo)
    hi = np.where(degenerate, hi + 0.5, hi)
    return ScalingMap(
        state_lower=lo, state_upper=hi,
        control_lower=cfg.control_lower, control_upper=cfg.control_upper,
    )


def _extract(layout: VariableLayout, x: np.ndarray, cfg: SolveConfig) -> TrajectorySolution:
    states = layout.states_from(x)
    return TrajectorySolution(
        states=states,
        controls=layout.controls_from(x),
        consensus=layout.consensus_from(x),
        objective=expected_sonc_cost(list(states), cfg.weights),
        iterations=1,
        converged=True,
    )


def solve_expected_time(
    model: DynamicsModel,
    ensemble: ParticleEnsemble,
    cfg: SolveConfig,
    method: str = "auto",
) -> TrajectorySolution:
    """Plan consensus-prefix trajectories minimizing the expected cost.

    method "auto" picks the direct convex solve for linear models and the
    trust-region iteration otherwise; "direct" and "ptr" force a path
    (direct requires a linear model).
    """
    if method not in ("auto", "direct", "ptr"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto":
        method = "direct" if model.is_linear else "ptr"
    if method == "direct":
        if not model.is_linear:
            raise ValueError("direct method requires a linear model")
        prog, layout = build_problem4_linear(model, ensemble, cfg)
        sol = solve(prog, SolverSettings(feas_tol=cfg.feas_tol))
        if not sol.ok:
            raise SubproblemInfeasible(1, sol.status)
        return _extract(layout, sol.x, cfg)
    return _solve_ptr(model, ensemble, cfg)


def _solve_ptr(
    model: DynamicsModel, ensemble: ParticleEnsemble, cfg: SolveConfig
) -> TrajectorySolution:
    ref = initial_guess(model, ensemble, cfg)
    scales = make_scaling(model, ensemble, cfg)
    settings = SolverSettings(feas_tol=cfg.feas_tol)
    state_span, control_span = scales.spans()

    deviations: List[float] = []
    nu_mass: List[float] = []
    last: Optional[TrajectorySolution] = None
    converged = False

    for it in range(1, cfg.max_scp_iter + 1):
        prog, layout = build_ptr_subproblem(
            model, ensemble, cfg, ref.states, ref.controls, scales
        )
        sol = solve(prog, settings)
        if not sol.ok:
            raise SubproblemInfeasible(it, sol.status)

        states = layout.states_from(sol.x)
        controls = layout.controls_from(sol.x)
        nu = layout.nu_from(sol.x)

        dev_states = np.abs(states - ref.states) / state_span
        dev_controls = np.abs(controls - ref.controls) / control_span
        deviation = float(max(dev_states.max(), dev_controls.max()))
        nu_l1 = float(np.sum(np.abs(nu) / state_span))
        deviations.append(deviation)
        nu_mass.append(nu_l1)
        log.info(
            "scp iteration %d: objective %.6f deviation %.3e nu_l1 %.3e",
            it, float(expected_sonc_cost(list(states), cfg.weights)), deviation, nu_l1,
        )

        last = TrajectorySolution(
            states=states,
            controls=controls,
            consensus=layout.consensus_from(sol.x),
            objective=expected_sonc_cost(list(states), cfg.weights),
            iterations=it,
            converged=False,
            deviation_history=tuple(deviations),
            nu_history=tuple(nu_mass),
        )
        if deviation <= cfg.delta_tol and nu_l1 <= cfg.nu_tol:
            converged = True
            break
        ref = last

    assert last is not None
    if converged:
        last = dataclasses.replace(last, converged=True)
    else:
        log.warning("scp did not converge in %d iterations", cfg.max_scp_iter)
    return last


def propagation_residual(
    model: DynamicsModel, solution: TrajectorySolution, scales: Optional[ScalingMap] = None
) -> float:
    """Largest one-step mismatch between the solution's states and the true
    dynamics, in normalized units when a scaling map is given."""
    worst = 0.0
    span = scales.spans()[0] if scales is not None else np.ones(solution.states.shape[2])
    for i in range(solution.m):
        for k in range(solution.states.shape[1] - 1):
            pred = model.step(solution.states[i, k], solution.controls[i, k])
            err = np.abs(solution.states[i, k + 1] - pred) / span
            worst = max(worst, float(err.max()))
    return worst
