"""Experiment engines built on the planner: Monte Carlo evaluation of the
consensus policy against a deterministic baseline, closed-loop replanning
simulation, and parameter sweeps.

The open-loop protocol plans once, then scores the plan's shared control
prefix on fresh evaluation samples: each sample is propagated through the
prefix and handed to a per-sample completion stage (a deterministic
minimum-time solve for linear models, shortest-path step counting for the
planar vehicle). Terminal steps count transitions: consensus prefix plus
completion.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .conic import SolverSettings, solve
from .dubins import Pose, completion_steps, pose_from_state, shortest_path
from .models import DynamicsModel
from .scp import TrajectorySolution, solve_expected_time
from .soncost import terminal_step, weight_sequence
from .stochastic import (
    GaussianSpec,
    ParticleEnsemble,
    derive_seed_sequence,
    measurement_update,
    sample_ensemble,
    sample_gaussian,
)
from .transcription import SolveConfig, build_problem4_linear, with_initial_states

__all__ = [
    "McSummary",
    "ClosedLoopTrace",
    "run_open_loop_mc",
    "deterministic_min_time_policy",
    "run_closed_loop",
    "sweep_weights",
    "sweep_consensus",
    "write_samples_csv",
    "write_histogram_csv",
    "write_summary_json",
    "write_table_csv",
]

log = logging.getLogger("etoc.harness")

ARRIVAL_TOL = 1e-3
SPLIT_THRESHOLD = 20

# seed-stream tags, one per purpose, so no two draws share a stream
_TAG_EVAL = 11
_TAG_TRUTH = 21
_TAG_REPLAN = 22
_TAG_MEAS = 23


@dataclass(frozen=True, eq=False)
class McSummary:
    """Per-sample terminal steps for one policy plus reduced statistics.

    terminal_steps uses -1 for samples that never reached the target (or
    diverged); converged marks the rest. The split fields partition the
    converged samples at split_threshold steps.
    """

    policy: str
    seed: int
    terminal_steps: np.ndarray
    converged: np.ndarray
    split_threshold: int
    mean_steps: float
    hist_values: np.ndarray
    hist_counts: np.ndarray
    fast_count: int
    slow_count: int
    fast_mean: float
    slow_mean: float
    n_failed: int

    def __post_init__(self):
        for name in ("terminal_steps", "converged", "hist_values", "hist_counts"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_samples(self) -> int:
        return self.terminal_steps.shape[0]

    @classmethod
    def from_samples(
        cls,
        policy: str,
        seed: int,
        steps: Sequence[Optional[int]],
        split_threshold: int = SPLIT_THRESHOLD,
    ) -> "McSummary":
        terminal = np.array([-1 if s is None else int(s) for s in steps], dtype=int)
        converged = terminal >= 0
        good = terminal[converged]
        values, counts = np.unique(good, return_counts=True)
        fast = good[good < split_threshold]
        slow = good[good >= split_threshold]
        summary = cls(
            policy=policy,
            seed=int(seed),
            terminal_steps=terminal,
            converged=converged,
            split_threshold=int(split_threshold),
            mean_steps=float(good.mean()) if good.size else math.nan,
            hist_values=values,
            hist_counts=counts,
            fast_count=int(fast.size),
            slow_count=int(slow.size),
            fast_mean=float(fast.mean()) if fast.size else math.nan,
            slow_mean=float(slow.mean()) if slow.size else math.nan,
            n_failed=int(np.sum(~converged)),
        )
        # bucket arithmetic must account for every sample
        assert summary.fast_count + summary.slow_count + summary.n_failed == len(steps)
        assert int(summary.hist_counts.sum()) == int(converged.sum())
        return summary


@dataclass(frozen=True, eq=False)
class ClosedLoopTrace:
    """One feedback run: replan, fly the shared prefix, measure, repeat."""

    policy: str
    seed: int
    threshold: float
    true_states: np.ndarray  # (steps_taken + 1, n_x)
    distances: np.ndarray
    measurements: Tuple[np.ndarray, ...]
    plans: Tuple[np.ndarray, ...]
    converged: bool
    convergence_step: Optional[int]

    def __post_init__(self):
        for name in ("true_states", "distances"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def steps_taken(self) -> int:
        return self.true_states.shape[0] - 1

    @property
    def replan_count(self) -> int:
        return len(self.plans)


def deterministic_min_time_policy(
    model: DynamicsModel, cfg: SolveConfig, x0: np.ndarray
) -> TrajectorySolution:
    """Single-state minimum-time plan: the same pipeline with one particle
    and full consensus, so every control step is shared trivially."""
    x0 = np.asarray(x0, dtype=float)
    det_cfg = dataclasses.replace(cfg, tc=cfg.gamma)
    ens = ParticleEnsemble(particles=x0[None, :], seed=0)
    return solve_expected_time(model, ens, det_cfg)


class _LinearCompletion:
    """Reusable minimum-time completion solver for linear models.

    One transcription is built up front; each query patches the
    initial-state rows and re-solves, which keeps thousand-sample runs
    cheap.
    """

    def __init__(self, model: DynamicsModel, cfg: SolveConfig):
        self.cfg = dataclasses.replace(cfg, tc=cfg.gamma)
        anchor = ParticleEnsemble(particles=np.zeros((1, model.state_dim)), seed=0)
        self.prog, self.layout = build_problem4_linear(model, anchor, self.cfg)
        self.settings = SolverSettings(feas_tol=cfg.feas_tol)

    def steps_from(self, x0: np.ndarray) -> Optional[int]:
        prog = with_initial_states(self.prog, self.layout, np.asarray(x0)[None, :])
        sol = solve(prog, self.settings)
        if not sol.ok:
            return None
        arrival = terminal_step(self.layout.states_from(sol.x)[0], tol=ARRIVAL_TOL)
        if arrival is None:
            return None
        return arrival - 1  # transitions from the handoff state


def _linear_completion_chunk(args) -> List[Optional[int]]:
    model, cfg, starts = args
    comp = _LinearCompletion(model, cfg)
    return [comp.steps_from(s) for s in starts]


def _completion_transitions(
    model: DynamicsModel, cfg: SolveConfig, handoffs: np.ndarray, jobs: int
) -> List[Optional[int]]:
    """Transitions needed to finish each handoff state, None on failure."""
    if model.is_linear:
        if jobs > 1 and handoffs.shape[0] > 1:
            chunks = np.array_split(handoffs, min(jobs * 4, handoffs.shape[0]))
            work = [(model, cfg, chunk) for chunk in chunks if chunk.size]
            out: List[Optional[int]] = []
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for part in pool.map(_linear_completion_chunk, work):
                    out.extend(part)
            return out
        comp = _LinearCompletion(model, cfg)
        return [comp.steps_from(x) for x in handoffs]

    # planar vehicle: finish along the shortest feasible path at full speed
    v_max = float(model.control_upper[0])
    rho = v_max / float(model.control_upper[1])
    goal = Pose(0.0, 0.0, 0.0)
    out = []
    for x in handoffs:
        path = shortest_path(pose_from_state(x), goal, rho)
        out.append(completion_steps(path.length, v_max, model.ts))
    return out


def _propagate_prefix(
    model: DynamicsModel, starts: np.ndarray, prefix: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Advance each start through the shared controls; flag non-finite runs."""
    states = starts.copy()
    alive = np.ones(starts.shape[0], dtype=bool)
    for u in prefix:
        for i in range(states.shape[0]):
            if alive[i]:
                states[i] = model.step(states[i], u)
        alive &= np.isfinite(states).all(axis=1)
    return states, alive


def consensus_prefix(
    model: DynamicsModel,
    cfg: SolveConfig,
    dist: GaussianSpec,
    seed: int,
    m: int,
    policy: str,
) -> np.ndarray:
    """The shared control sequence each policy commits to up front."""
    if policy == "proposed":
        ensemble = sample_ensemble(dist, m, seed)
        plan = solve_expected_time(model, ensemble, cfg)
        return np.asarray(plan.consensus)
    if policy == "baseline":
        plan = deterministic_min_time_policy(model, cfg, np.asarray(dist.mean))
        return np.asarray(plan.controls[0, : cfg.tc - 1])
    raise ValueError(f"unknown policy {policy!r}")


def run_open_loop_mc(
    model: DynamicsModel,
    cfg: SolveConfig,
    dist: GaussianSpec,
    n_mc: int,
    seed: int,
    m: int,
    policies: Sequence[str] = ("proposed", "baseline"),
    jobs: int = 1,
    split_threshold: int = SPLIT_THRESHOLD,
) -> Dict[str, McSummary]:
    """Score each policy's committed prefix on shared evaluation samples.

    Every policy sees the same n_mc fresh draws from dist. A sample's
    terminal steps are the prefix transitions plus however many more its
    completion stage needs; samples that diverge or never arrive are
    reported as failed rather than folded into the mean.
    """
    if n_mc < 1:
        raise ValueError("n_mc must be at least 1")
    eval_states = sample_gaussian(dist, n_mc, derive_seed_sequence(seed, _TAG_EVAL))

    summaries: Dict[str, McSummary] = {}
    for policy in policies:
        prefix = consensus_prefix(model, cfg, dist, seed, m, policy)
        handoffs, alive = _propagate_prefix(model, eval_states, prefix)
        n_lost = int(np.sum(~alive))
        if n_lost:
            log.warning("%s: %d samples diverged during the prefix", policy, n_lost)
        completions = _completion_transitions(model, cfg, handoffs, jobs)
        steps: List[Optional[int]] = []
        for ok, comp in zip(alive, completions):
            if not ok or comp is None:
                steps.append(None)
            else:
                steps.append((cfg.tc - 1) + comp)
        summaries[policy] = McSummary.from_samples(
            policy, seed, steps, split_threshold=split_threshold
        )
        log.info(
            "%s: mean %.2f steps over %d/%d converged samples",
            policy, summaries[policy].mean_steps,
            int(np.sum(summaries[policy].converged)), n_mc,
        )
    return summaries


def run_closed_loop(
    model: DynamicsModel,
    cfg: SolveConfig,
    dist: GaussianSpec,
    noise: GaussianSpec,
    threshold: float,
    policy: str,
    seed: int,
    m: int = 1,
    max_steps: int = 300,
) -> ClosedLoopTrace:
    """Feedback simulation: replan from the current belief, fly the shared
    prefix on the true state, then measure and recenter the belief.

    The true initial state is one draw from dist; the belief starts as
    dist itself and after each cycle becomes the measurement distribution.
    Stops once the true state comes within threshold of the target, or at
    max_steps flagged as non-converged.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if policy not in ("proposed", "baseline"):
        raise ValueError(f"unknown policy {policy!r}")

    x_true = sample_gaussian(dist, 1, derive_seed_sequence(seed, _TAG_TRUTH))[0]
    belief = dist
    states = [x_true.copy()]
    distances = [float(np.linalg.norm(x_true))]
    plans: List[np.ndarray] = []
    measurements: List[np.ndarray] = []
    converged = distances[0] < threshold
    convergence_step: Optional[int] = 0 if converged else None

    cycle = 0
    steps = 0
    while not converged and steps < max_steps:
        if policy == "proposed":
            ens_seed = int(derive_seed_sequence(seed, _TAG_REPLAN, cycle).generate_state(1)[0])
            ensemble = sample_ensemble(belief, m, ens_seed)
            plan = solve_expected_time(model, ensemble, cfg)
            prefix = np.asarray(plan.consensus)
        else:
            plan = deterministic_min_time_policy(model, cfg, np.asarray(belief.mean))
            prefix = np.asarray(plan.controls[0, : cfg.tc - 1])
        plans.append(prefix)

        for u in prefix:
            x_true = model.step(x_true, u)
            steps += 1
            states.append(x_true.copy())
            distances.append(float(np.linalg.norm(x_true)))
            if distances[-1] < threshold:
                converged = True
                convergence_step = steps
                break
            if steps >= max_steps:
                break
        if not converged and steps < max_steps:
            meas_seed = int(derive_seed_sequence(seed, _TAG_MEAS, cycle).generate_state(1)[0])
            belief = measurement_update(x_true, noise, meas_seed)
            measurements.append(belief.mean)
        cycle += 1

    return ClosedLoopTrace(
        policy=policy,
        seed=int(seed),
        threshold=float(threshold),
        true_states=np.array(states),
        distances=np.array(distances),
        measurements=tuple(measurements),
        plans=tuple(plans),
        converged=converged,
        convergence_step=convergence_step,
    )


def sweep_weights(
    model: DynamicsModel,
    cfg: SolveConfig,
    dist: GaussianSpec,
    n_mc: int,
    seed: int,
    m: int,
    kinds: Sequence[str] = ("const", "lin", "log", "quad"),
    jobs: int = 1,
) -> Dict[str, float]:
    """Mean terminal steps of the consensus policy per weight family, all
    scored on the same seed and therefore the same evaluation samples."""
    table: Dict[str, float] = {}
    for kind in kinds:
        swept = dataclasses.replace(cfg, weights=weight_sequence(kind, cfg.gamma))
        result = run_open_loop_mc(
            model, swept, dist, n_mc, seed, m, policies=("proposed",), jobs=jobs
        )
        table[kind] = result["proposed"].mean_steps
    return table


def sweep_consensus(
    model: DynamicsModel,
    cfg: SolveConfig,
    dist: GaussianSpec,
    n_mc: int,
    seed: int,
    m: int,
    horizons: Sequence[int],
    jobs: int = 1,
) -> Dict[int, float]:
    """Mean terminal steps of the consensus policy per shared horizon."""
    table: Dict[int, float] = {}
    for tc in horizons:
        swept = dataclasses.replace(cfg, tc=int(tc))
        result = run_open_loop_mc(
            model, swept, dist, n_mc, seed, m, policies=("proposed",), jobs=jobs
        )
        table[int(tc)] = result["proposed"].mean_steps
    return table


def write_samples_csv(path, summaries: Mapping[str, McSummary]) -> None:
    """Per-sample records, one row per (sample, policy), stable ordering."""
    with open(path, "w", newline="") as fh:
        fh.write("sample_id,policy,terminal_steps,converged\n")
        for policy, summary in summaries.items():
            for i in range(summary.n_samples):
                fh.write(
                    f"{i},{policy},{int(summary.terminal_steps[i])},"
                    f"{'true' if summary.converged[i] else 'false'}\n"
                )


def write_histogram_csv(path, summaries: Mapping[str, McSummary]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("policy,terminal_steps,count\n")
        for policy, summary in summaries.items():
            for value, count in zip(summary.hist_values, summary.hist_counts):
                fh.write(f"{policy},{int(value)},{int(count)}\n")


def _json_safe(value: float) -> Optional[float]:
    return None if isinstance(value, float) and math.isnan(value) else value


def write_summary_json(path, summaries: Mapping[str, McSummary], extra: Optional[dict] = None) -> None:
    payload = {
        policy: {
            "seed": s.seed,
            "n_samples": s.n_samples,
            "n_failed": s.n_failed,
            "mean_steps": _json_safe(s.mean_steps),
            "split_threshold": s.split_threshold,
            "fast_count": s.fast_count,
            "slow_count": s.slow_count,
            "fast_mean": _json_safe(s.fast_mean),
            "slow_mean": _json_safe(s.slow_mean),
        }
        for policy, s in summaries.items()
    }
    if extra:
        payload["run"] = extra
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_table_csv(path, key_name: str, table: Mapping) -> None:
    """Two-column sweep output keyed by the swept parameter."""
    with open(path, "w", newline="") as fh:
        fh.write(f"{key_name},mean_steps\n")
        for key, value in table.items():
            fh.write(f"{key},{value!r}\n")
