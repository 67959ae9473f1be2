"""Temporally weighted sum-of-norm cost and terminal-step accounting.

The cost (1/m) sum_i sum_{k=1..Gamma} w(k) ||x_i(k)|| rewards driving
every particle's state to zero as early as possible; any positive
nondecreasing weight sequence works, and increasing ones (w(k) = k,
ln k, k^2) sharpen the incentive. Trajectories are (Gamma, n_x) arrays
whose rows are the states at steps k = 1..Gamma, the first row being the
initial state. A trajectory's terminal step is the first step at which
the state has reached zero and stays there, and the persistence check
verifies the defining property of minimizers: once a particle's state
norm drops below tolerance it never rises above it again.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

import numpy as np

__all__ = [
    "WeightSequence",
    "TerminalReport",
    "weight_sequence",
    "custom_weights",
    "expected_sonc_cost",
    "state_norms",
    "terminal_step",
    "check_persistence",
    "terminal_report",
    "WEIGHT_KINDS",
]

WEIGHT_KINDS = ("const", "lin", "log", "quad")
_LOG_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class WeightSequence:
    """Weights w(k) for steps k = 1..Gamma, all positive, nondecreasing."""

    kind: str
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.shape[0] < 2:
            raise ValueError("need a 1-d weight vector with at least 2 entries")
        if vals.min() <= 0.0 or np.any(np.diff(vals) < 0.0):
            raise ValueError("weights must be positive and nondecreasing")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def horizon(self) -> int:
        return self.values.shape[0]


def weight_sequence(kind: str, gamma: int) -> WeightSequence:
    """Build the named weight profile over steps k = 1..gamma.

    kinds: "const" -> 1, "lin" -> k, "log" -> max(ln k, 1e-6),
    "quad" -> k^2. The log profile is clamped below at 1e-6 because
    ln 1 = 0 would violate positivity at the first step.
    """
    if kind not in WEIGHT_KINDS:
        raise ValueError(f"unknown weight kind {kind!r}; expected one of {WEIGHT_KINDS}")
    if gamma < 2:
        raise ValueError("gamma must be at least 2")
    k = np.arange(1, gamma + 1, dtype=float)
    if kind == "const":
        vals = np.ones_like(k)
    elif kind == "lin":
        vals = k
    elif kind == "log":
        vals = np.maximum(np.log(k), _LOG_FLOOR)
    else:
        vals = k ** 2
    return WeightSequence(kind=kind, values=vals)


def custom_weights(values: Sequence[float]) -> WeightSequence:
    """Wrap an explicit weight vector (validated positive, nondecreasing)."""
    return WeightSequence(kind="custom", values=np.asarray(values, dtype=float))


def state_norms(trajectory: np.ndarray) -> np.ndarray:
    """Euclidean norm of each state x(1..Gamma)."""
    traj = np.asarray(trajectory, dtype=float)
    if traj.ndim != 2 or traj.shape[0] < 2:
        raise ValueError("trajectory must be (Gamma, n_x) with Gamma >= 2")
    return np.linalg.norm(traj, axis=1)


def expected_sonc_cost(trajectories: Sequence[np.ndarray], weights: WeightSequence) -> float:
    """(1/m) sum_i sum_k w(k) ||x_i(k)|| over the ensemble."""
    if len(trajectories) == 0:
        raise ValueError("need at least one trajectory")
    total = 0.0
    for traj in trajectories:
        norms = state_norms(traj)
        if norms.shape[0] != weights.horizon:
            raise ValueError(
                f"trajectory has {norms.shape[0]} steps, weights cover {weights.horizon}"
            )
        total += float(weights.values @ norms)
    return total / len(trajectories)


def terminal_step(trajectory: np.ndarray, tol: float = 1e-3) -> Optional[int]:
    """First step at which the state reaches zero and stays there.

    Steps are numbered 1..Gamma. Returns None when the state has not
    settled within tol by the final step (not converged).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    norms = np.linalg.norm(np.asarray(trajectory, dtype=float), axis=1)
    above = np.flatnonzero(norms > tol)
    if above.size == 0:
        return 1
    step = int(above[-1]) + 2  # 1-based index of the first persistently-zero step
    return step if step <= norms.shape[0] else None


def check_persistence(trajectory: np.ndarray, tol: float) -> bool:
    """True iff once the norm drops to tol it never exceeds tol again."""
    norms = np.linalg.norm(np.asarray(trajectory, dtype=float), axis=1)
    below = norms <= tol
    if not below.any():
        return True
    first = int(np.argmax(below))
    return bool(below[first:].all())


@dataclass(frozen=True, eq=False)
class TerminalReport:
    """Per-particle terminal steps plus the persistence verdict.

    terminal_steps holds -1 for particles that never settled; converged
    marks the rest. mean_terminal averages converged particles only.
    """

    terminal_steps: np.ndarray  # (m,) ints, -1 = not converged
    converged: np.ndarray  # (m,) bools
    persistent: bool
    tol: float

    @property
    def all_converged(self) -> bool:
        return bool(self.converged.all())

    @property
    def mean_terminal(self) -> float:
        if not self.converged.any():
            return float("nan")
        return float(np.mean(self.terminal_steps[self.converged]))


def terminal_report(trajectories: Iterable[np.ndarray], tol: float) -> TerminalReport:
    """Terminal step of each trajectory and whether all persist at tol."""
    steps: List[int] = []
    persistent = True
    for traj in trajectories:
        t = terminal_step(traj, tol)
        steps.append(-1 if t is None else t)
        persistent = persistent and check_persistence(traj, tol)
    if not steps:
        raise ValueError("need at least one trajectory")
    arr = np.asarray(steps, dtype=int)
    return TerminalReport(
        terminal_steps=arr, converged=arr > 0, persistent=persistent, tol=float(tol)
    )
