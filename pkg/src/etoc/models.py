"""Discrete-time dynamics models used by the planner and the simulators.

Two benchmark systems are provided: a zero-order-hold double integrator
(linear, 2D position/velocity blocks) and a forward-Euler Dubins-style
ground vehicle (nonlinear unicycle). Both expose the same surface: a step
map, Jacobian linearizations with affine residual, and box bounds on the
control input. Models are immutable after construction and safe to share
across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DynamicsModel",
    "LinearDynamics",
    "DubinsCar",
    "double_integrator",
    "double_integrator_1d",
    "dubins_car",
    "linearize_along",
]


@dataclass(frozen=True, eq=False)
class DynamicsModel:
    """Common contract for discrete-time dynamics x(k+1) = step(x(k), u(k)).

    The origin is an equilibrium: step(0, 0) = 0. ``jacobians`` returns the
    first-order expansion (A, B, c) about a point, with c the affine
    residual, so that step(x, u) ~= A x + B u + c near the expansion point.
    Control bounds are per-component boxes [control_lower, control_upper].
    """

    name: str
    state_dim: int
    control_dim: int
    control_lower: np.ndarray
    control_upper: np.ndarray
    is_linear: bool = field(default=False)

    def __post_init__(self):
        lo = np.asarray(self.control_lower, dtype=float).reshape(self.control_dim)
        hi = np.asarray(self.control_upper, dtype=float).reshape(self.control_dim)
        if np.any(lo >= hi):
            raise ValueError("control bounds must satisfy lower < upper")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "control_lower", lo)
        object.__setattr__(self, "control_upper", hi)

    def step(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jacobians(self, x: np.ndarray, u: np.ndarray):
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class LinearDynamics(DynamicsModel):
    """Linear time-invariant dynamics x(k+1) = A x(k) + B u(k)."""

    a: np.ndarray = None
    b: np.ndarray = None

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.shape != (self.state_dim, self.state_dim):
            raise ValueError(f"A must be {self.state_dim}x{self.state_dim}, got {a.shape}")
        if b.shape != (self.state_dim, self.control_dim):
            raise ValueError(f"B must be {self.state_dim}x{self.control_dim}, got {b.shape}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("dynamics matrices must be finite")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "is_linear", True)
        DynamicsModel.__post_init__(self)

    def step(self, x, u):
        return self.a @ np.asarray(x, dtype=float) + self.b @ np.asarray(u, dtype=float)

    def jacobians(self, x, u):
        return self.a, self.b, np.zeros(self.state_dim)


@dataclass(frozen=True, eq=False)
class DubinsCar(DynamicsModel):
    """Forward-Euler unicycle with state [r_x, r_y, heading], control [v, steer].

    The heading convention pairs sin(theta) with r_x and cos(theta) with
    r_y, i.e. theta = 0 moves along +r_y. The analytic Dubins-path module
    uses the standard convention internally; ``dubins.pose_from_state`` is
    the adapter between the two.
    """

    ts: float = 0.1

    def __post_init__(self):
        if self.ts <= 0:
            raise ValueError("Ts must be positive")
        object.__setattr__(self, "is_linear", False)
        DynamicsModel.__post_init__(self)

    def step(self, x, u):
        x = np.asarray(x, dtype=float)
        v, steer = float(u[0]), float(u[1])
        theta = x[2]
        return x + self.ts * np.array([v * np.sin(theta), v * np.cos(theta), steer])

    def jacobians(self, x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        v, theta = float(u[0]), float(x[2])
        a = np.eye(3)
        a[0, 2] = self.ts * v * np.cos(theta)
        a[1, 2] = -self.ts * v * np.sin(theta)
        b = self.ts * np.array([[np.sin(theta), 0.0], [np.cos(theta), 0.0], [0.0, 1.0]])
        c = self.step(x, u) - a @ x - b @ u
        return a, b, c


def double_integrator(ts: float) -> LinearDynamics:
    """ZOH double integrator with 2D position/velocity blocks.

    State ordering is [position; velocity]: x = [r_x, r_y, v_x, v_y] with
    n_u = 2 accelerations bounded by the unit infinity-norm box.
    """
    if ts <= 0:
        raise ValueError("Ts must be positive")
    eye2 = np.eye(2)
    a = np.block([[eye2, ts * eye2], [np.zeros((2, 2)), eye2]])
    b = np.vstack([0.5 * ts**2 * eye2, ts * eye2])
    return LinearDynamics(
        name="double_integrator",
        state_dim=4,
        control_dim=2,
        control_lower=-np.ones(2),
        control_upper=np.ones(2),
        a=a,
        b=b,
    )


def double_integrator_1d(ts: float) -> LinearDynamics:
    """Single-axis ZOH double integrator, handy for small oracle studies."""
    if ts <= 0:
        raise ValueError("Ts must be positive")
    a = np.array([[1.0, ts], [0.0, 1.0]])
    b = np.array([[0.5 * ts**2], [ts]])
    return LinearDynamics(
        name="double_integrator_1d",
        state_dim=2,
        control_dim=1,
        control_lower=-np.ones(1),
        control_upper=np.ones(1),
        a=a,
        b=b,
    )


def dubins_car(ts: float, v_bounds=(0.0, 0.5), steer_bound: float = 5.0) -> DubinsCar:
    """Euler-discretized ground vehicle with speed and steering-rate boxes."""
    if ts <= 0:
        raise ValueError("Ts must be positive")
    return DubinsCar(
        name="dubins",
        state_dim=3,
        control_dim=2,
        control_lower=np.array([v_bounds[0], -steer_bound]),
        control_upper=np.array([v_bounds[1], steer_bound]),
        ts=ts,
    )


def linearize_along(model: DynamicsModel, x_ref: np.ndarray, u_ref: np.ndarray):
    """First-order expansions of the step map along a reference trajectory.

    x_ref has Gamma states, u_ref has Gamma-1 controls; returns a list of
    Gamma-1 tuples (A_k, B_k, c_k) such that the expansion is exact at the
    reference point: step(x_ref[k], u_ref[k]) = A_k x_ref[k] + B_k u_ref[k] + c_k.
    """
    x_ref = np.asarray(x_ref, dtype=float)
    u_ref = np.asarray(u_ref, dtype=float)
    if x_ref.ndim != 2 or x_ref.shape[1] != model.state_dim:
        raise ValueError(f"x_ref must be (Gamma, {model.state_dim})")
    if u_ref.ndim != 2 or u_ref.shape[1] != model.control_dim:
        raise ValueError(f"u_ref must be (Gamma-1, {model.control_dim})")
    if u_ref.shape[0] != x_ref.shape[0] - 1:
        raise ValueError("need Gamma states and Gamma-1 controls")
    return [model.jacobians(x_ref[k], u_ref[k]) for k in range(u_ref.shape[0])]
