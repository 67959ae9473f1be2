"""Initial-state uncertainty: Gaussian specs, particle ensembles, noise draws.

Sampling is fully reproducible: normal variates come from the Box-Muller
transform applied to uniforms from a Philox counter-based generator keyed
by ``numpy.random.SeedSequence([seed, *tags])``. The same (spec, m, seed)
always yields the bit-identical ensemble. Correlation is applied through
a Cholesky factor when the covariance is positive definite and through an
eigendecomposition square root otherwise, so semidefinite covariances
(e.g. diag([0, s, 0])) sample correctly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "GaussianSpec",
    "ParticleEnsemble",
    "sample_ensemble",
    "measurement_update",
    "standard_normals",
    "derive_seed_sequence",
]

_SYM_TOL = 1e-12
_EIG_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class GaussianSpec:
    """Mean vector and positive-semidefinite covariance of a normal law."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.asarray(self.covariance, dtype=float)
        n = mean.shape[0]
        if cov.shape != (n, n):
            raise ValueError(f"covariance must be {n}x{n}, got {cov.shape}")
        if np.max(np.abs(cov - cov.T), initial=0.0) > _SYM_TOL:
            raise ValueError("covariance must be symmetric")
        eigs = np.linalg.eigvalsh(cov)
        if eigs.size and eigs.min() < -_EIG_TOL:
            raise ValueError(f"covariance must be PSD (min eigenvalue {eigs.min():.3e})")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True, eq=False)
class ParticleEnsemble:
    """m sampled initial states, kept immutable once built."""

    particles: np.ndarray  # (m, n_x)
    seed: int
    source: Optional[GaussianSpec] = field(default=None)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.particles, dtype=float))
        if pts.shape[0] < 1:
            raise ValueError("ensemble needs at least one particle")
        pts.setflags(write=False)
        object.__setattr__(self, "particles", pts)

    @property
    def m(self) -> int:
        return self.particles.shape[0]

    @property
    def state_dim(self) -> int:
        return self.particles.shape[1]


def derive_seed_sequence(seed: int, *tags: int) -> np.random.SeedSequence:
    """Deterministic child seed for a named purpose within an experiment."""
    return np.random.SeedSequence(entropy=[int(seed) & 0xFFFFFFFFFFFFFFFF, *[int(t) for t in tags]])


def standard_normals(count: int, seed_seq: np.random.SeedSequence) -> np.ndarray:
    """Box-Muller standard normals over a Philox uniform stream."""
    if count == 0:
        return np.zeros(0)
    gen = np.random.Generator(np.random.Philox(seed_seq))
    pairs = (count + 1) // 2
    u = gen.random(2 * pairs)
    u1 = 1.0 - u[:pairs]  # in (0, 1]: log is safe
    u2 = u[pairs:]
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * pairs)
    z[0::2] = r * np.cos(2.0 * np.pi * u2)
    z[1::2] = r * np.sin(2.0 * np.pi * u2)
    return z[:count]


def _covariance_root(cov: np.ndarray) -> np.ndarray:
    """Matrix S with S S^T = cov; Cholesky when possible, eigh otherwise."""
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        eigvals, eigvecs = np.linalg.eigh(cov)
        return eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))


def sample_gaussian(spec: GaussianSpec, count: int, seed_seq: np.random.SeedSequence) -> np.ndarray:
    """(count, dim) i.i.d. draws from the spec's distribution."""
    n = spec.dim
    z = standard_normals(count * n, seed_seq).reshape(count, n)
    root = _covariance_root(spec.covariance)
    return spec.mean + z @ root.T


def sample_ensemble(spec: GaussianSpec, m: int, seed: int) -> ParticleEnsemble:
    """Draw m i.i.d. particles from the initial distribution, reproducibly."""
    if m < 1:
        raise ValueError("m must be at least 1")
    draws = sample_gaussian(spec, m, derive_seed_sequence(seed))
    return ParticleEnsemble(particles=draws, seed=int(seed), source=spec)


def measurement_update(true_state: np.ndarray, noise: GaussianSpec, seed: int) -> GaussianSpec:
    """Distribution to replan from after measuring the true state once.

    The returned spec is centered on a single noisy measurement (one draw
    from N(true_state + noise.mean, noise.covariance)) and keeps the
    measurement covariance, which is the distribution the next planning
    cycle should treat as its initial-state uncertainty.
    """
    true_state = np.atleast_1d(np.asarray(true_state, dtype=float))
    if noise.dim != true_state.shape[0]:
        raise ValueError(f"noise dimension {noise.dim} != state dimension {true_state.shape[0]}")
    shifted = GaussianSpec(mean=true_state + noise.mean, covariance=noise.covariance)
    measurement = sample_gaussian(shifted, 1, derive_seed_sequence(seed))[0]
    return GaussianSpec(mean=measurement, covariance=noise.covariance)
