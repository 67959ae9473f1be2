"""Sampling: determinism, degenerate covariances, law of large numbers."""

import numpy as np
import pytest

from etoc.stochastic import (
    GaussianSpec,
    ParticleEnsemble,
    derive_seed_sequence,
    measurement_update,
    sample_ensemble,
    standard_normals,
)


def test_spec_validation():
    GaussianSpec(mean=np.zeros(3), covariance=np.eye(3))
    with pytest.raises(ValueError):
        GaussianSpec(mean=np.zeros(3), covariance=np.eye(2))
    with pytest.raises(ValueError):
        asym = np.eye(2)
        asym[0, 1] = 0.5
        GaussianSpec(mean=np.zeros(2), covariance=asym)
    with pytest.raises(ValueError):
        GaussianSpec(mean=np.zeros(2), covariance=-np.eye(2))


def test_psd_but_singular_accepted():
    spec = GaussianSpec(mean=np.zeros(3), covariance=np.diag([0.0, 0.1, 0.0]))
    ens = sample_ensemble(spec, 500, seed=1)
    # zero-variance coordinates stay exactly at the mean
    assert np.all(ens.particles[:, 0] == 0.0)
    assert np.all(ens.particles[:, 2] == 0.0)
    assert ens.particles[:, 1].std() > 0.1


def test_zero_covariance_degenerates_to_mean():
    mean = np.array([2.0, 1.0, 0.0, 0.0])
    spec = GaussianSpec(mean=mean, covariance=np.zeros((4, 4)))
    ens = sample_ensemble(spec, 20, seed=3)
    assert np.array_equal(ens.particles, np.tile(mean, (20, 1)))


def test_seed_determinism_and_sensitivity():
    spec = GaussianSpec(mean=np.array([2.0, 1.0]), covariance=0.2 * np.eye(2))
    a = sample_ensemble(spec, 30, seed=11)
    b = sample_ensemble(spec, 30, seed=11)
    c = sample_ensemble(spec, 30, seed=12)
    assert np.array_equal(a.particles, b.particles)
    assert not np.array_equal(a.particles, c.particles)


def test_derived_streams_are_independent():
    z1 = standard_normals(100, derive_seed_sequence(5, 0))
    z2 = standard_normals(100, derive_seed_sequence(5, 1))
    z1_again = standard_normals(100, derive_seed_sequence(5, 0))
    assert np.array_equal(z1, z1_again)
    assert not np.array_equal(z1, z2)


def test_standard_normal_moments():
    z = standard_normals(200_000, derive_seed_sequence(123))
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1.0) < 0.01
    # Box-Muller never produces non-finite values because u1 is in (0, 1]
    assert np.all(np.isfinite(z))


def test_ensemble_matches_target_law():
    mean = np.array([1.0, -2.0, 0.5])
    cov = np.array([[0.5, 0.2, 0.0], [0.2, 0.4, 0.1], [0.0, 0.1, 0.3]])
    spec = GaussianSpec(mean=mean, covariance=cov)
    ens = sample_ensemble(spec, 100_000, seed=99)
    emp_mean = ens.particles.mean(axis=0)
    emp_cov = np.cov(ens.particles.T)
    assert np.abs(emp_mean - mean).max() < 0.02
    assert np.linalg.norm(emp_cov - cov) < 0.05 * np.linalg.norm(cov)


def test_odd_draw_counts():
    for n in (1, 3, 7):
        z = standard_normals(n, derive_seed_sequence(8))
        assert z.shape == (n,)
    assert standard_normals(0, derive_seed_sequence(8)).shape == (0,)


def test_ensemble_properties():
    spec = GaussianSpec(mean=np.zeros(2), covariance=np.eye(2))
    ens = sample_ensemble(spec, 25, seed=0)
    assert ens.m == 25 and ens.state_dim == 2 and ens.seed == 0
    assert ens.source is spec
    with pytest.raises(ValueError):
        sample_ensemble(spec, 0, seed=0)
    with pytest.raises(ValueError):
        ens.particles[0, 0] = 5.0  # frozen


def test_measurement_update():
    noise = GaussianSpec(mean=np.zeros(2), covariance=0.01 * np.eye(2))
    true_state = np.array([3.0, -1.0])
    post = measurement_update(true_state, noise, seed=42)
    post_again = measurement_update(true_state, noise, seed=42)
    assert np.array_equal(post.mean, post_again.mean)
    assert np.array_equal(post.covariance, noise.covariance)
    # the measurement is near the true state at this noise level
    assert np.linalg.norm(post.mean - true_state) < 1.0
    # noiseless measurement returns the exact state
    exact = measurement_update(true_state, GaussianSpec(np.zeros(2), np.zeros((2, 2))), seed=1)
    assert np.array_equal(exact.mean, true_state)


def test_measurement_update_dimension_check():
    noise = GaussianSpec(mean=np.zeros(3), covariance=np.eye(3))
    with pytest.raises(ValueError):
        measurement_update(np.zeros(2), noise, seed=0)
