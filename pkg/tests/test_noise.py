"""Noise-model statistics and determinism."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opdyn import exact, noise
from opdyn.pauli import PauliBasis, TruncationPolicy


def _clean_traj():
    spec = exact.TfimSpec(n_sites=2, coupling=1.0, field=1.0)
    obs = exact.Observable.sum_x(2)
    grid = np.linspace(0.0, 5.0, 51)
    return exact.generate_trajectory(spec, obs, TruncationPolicy(mode="full"),
                                     grid)


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=0.0, max_value=0.5),
       st.floats(min_value=1e-3, max_value=1.0))
def test_gamma_from_p_inverts(p, dt):
    # [DERIVED] defining relation: e^{-gamma*dt} = 1 - p.
    gamma = noise.gamma_from_p(p, dt)
    assert gamma >= 0
    assert np.isclose(np.exp(-gamma * dt), 1.0 - p, atol=1e-12)


def test_gamma_rejects_bad_inputs():
    with pytest.raises(ValueError):
        noise.gamma_from_p(1.0, 0.1)
    with pytest.raises(ValueError):
        noise.gamma_from_p(0.1, 0.0)


def test_pure_decay_is_exponential():
    traj = _clean_traj()
    model = noise.NoiseModel(depolarizing_p=0.05, trotter_dt=0.1)
    noisy = noise.apply_noise(traj, model)
    decay = np.exp(-model.gamma * traj.times)
    # [DERIVED] sigma=0: every column contracts by the same factor.
    assert np.allclose(noisy.coeffs, traj.coeffs * decay[:, None])


def test_gaussian_noise_statistics():
    traj = _clean_traj()
    sigma = 0.01
    model = noise.NoiseModel(gaussian_sigma=sigma, seed=4)
    resid = noise.apply_noise(traj, model).coeffs - traj.coeffs
    flat = resid.ravel()
    # [DERIVED] ~750 iid draws: mean within 5 sigma/sqrt(n), std within 10%.
    assert abs(flat.mean()) < 5 * sigma / np.sqrt(flat.size)
    assert abs(flat.std() - sigma) / sigma < 0.1


def test_noise_is_deterministic_and_label_keyed():
    traj = _clean_traj()
    model = noise.NoiseModel(depolarizing_p=0.02, gaussian_sigma=0.01, seed=7)
    a = noise.apply_noise(traj, model)
    b = noise.apply_noise(traj, model)
    assert np.array_equal(a.coeffs, b.coeffs)
    # [DERIVED] restricting the basis must not change surviving columns:
    # draws are keyed by column label, not column position.
    keep = PauliBasis.from_labels(traj.basis.labels[5:9])
    restricted = noise.apply_noise(traj.restrict(keep), model)
    for label in keep.labels:
        assert np.array_equal(restricted.column(label), a.column(label))


def test_relative_mode_scales_with_magnitude():
    traj = _clean_traj()
    model = noise.NoiseModel(gaussian_sigma=0.1, mode="relative", seed=2)
    resid = np.abs(noise.apply_noise(traj, model).coeffs - traj.coeffs)
    # [DERIVED] each residual is sigma*|clean|*draw, so the ratio to the
    # clean magnitude is bounded by sigma times the largest draw.
    ratio = resid / np.maximum(np.abs(traj.coeffs), 1e-300)
    assert np.all(ratio[np.abs(traj.coeffs) > 1e-12] < 0.1 * 8.0)


def test_meta_records_noise_settings():
    traj = _clean_traj()
    noisy = noise.apply_noise(
        traj, noise.NoiseModel(depolarizing_p=0.05, trotter_dt=0.1,
                               gaussian_sigma=0.01, seed=3))
    assert noisy.meta["noise.p"] == repr(0.05)
    assert noisy.meta["noise.sigma"] == repr(0.01)
    assert noisy.meta["noise.seed"] == "3"
