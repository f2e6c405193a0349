"""Exact Heisenberg evolution against independent dense oracles."""

import numpy as np
import pytest
from scipy.linalg import expm

from opdyn import exact
from opdyn.pauli import (
    PauliString,
    SymmetryOperator,
    TruncationPolicy,
    commutes,
    enumerate_full_basis,
    to_matrix,
)


def _dense_heisenberg(H, O_mat, t):
    # [DERIVED] independent oracle: O(t) = e^{iHt} O e^{-iHt} via expm.
    U = expm(-1j * H * t)
    return U.conj().T @ O_mat @ U


@pytest.fixture(scope="module")
def tfim3():
    return exact.TfimSpec(n_sites=3, coupling=1.0, field=1.0)


def test_hamiltonian_hermitian_and_symmetric(tfim3):
    H = exact.build_hamiltonian(tfim3)
    assert np.allclose(H, H.conj().T)  # [TRIVIAL]
    S = to_matrix(SymmetryOperator.bit_flip(3).generator)
    assert np.allclose(H @ S, S @ H)  # [DERIVED] global bit flip commutes


def test_sign_conventions_differ_by_overall_sign():
    # [DERIVED] with coupling=field the two conventions are exact negatives.
    a = exact.build_hamiltonian(
        exact.TfimSpec(3, 1.0, 1.0, sign_convention="main_text"))
    b = exact.build_hamiltonian(
        exact.TfimSpec(3, 1.0, 1.0, sign_convention="appendix"))
    assert np.allclose(a, -b)


def test_periodic_n2_doubles_bond():
    # [DERIVED] periodic N=2 traverses the single bond twice.
    H = exact.build_hamiltonian(exact.TfimSpec(2, 1.0, 0.0))
    zz = np.kron(np.diag([1.0, -1.0]), np.diag([1.0, -1.0]))
    assert np.allclose(H, -2.0 * zz)


def test_evolver_matches_expm_oracle(tfim3):
    obs = exact.Observable.sum_x(3)
    basis = enumerate_full_basis(3)
    basis = exact.PauliBasis.from_elements(
        [p for p in basis if not p.is_identity])
    ev = exact.ExactEvolver(tfim3, obs, basis)
    H = exact.build_hamiltonian(tfim3)
    O_mat = obs.to_matrix()
    rng = np.random.default_rng(0)
    for t in rng.uniform(0.0, 10.0, size=5):
        Ot = _dense_heisenberg(H, O_mat, t)
        want = exact.pauli_coefficients(Ot, basis)
        got = ev.coefficients_at(t)
        assert np.allclose(got, want, atol=1e-10)


def test_evolver_sparse_path_matches_dense(tfim3, monkeypatch):
    # [DERIVED] the memory-light gather path must reproduce the cached
    # eigenbasis path exactly; forcing the cache cap to zero exercises it.
    obs = exact.Observable.sum_x(3)
    basis = exact.PauliBasis.from_elements(
        [p for p in enumerate_full_basis(3) if not p.is_identity])
    dense = exact.ExactEvolver(tfim3, obs, basis)
    assert dense._sigma_flat is not None
    monkeypatch.setattr(exact, "SIGMA_CACHE_ENTRIES", 0)
    sparse = exact.ExactEvolver(tfim3, obs, basis)
    assert sparse._sigma_flat is None
    ts = np.linspace(0.0, 12.0, 7)
    assert np.allclose(
        dense.coefficient_matrix(ts), sparse.coefficient_matrix(ts), atol=1e-12)


def test_trajectory_norm_conserved(tfim3):
    # [DERIVED] unitary evolution preserves sum_i c_i^2 (Frobenius norm).
    obs = exact.Observable.sum_x(3)
    grid = np.linspace(0.0, 20.0, 41)
    traj = exact.generate_trajectory(tfim3, obs, TruncationPolicy(mode="full"),
                                     grid)
    norms = np.sum(traj.coeffs**2, axis=1)
    assert np.allclose(norms, norms[0], atol=1e-10)
    assert traj.coeffs.shape == (41, 63)


def test_symmetry_filtered_columns_vanish(tfim3):
    # [DERIVED] anticommuting-sector coefficients of sum_x are exactly zero,
    # so dropping them loses nothing.
    obs = exact.Observable.sum_x(3)
    grid = np.linspace(0.0, 10.0, 21)
    full = exact.generate_trajectory(tfim3, obs, TruncationPolicy(mode="full"),
                                     grid)
    sym = SymmetryOperator.bit_flip(3)
    for k, p in enumerate(full.basis):
        if not commutes(p, sym.generator):
            assert np.max(np.abs(full.coeffs[:, k])) < 1e-12


def test_one_point_function_identity_at_t0(tfim3):
    obs = exact.Observable.sum_x(3)
    grid = np.array([0.0, 1.0])
    traj = exact.generate_trajectory(tfim3, obs, TruncationPolicy(mode="full"),
                                     grid)
    # [DERIVED] at t=0, Tr[O sigma] = d for sigma a term of O, else 0.
    s = exact.one_point_function(traj, PauliString.from_label("XII"))
    assert abs(s[0] - 8.0) < 1e-10
    z = exact.one_point_function(traj, PauliString.from_label("ZII"))
    assert abs(z[0]) < 1e-10
    with pytest.raises(ValueError):
        exact.one_point_function(traj, PauliString.identity(3))


def test_measurement_protocol_matches_coefficients(tfim3):
    # [DERIVED] density-matrix protocol reproduces the Heisenberg
    # coefficients exactly in the shot-free limit.
    obs = exact.Observable.sum_x(3)
    basis = exact.PauliBasis.from_labels(["XII", "ZZI", "YIY"])
    ev = exact.ExactEvolver(tfim3, obs, basis)
    for t in (0.3, 2.1, 7.7):
        row = ev.coefficients_at(t)
        for k, p in enumerate(basis):
            val = exact.measure_coefficient_via_state(tfim3, obs, p, t)
            assert abs(val - row[k]) < 1e-10


def test_measurement_shot_noise_converges(tfim3):
    obs = exact.Observable.sum_x(3)
    p = PauliString.from_label("XII")
    exact_val = exact.measure_coefficient_via_state(tfim3, obs, p, 1.5)
    sampled = exact.measure_coefficient_via_state(tfim3, obs, p, 1.5,
                                                  shots=200_000, rng_seed=1)
    # [DERIVED] binomial std of a 3-term sum at 2e5 shots is ~4e-3.
    assert abs(sampled - exact_val) < 0.05


def test_two_point_function_t0_is_norm(tfim3):
    # [DERIVED] C(0) = <Omega|O^2|Omega>, real and positive.
    obs = exact.Observable.sum_x(3)
    eig = exact.diagonalize(exact.build_hamiltonian(tfim3))
    gs = eig.ground_state
    want = gs.conj() @ obs.to_matrix() @ obs.to_matrix() @ gs
    got = exact.two_point_function(tfim3, obs, np.array([0.0]))[0]
    assert abs(got - want) < 1e-10
    assert got.real > 0 and abs(got.imag) < 1e-10


def test_exact_spectral_lines_sum_to_c0(tfim3):
    # [DERIVED] sum of line weights equals C(0) (completeness).
    obs = exact.Observable.sum_x(3)
    lines = exact.exact_spectral_lines(tfim3, obs)
    total = sum(w for _, w in lines)
    c0 = exact.two_point_function(tfim3, obs, np.array([0.0]))[0].real
    assert abs(total - c0) < 1e-10
    freqs = [f for f, _ in lines]
    assert freqs == sorted(freqs)
    assert all(f >= -1e-10 for f in freqs)


def test_process_matrix_row_matches_coefficients():
    spec = exact.TfimSpec(n_sites=2, coupling=1.0, field=1.0)
    obs = exact.Observable.sum_x(2)
    basis = exact.PauliBasis.from_elements(
        [p for p in enumerate_full_basis(2) if not p.is_identity])
    ev = exact.ExactEvolver(spec, obs, basis)
    rng = np.random.default_rng(3)
    for t in rng.uniform(0.0, 10.0, size=4):
        row = exact.process_matrix_row(spec, obs, basis, t)
        assert np.allclose(row, ev.coefficients_at(t), atol=1e-10)
        damped = exact.process_matrix_row(spec, obs, basis, t,
                                          depolarizing_gamma=0.3)
        assert np.allclose(damped, np.exp(-0.3 * t) * row, atol=1e-10)


def test_oracle_size_guard():
    with pytest.raises(ValueError):
        exact.build_hamiltonian(exact.TfimSpec(n_sites=12, coupling=1.0,
                                               field=1.0))


def test_observable_parser():
    obs = exact.Observable.from_string("1.5*XZI - 2*IIY", 3)
    mat = 1.5 * to_matrix(PauliString.from_label("XZI")) \
        - 2.0 * to_matrix(PauliString.from_label("IIY"))
    assert np.allclose(obs.to_matrix(), mat)
