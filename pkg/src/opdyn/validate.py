"""Self-contained consistency checks for the ``validate`` subcommand.

Each check prints one ``PASS``/``FAIL`` line; the command exits nonzero
if any check fails.  The checks are small and fast — they exercise the
same invariants the test suite relies on, against freshly generated
data, so a broken install or numerics problem surfaces immediately.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np

from . import exact, nn, spectra
from .odeint import SolverConfig, integrate
from .pauli import commutes, enumerate_full_basis, pauli_product, to_matrix
from .training import load_checkpoint, save_checkpoint


def _check_pauli() -> bool:
    rng = np.random.default_rng(7)
    n = 3
    basis = enumerate_full_basis(n)
    for _ in range(40):
        a = basis.elements[rng.integers(len(basis))]
        b = basis.elements[rng.integers(len(basis))]
        phase, c = pauli_product(a, b)
        dense = to_matrix(a) @ to_matrix(b)
        if not np.allclose(dense, phase * to_matrix(c)):
            return False
        comm = dense - to_matrix(b) @ to_matrix(a)
        if commutes(a, b) != np.allclose(comm, 0):
            return False
    return True


def _check_evolution() -> bool:
    spec = exact.TfimSpec(n_sites=3, coupling=1.0, field=1.0)
    obs = exact.Observable.sum_x(3)
    basis = enumerate_full_basis(3)
    evolver = exact.ExactEvolver(spec, obs, basis)
    times = np.linspace(0.0, 4.0, 11)
    coeffs = evolver.coefficient_matrix(times)
    norms = np.sum(coeffs**2, axis=1)
    return bool(np.allclose(norms, norms[0], atol=1e-10))


def _check_solver() -> bool:
    cfg = SolverConfig(rtol=1e-8, atol=1e-10)
    sol = integrate(lambda t, y: -y, np.array([1.0]), 0.0, 2.0, cfg)
    return abs(sol(2.0)[0] - np.exp(-2.0)) < 1e-7


def _check_fft() -> bool:
    times = np.arange(0.0, 40.0, 0.05)
    energy = 1.7
    series = np.exp(-1j * energy * times)
    spectrum = spectra.fft_spectrum(times, series, window="rectangular")
    peak = spectrum.frequencies[np.argmax(spectrum.magnitude)]
    return abs(peak - energy) <= spectrum.resolution


def _check_checkpoint() -> bool:
    net = nn.NetworkSpec(variant="fan", input_dim=6, depth=2, hidden_width=16,
                         frequencies=tuple(np.logspace(-1.0, 1.0, 4)))
    params = nn.init_parameters(net, seed=3)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "ckpt.txt"
        save_checkpoint(path, net, params, {"note": "validate"})
        spec2, params2, meta = load_checkpoint(path)
    return (spec2 == net
            and np.array_equal(params.values, params2.values)
            and meta.get("note") == "validate")


CHECKS = [
    ("pauli-algebra", _check_pauli),
    ("exact-evolution-norm", _check_evolution),
    ("ode-solver", _check_solver),
    ("fft-convention", _check_fft),
    ("checkpoint-roundtrip", _check_checkpoint),
]


def run_validation(config) -> bool:
    ok = True
    for name, check in CHECKS:
        try:
            passed = check()
        except Exception as exc:  # a crash is a failure, not an abort
            print(f"FAIL {name}: {exc}")
            ok = False
            continue
        print(("PASS" if passed else "FAIL") + f" {name}")
        ok = ok and passed
    return ok
