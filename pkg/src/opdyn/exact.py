"""Exact-diagonalization oracle for the transverse-field Ising chain.

Produces Heisenberg-evolved observables, Pauli-coefficient trajectories,
state-preparation measurement simulations, ground-state two-point
functions, exact spectral lines, and process-matrix rows.  Everything is
dense and limited to small chains; this module is the ground truth that
the learning stack is trained on and validated against.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .pauli import (
    ORACLE_LIMIT,
    PauliBasis,
    PauliString,
    SymmetryOperator,
    TruncationPolicy,
    commutes,
    index_action,
    to_matrix,
    truncated_basis,
)

DEGENERACY_TOL = 1e-10
IMAG_TOL = 1e-10


@dataclass(frozen=True)
class TfimSpec:
    """Transverse-field Ising chain parameters.

    ``main_text`` convention builds H = -x sum(ZZ) - field*sum(X); the
    ``appendix`` convention flips both signs.  Periodic boundaries close
    the bond between the last and first site.
    """

    n_sites: int
    coupling: float = 1.0
    field: float = 1.0
    sign_convention: str = "main_text"
    boundary: str = "periodic"

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValueError("n_sites must be positive")
        if self.sign_convention not in ("main_text", "appendix"):
            raise ValueError(f"unknown sign convention {self.sign_convention!r}")
        if self.boundary not in ("periodic", "open"):
            raise ValueError(f"unknown boundary {self.boundary!r}")


@dataclass(frozen=True)
class Observable:
    """Hermitian, traceless observable: a real-weighted sum of non-identity
    Pauli strings."""

    terms: tuple  # of (weight, PauliString)

    def __post_init__(self):
        if not self.terms:
            raise ValueError("observable needs at least one term")
        n = self.terms[0][1].n_sites
        for w, p in self.terms:
            if p.n_sites != n:
                raise ValueError("terms act on different numbers of sites")
            if p.is_identity:
                raise ValueError("identity term not allowed (traceless observable)")

    @classmethod
    def sum_x(cls, n_sites: int) -> "Observable":
        return cls(tuple(
            (1.0, PauliString.single_site(n_sites, i, "X")) for i in range(n_sites)
        ))

    @classmethod
    def from_string(cls, text: str, n_sites: int) -> "Observable":
        """Parse ``sum_x`` or a sum like ``1.0*XII + 0.5*ZZI``."""
        text = text.strip()
        if text == "sum_x":
            return cls.sum_x(n_sites)
        terms = []
        for piece in text.replace("-", "+-").split("+"):
            piece = piece.strip()
            if not piece:
                continue
            if "*" in piece:
                w_str, label = piece.split("*")
                w = float(w_str.replace(" ", ""))
            else:
                w, label = 1.0, piece
                if label.startswith("-"):
                    w, label = -1.0, label[1:]
            terms.append((w, PauliString.from_label(label.strip())))
        return cls(tuple(terms))

    @property
    def n_sites(self) -> int:
        return self.terms[0][1].n_sites

    def to_matrix(self) -> np.ndarray:
        return sum(w * to_matrix(p) for w, p in self.terms)

    def describe(self) -> str:
        return "+".join(f"{w:g}*{p.label}" for w, p in self.terms)


@dataclass(frozen=True)
class EigenSystem:
    """Spectral decomposition H = V diag(E) V^dagger, energies ascending."""

    energies: np.ndarray
    vectors: np.ndarray

    @property
    def ground_state(self) -> np.ndarray:
        return self.vectors[:, 0]

    @property
    def ground_energy(self) -> float:
        return float(self.energies[0])


@dataclass(frozen=True)
class Trajectory:
    """A time grid plus a matrix of real Pauli coefficients.

    Row j holds the reduced coefficient vector at times[j]; columns follow
    the basis label order.
    """

    times: np.ndarray
    basis: PauliBasis
    coeffs: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.coeffs.shape != (len(self.times), len(self.basis)):
            raise ValueError("coefficient matrix does not match grid/basis")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("time grid must be strictly increasing")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("non-finite coefficients")

    def column(self, label: str) -> np.ndarray:
        return self.coeffs[:, self.basis.index(label)]

    def restrict(self, basis: PauliBasis) -> "Trajectory":
        cols = [self.basis.index(l) for l in basis.labels]
        return Trajectory(self.times, basis, self.coeffs[:, cols], dict(self.meta))


def _check_oracle_size(n_sites: int):
    if n_sites > ORACLE_LIMIT:
        raise ValueError(f"dense oracle limited to {ORACLE_LIMIT} sites")


def build_hamiltonian(spec: TfimSpec) -> np.ndarray:
    """Dense TFIM Hamiltonian under the requested sign convention."""
    _check_oracle_size(spec.n_sites)
    n = spec.n_sites
    sign = -1.0 if spec.sign_convention == "main_text" else 1.0
    dim = 2 ** n
    H = np.zeros((dim, dim), dtype=complex)
    n_bonds = n if spec.boundary == "periodic" else n - 1
    for i in range(n_bonds):
        zz = PauliString(n, 0, (1 << i) | (1 << ((i + 1) % n)))
        H += sign * spec.coupling * to_matrix(zz)
    for i in range(n):
        H += sign * spec.field * to_matrix(PauliString.single_site(n, i, "X"))
    return H


def diagonalize(H: np.ndarray) -> EigenSystem:
    energies, vectors = np.linalg.eigh(H)
    if len(energies) > 1 and energies[1] - energies[0] < DEGENERACY_TOL:
        warnings.warn(
            "near-degenerate ground state; using the lowest-index eigenvector",
            stacklevel=2,
        )
    return EigenSystem(energies, vectors)


def heisenberg_evolve(H: np.ndarray, O: Observable, t: float) -> np.ndarray:
    """O(t) = exp(iHt) O exp(-iHt) as a dense matrix."""
    if not np.isfinite(t):
        raise ValueError("time must be finite")
    eig = diagonalize(H)
    return _evolve_in_eigenbasis(eig, O.to_matrix(), t)


def _evolve_in_eigenbasis(eig: EigenSystem, O_mat: np.ndarray, t: float) -> np.ndarray:
    V = eig.vectors
    O_eig = V.conj().T @ O_mat @ V
    phases = np.exp(1j * eig.energies * t)
    Ot_eig = (phases[:, None] * O_eig) * phases.conj()[None, :]
    return V @ Ot_eig @ V.conj().T


def pauli_coefficients(Ot: np.ndarray, basis: PauliBasis) -> np.ndarray:
    """Project a (Hermitian) matrix onto basis strings: c_i = Tr[Ot s_i]/d."""
    d = Ot.shape[0]
    out = np.empty(len(basis))
    for k, p in enumerate(basis):
        c = np.trace(Ot @ to_matrix(p)) / d
        if abs(c.imag) > IMAG_TOL:
            raise ValueError(
                f"coefficient on {p.label} has imaginary part {c.imag:.3e}"
            )
        out[k] = c.real
    return out


# entry cap for caching every basis string in the eigenbasis; above it the
# evolver rotates O(t) back per time step and reads coefficients through
# the sparse Pauli action instead (O(2^N) memory per string, not O(4^N))
SIGMA_CACHE_ENTRIES = 1 << 25


class ExactEvolver:
    """One diagonalization amortized over many evaluation times.

    For small bases, precomputes the eigenbasis representation of every
    basis string, so a full coefficient row costs one phase matrix and
    one matrix-vector product.  For large bases that cache would not fit
    in memory; each call then costs two dense rotations of O(t) plus one
    sparse gather per string.
    """

    def __init__(self, spec: TfimSpec, O: Observable, basis: PauliBasis):
        _check_oracle_size(spec.n_sites)
        self.spec = spec
        self.observable = O
        self.basis = basis
        self.eig = diagonalize(build_hamiltonian(spec))
        V = self.eig.vectors
        self.dim = V.shape[0]
        self._O_eig = V.conj().T @ O.to_matrix() @ V
        self._bohr = self.eig.energies[:, None] - self.eig.energies[None, :]
        self._sigma_flat = None
        if len(basis) * self.dim * self.dim <= SIGMA_CACHE_ENTRIES:
            # row k holds (V^dag s_k V) transposed and flattened, so that
            # Tr[O(t) s_k] is a plain dot product with the flattened O(t).
            sig = np.empty((len(basis), self.dim * self.dim), dtype=complex)
            for k, p in enumerate(basis):
                sig[k] = (V.conj().T @ to_matrix(p) @ V).T.ravel()
            self._sigma_flat = sig
        else:
            cols = np.empty((len(basis), self.dim), dtype=np.int64)
            phases = np.empty((len(basis), self.dim), dtype=complex)
            for k, p in enumerate(basis):
                cols[k], phases[k] = index_action(p)
            self._cols, self._phases = cols, phases

    def coefficients_at(self, t: float) -> np.ndarray:
        Ot_eig = np.exp(1j * self._bohr * t) * self._O_eig
        if self._sigma_flat is not None:
            c = self._sigma_flat @ Ot_eig.ravel() / self.dim
        else:
            V = self.eig.vectors
            Ot = V @ Ot_eig @ V.conj().T
            # Tr[O(t) s_k] = sum_r O(t)[cols_k[r], r] * phases_k[r]
            gathered = Ot[self._cols, np.arange(self.dim)[None, :]]
            c = np.sum(gathered * self._phases, axis=1) / self.dim
        if np.max(np.abs(c.imag)) > IMAG_TOL:
            raise ValueError("Hermiticity violation in coefficient row")
        return c.real

    def coefficient_matrix(self, times) -> np.ndarray:
        return np.stack([self.coefficients_at(t) for t in np.asarray(times)])


def generate_trajectory(
    spec: TfimSpec, O: Observable, policy: TruncationPolicy, grid
) -> Trajectory:
    """Exact coefficient trajectory over a time grid (the training data)."""
    grid = np.asarray(grid, dtype=float)
    if grid[0] < 0 or (len(grid) > 1 and not np.all(np.diff(grid) > 0)):
        raise ValueError("grid must be strictly increasing and start at t >= 0")
    basis = truncated_basis(policy, [p for _, p in O.terms])
    ev = ExactEvolver(spec, O, basis)
    coeffs = ev.coefficient_matrix(grid)
    meta = {
        "n_sites": str(spec.n_sites),
        "coupling": repr(spec.coupling),
        "field": repr(spec.field),
        "sign_convention": spec.sign_convention,
        "boundary": spec.boundary,
        "observable": O.describe(),
        "policy": policy.describe(),
        "seed": "0",
    }
    return Trajectory(grid, basis, coeffs, meta)


def one_point_function(traj: Trajectory, init: PauliString) -> np.ndarray:
    """Tr[O(t) sigma] = d * c_sigma(t) for a basis string initial state.

    Strings removed by the symmetry filter have identically zero series.
    """
    if init.is_identity:
        raise ValueError("identity initial string rejected (traceless observable)")
    d = 2 ** init.n_sites
    if init.label in traj.basis:
        return d * traj.column(init.label)
    sym = SymmetryOperator.bit_flip(init.n_sites)
    if "symmetry=on" in traj.meta.get("policy", "") and not commutes(init, sym.generator):
        return np.zeros(len(traj.times))
    raise ValueError(f"{init.label} is not in the trajectory basis")


def measure_coefficient_via_state(
    spec: TfimSpec,
    O: Observable,
    sigma: PauliString,
    t: float,
    shots: int | None = None,
    rng_seed: int = 0,
) -> float:
    """Simulate the state-preparation measurement of one coefficient.

    Prepares rho = (sigma + 1)/d, evolves it forward in time, and returns
    Tr[O rho(t)], which equals c_sigma(t) for traceless O.  With ``shots``
    set, each observable term is sampled with binomial statistics.
    """
    _check_oracle_size(spec.n_sites)
    d = 2 ** spec.n_sites
    eig = diagonalize(build_hamiltonian(spec))
    V = eig.vectors
    rho = (to_matrix(sigma) + np.eye(d)) / d
    U_eig = np.exp(-1j * eig.energies * t)
    rho_eig = V.conj().T @ rho @ V
    rho_t = V @ ((U_eig[:, None] * rho_eig) * U_eig.conj()[None, :]) @ V.conj().T
    if shots is None:
        val = np.trace(O.to_matrix() @ rho_t)
        return float(val.real)
    if shots <= 0:
        raise ValueError("shots must be positive")
    rng = np.random.default_rng(rng_seed)
    total = 0.0
    for w, p in O.terms:
        e = float(np.trace(to_matrix(p) @ rho_t).real)
        prob = min(max((1.0 + e) / 2.0, 0.0), 1.0)
        total += w * (2.0 * rng.binomial(shots, prob) / shots - 1.0)
    return total


def _ground_state_amplitudes(spec: TfimSpec, O: Observable):
    eig = diagonalize(build_hamiltonian(spec))
    amps = eig.vectors.conj().T @ O.to_matrix() @ eig.ground_state
    freqs = eig.energies - eig.ground_energy
    return eig, freqs, amps


def two_point_function(spec: TfimSpec, O: Observable, grid) -> np.ndarray:
    """Ground-state two-point function C(t) = <Omega|O(t) O|Omega>."""
    grid = np.asarray(grid, dtype=float)
    if len(grid) > 1 and not np.all(np.diff(grid) > 0):
        raise ValueError("grid must be strictly increasing")
    _, freqs, amps = _ground_state_amplitudes(spec, O)
    weights = np.abs(amps) ** 2
    return np.exp(-1j * np.outer(grid, freqs)) @ weights.astype(complex)


def exact_spectral_lines(spec: TfimSpec, O: Observable, weight_tol: float = 1e-12):
    """Excitation lines (E_n - E_0, |<n|O|Omega>|^2), zero-weight lines
    omitted and degenerate frequencies merged."""
    _, freqs, amps = _ground_state_amplitudes(spec, O)
    weights = np.abs(amps) ** 2
    lines = []
    for f, w in zip(freqs, weights):
        if w < weight_tol:
            continue
        if lines and abs(lines[-1][0] - f) < 1e-8:
            lines[-1] = (lines[-1][0], lines[-1][1] + w)
        else:
            lines.append((float(f), float(w)))
    return lines


def process_matrix_row(
    spec: TfimSpec,
    O: Observable,
    basis: PauliBasis,
    t: float,
    depolarizing_gamma: float = 0.0,
) -> np.ndarray:
    """One row of the Pauli process matrix: Tr[O E_t(sigma_i)]/d.

    For the unitary channel this equals the Heisenberg-picture coefficient
    row; an analytic depolarizing channel of rate gamma multiplies the row
    by exp(-gamma*t) (traceless strings contract uniformly).
    """
    _check_oracle_size(spec.n_sites)
    eig = diagonalize(build_hamiltonian(spec))
    V = eig.vectors
    d = 2 ** spec.n_sites
    O_mat = O.to_matrix()
    U_eig = np.exp(-1j * eig.energies * t)
    row = np.empty(len(basis))
    for k, p in enumerate(basis):
        sig_eig = V.conj().T @ to_matrix(p) @ V
        evolved = V @ ((U_eig[:, None] * sig_eig) * U_eig.conj()[None, :]) @ V.conj().T
        val = np.trace(O_mat @ evolved) / d
        if abs(val.imag) > IMAG_TOL:
            raise ValueError("Hermiticity violation in process-matrix row")
        row[k] = val.real
    if depolarizing_gamma:
        row = np.exp(-depolarizing_gamma * t) * row
    return row
