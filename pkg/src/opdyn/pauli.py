"""Pauli-string algebra on symplectic bitmasks.

A Pauli string over N sites is stored as two N-bit masks: bit i of
``x_mask`` is set when site i carries X or Y, bit i of ``z_mask`` when it
carries Z or Y.  Products and commutation checks never touch matrices;
dense matrices are available separately as a small-system oracle.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

ORACLE_LIMIT = 8

_LETTER_TO_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_TO_LETTER = {v: k for k, v in _LETTER_TO_BITS.items()}

# Single-site products: (a, b) -> (exponent of i in the phase, product letter).
_SITE_PRODUCT = {}
for _a in "IXYZ":
    for _b in "IXYZ":
        if _a == "I":
            _SITE_PRODUCT[(_a, _b)] = (0, _b)
        elif _b == "I":
            _SITE_PRODUCT[(_a, _b)] = (0, _a)
        elif _a == _b:
            _SITE_PRODUCT[(_a, _b)] = (0, "I")
_SITE_PRODUCT.update({
    ("X", "Y"): (1, "Z"), ("Y", "X"): (3, "Z"),
    ("Y", "Z"): (1, "X"), ("Z", "Y"): (3, "X"),
    ("Z", "X"): (1, "Y"), ("X", "Z"): (3, "Y"),
})

_SINGLE_QUBIT_MATRIX = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

_PHASES = (1 + 0j, 1j, -1 + 0j, -1j)


@dataclass(frozen=True, order=True)
class PauliString:
    """Tensor product of {I, X, Y, Z} over ``n_sites`` lattice sites.

    Site 0 is the leftmost letter of the text label.
    """

    n_sites: int
    x_mask: int = 0
    z_mask: int = 0

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValueError("n_sites must be positive")
        top = 1 << self.n_sites
        if not (0 <= self.x_mask < top and 0 <= self.z_mask < top):
            raise ValueError("mask exceeds n_sites bits")

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Build from a text label such as ``"XIZ"`` (site 0 leftmost)."""
        if not label or any(c not in "IXYZ" for c in label):
            raise ValueError(f"malformed Pauli label {label!r}")
        x = z = 0
        for i, c in enumerate(label):
            xb, zb = _LETTER_TO_BITS[c]
            x |= xb << i
            z |= zb << i
        return cls(len(label), x, z)

    @classmethod
    def single_site(cls, n_sites: int, site: int, letter: str) -> "PauliString":
        xb, zb = _LETTER_TO_BITS[letter]
        return cls(n_sites, xb << site, zb << site)

    @classmethod
    def identity(cls, n_sites: int) -> "PauliString":
        return cls(n_sites, 0, 0)

    @property
    def label(self) -> str:
        return "".join(
            _BITS_TO_LETTER[(self.x_mask >> i & 1, self.z_mask >> i & 1)]
            for i in range(self.n_sites)
        )

    def letter(self, site: int) -> str:
        return _BITS_TO_LETTER[(self.x_mask >> site & 1, self.z_mask >> site & 1)]

    @property
    def is_identity(self) -> bool:
        return self.x_mask == 0 and self.z_mask == 0

    def support(self) -> frozenset:
        occ = self.x_mask | self.z_mask
        return frozenset(i for i in range(self.n_sites) if occ >> i & 1)

    @property
    def weight(self) -> int:
        return bin(self.x_mask | self.z_mask).count("1")

    def __str__(self) -> str:
        return self.label


def pauli_product(a: PauliString, b: PauliString):
    """Product of two Pauli strings.

    Returns ``(phase, c)`` with ``matrix(a) @ matrix(b) == phase * matrix(c)``
    and ``phase`` one of {1, i, -1, -i}.
    """
    if a.n_sites != b.n_sites:
        raise ValueError("Pauli strings act on different numbers of sites")
    exponent = 0
    overlap = (a.x_mask | a.z_mask) & (b.x_mask | b.z_mask)
    for i in range(a.n_sites):
        if overlap >> i & 1:
            exponent += _SITE_PRODUCT[(a.letter(i), b.letter(i))][0]
    return _PHASES[exponent % 4], PauliString(
        a.n_sites, a.x_mask ^ b.x_mask, a.z_mask ^ b.z_mask
    )


def commutes(a: PauliString, b: PauliString) -> bool:
    """True iff the dense matrices of a and b commute.

    Uses the symplectic form: the strings anticommute iff the number of
    sites with anticommuting single-site letters is odd.
    """
    if a.n_sites != b.n_sites:
        raise ValueError("Pauli strings act on different numbers of sites")
    parity = bin(a.x_mask & b.z_mask).count("1") + bin(a.z_mask & b.x_mask).count("1")
    return parity % 2 == 0


def index_action(p: PauliString):
    """Sparse action of a Pauli string in the computational basis.

    Returns ``(cols, phases)`` with ``to_matrix(p)[r, cols[r]] == phases[r]``
    being the only nonzero entry of each row r (site 0 is the most
    significant index bit, matching :func:`to_matrix`).  Memory is O(2^N)
    per string instead of the O(4^N) dense matrix.
    """
    if p.n_sites > ORACLE_LIMIT:
        raise ValueError(f"dense oracle limited to {ORACLE_LIMIT} sites")
    n = p.n_sites
    x_idx = z_idx = 0
    n_y = 0
    for site in range(n):
        bit = 1 << (n - 1 - site)
        if p.x_mask >> site & 1:
            x_idx |= bit
        if p.z_mask >> site & 1:
            z_idx |= bit
        if (p.x_mask >> site & 1) and (p.z_mask >> site & 1):
            n_y += 1
    idx = np.arange(1 << n)
    cols = idx ^ x_idx
    # per column c the entry is i^{#Y} (-1)^{popcount(c & z)}; row r = c ^ x
    signs = 1 - 2 * (np.bitwise_count(cols & z_idx).astype(np.int64) & 1)
    phases = _PHASES[n_y % 4] * signs.astype(complex)
    return cols, phases


def to_matrix(p: PauliString) -> np.ndarray:
    """Dense 2^N x 2^N matrix of a Pauli string (small-N oracle only)."""
    if p.n_sites > ORACLE_LIMIT:
        raise ValueError(f"dense oracle limited to {ORACLE_LIMIT} sites")
    m = _SINGLE_QUBIT_MATRIX[p.letter(0)]
    for i in range(1, p.n_sites):
        m = np.kron(m, _SINGLE_QUBIT_MATRIX[p.letter(i)])
    return m


@dataclass(frozen=True)
class PauliBasis:
    """Ordered, duplicate-free collection of Pauli strings.

    Ordering is lexicographic over labels (with I < X < Y < Z) so that
    coefficient-vector columns are stable across runs.
    """

    elements: tuple
    labels: tuple

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate basis elements")
        if self.elements and len({p.n_sites for p in self.elements}) != 1:
            raise ValueError("basis elements act on different numbers of sites")

    @classmethod
    def from_elements(cls, elements) -> "PauliBasis":
        elems = tuple(sorted(set(elements), key=lambda p: p.label))
        return cls(elems, tuple(p.label for p in elems))

    @classmethod
    def from_labels(cls, labels) -> "PauliBasis":
        return cls(tuple(PauliString.from_label(l) for l in labels), tuple(labels))

    @property
    def n_sites(self) -> int:
        return self.elements[0].n_sites

    def index(self, label: str) -> int:
        return self._index_map()[label]

    @lru_cache(maxsize=None)
    def _index_map(self):
        return {l: i for i, l in enumerate(self.labels)}

    def __len__(self) -> int:
        return len(self.elements)

    def __contains__(self, item) -> bool:
        label = item.label if isinstance(item, PauliString) else item
        return label in self._index_map()

    def __iter__(self):
        return iter(self.elements)


def enumerate_full_basis(n_sites: int) -> PauliBasis:
    """All 4^N Pauli strings in deterministic lexicographic order.

    The identity comes first since ``I`` sorts before X, Y, Z.
    """
    if n_sites < 1:
        raise ValueError("n_sites must be positive")
    labels = ["".join(t) for t in itertools.product("IXYZ", repeat=n_sites)]
    return PauliBasis.from_labels(labels)


@dataclass(frozen=True)
class SymmetryOperator:
    """A Pauli-string symmetry generator, by default the global bit-flip
    operator (X on every site)."""

    generator: PauliString

    @classmethod
    def bit_flip(cls, n_sites: int) -> "SymmetryOperator":
        return cls(PauliString(n_sites, (1 << n_sites) - 1, 0))

    def __post_init__(self):
        phase, sq = pauli_product(self.generator, self.generator)
        if phase != 1 or not sq.is_identity:
            raise ValueError("symmetry generator must square to the identity")


@dataclass(frozen=True)
class TruncationPolicy:
    """How to cut the 4^N coefficient vector down to a tractable one.

    ``window`` mode keeps strings supported inside a contiguous window of
    length 2r+1 (periodic wrap) around the support of some observable
    term.  ``velocity`` is informational: it only feeds
    :meth:`suggested_radius`.
    """

    mode: str = "full"
    window_radius: int = 0
    velocity: float | None = None
    symmetry_filter: bool = False

    def __post_init__(self):
        if self.mode not in ("full", "window"):
            raise ValueError(f"unknown truncation mode {self.mode!r}")
        if self.window_radius < 0:
            raise ValueError("window_radius must be nonnegative")
        if self.velocity is not None and self.velocity < 0:
            raise ValueError("velocity must be nonnegative")

    def suggested_radius(self, horizon: float) -> int:
        if self.velocity is None:
            raise ValueError("no propagation velocity configured")
        return math.ceil(self.velocity * horizon)

    def describe(self) -> str:
        parts = [f"mode={self.mode}"]
        if self.mode == "window":
            parts.append(f"radius={self.window_radius}")
        parts.append(f"symmetry={'on' if self.symmetry_filter else 'off'}")
        return ";".join(parts)


def symmetry_filter(basis: PauliBasis, s: SymmetryOperator) -> PauliBasis:
    """Keep exactly the strings that commute with the symmetry generator."""
    kept = [p for p in basis if commutes(p, s.generator)]
    return PauliBasis.from_elements(kept)


def _window_sites(n_sites: int, support, radius: int) -> frozenset:
    """Contiguous periodic window of radius r around a support set."""
    sites = set()
    for s in support:
        for off in range(-radius, radius + 1):
            sites.add((s + off) % n_sites)
    return frozenset(sites)


def _strings_within(n_sites: int, sites: frozenset):
    """All non-identity strings whose support lies inside ``sites``."""
    sites = sorted(sites)
    for letters in itertools.product("IXYZ", repeat=len(sites)):
        if all(c == "I" for c in letters):
            continue
        x = z = 0
        for site, c in zip(sites, letters):
            xb, zb = _LETTER_TO_BITS[c]
            x |= xb << site
            z |= zb << site
        yield PauliString(n_sites, x, z)


def truncated_basis(policy: TruncationPolicy, observable_terms) -> PauliBasis:
    """Coefficient basis after locality and symmetry reduction.

    Overlapping windows are deduplicated; the identity string is always
    excluded (traceless observables only).
    """
    terms = list(observable_terms)
    if not terms:
        raise ValueError("observable has no terms")
    n = terms[0].n_sites
    if any(t.n_sites != n for t in terms):
        raise ValueError("observable terms act on different numbers of sites")

    if policy.mode == "full":
        kept = [p for p in enumerate_full_basis(n) if not p.is_identity]
    else:
        windows = {_window_sites(n, t.support(), policy.window_radius) for t in terms}
        seen = set()
        kept = []
        for w in windows:
            for p in _strings_within(n, w):
                if p not in seen:
                    seen.add(p)
                    kept.append(p)
    basis = PauliBasis.from_elements(kept)
    if policy.symmetry_filter:
        basis = symmetry_filter(basis, SymmetryOperator.bit_flip(n))
    return basis
