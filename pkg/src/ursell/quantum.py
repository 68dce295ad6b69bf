"""Dense state vectors, observables and exact time evolution.

Bit convention: site 0 is the most significant bit of the basis index, so
the amplitude array reshapes to a tensor whose axis ``k`` is site ``k``.
"""

from __future__ import annotations

import math
import warnings
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import reduce
from itertools import combinations

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .config import DENSE_EXPM_CEILING, ResourceLimitError, dense_ceiling

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
COMMUTE_TOL = 1e-12

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_PHASES = (1, -1, 1j, -1j)


def _product_table() -> dict[tuple[str, str], tuple[complex, str]]:
    table = {}
    for a, ma in PAULI.items():
        for b, mb in PAULI.items():
            prod = ma @ mb
            for letter, mat in PAULI.items():
                for ph in _PHASES:
                    if np.allclose(prod, ph * mat):
                        table[a, b] = (ph, letter)
    return table


_PRODUCT = _product_table()


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=complex, copy=True)
    array.setflags(write=False)
    return array


class StateVector:
    """Normalized pure state of ``n`` qubits, stored as ``2**n`` amplitudes."""

    __slots__ = ("n", "amplitudes")

    def __init__(self, amplitudes, *, normalize: bool = False) -> None:
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        size = amps.size
        n = size.bit_length() - 1
        if size < 2 or 1 << n != size:
            raise ValueError(f"amplitude count must be a power of two >= 2, got {size}")
        if n > dense_ceiling():
            raise ResourceLimitError(f"n={n} exceeds the dense ceiling {dense_ceiling()}")
        norm = np.linalg.norm(amps)
        if normalize:
            if norm == 0:
                raise ValueError("cannot normalize the zero vector")
            amps = amps / norm
        elif abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized: norm = {norm!r}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "amplitudes", _frozen(amps))

    def __setattr__(self, name, value):
        raise AttributeError("StateVector is immutable")

    def __repr__(self) -> str:
        return f"StateVector(n={self.n})"

    @classmethod
    def basis(cls, bits: Sequence[int] | str) -> StateVector:
        """Computational basis state; ``bits[0]`` is site 0."""
        bits = [int(b) for b in bits]
        index = 0
        for b in bits:
            if b not in (0, 1):
                raise ValueError(f"bits must be 0/1, got {b}")
            index = (index << 1) | b
        amps = np.zeros(1 << len(bits), dtype=complex)
        amps[index] = 1.0
        return cls(amps)

    @classmethod
    def product(cls, site_states: Sequence[Sequence[complex]]) -> StateVector:
        vecs = [np.asarray(v, dtype=complex) for v in site_states]
        for v in vecs:
            if v.shape != (2,):
                raise ValueError("each site state must have two amplitudes")
        return cls(reduce(np.kron, vecs), normalize=True)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> StateVector:
        amps = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
        return cls(amps, normalize=True)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.n)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def inner(self, other: StateVector) -> complex:
        """Return ``<self|other>``."""
        if other.n != self.n:
            raise ValueError(f"dimension mismatch: {self.n} vs {other.n} qubits")
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True, eq=False)
class Observable:
    """Hermitian operator acting on the listed sites.

    ``matrix`` is ``2**k x 2**k`` for ``k = len(support)``, with ``support[0]``
    as the most significant qubit of the local index.
    """

    support: tuple[int, ...]
    matrix: np.ndarray
    label: str = ""

    def __post_init__(self) -> None:
        support = tuple(int(s) for s in self.support)
        if len(set(support)) != len(support):
            raise ValueError(f"repeated site in support {support}")
        if any(s < 0 for s in support):
            raise ValueError(f"negative site in support {support}")
        matrix = np.asarray(self.matrix, dtype=complex)
        dim = 1 << len(support)
        if matrix.shape != (dim, dim):
            raise ValueError(f"matrix shape {matrix.shape} does not match support of size {len(support)}")
        if np.max(np.abs(matrix - matrix.conj().T), initial=0.0) > HERMITIAN_TOL:
            raise ValueError("observable matrix is not Hermitian")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "matrix", _frozen(matrix))
        if np.linalg.norm(matrix, 2) > 1 + 1e-9:
            warnings.warn(
                f"observable {self.label or support} has operator norm above 1",
                stacklevel=3,
            )

    @classmethod
    def pauli(cls, letters: str, sites: Sequence[int] | None = None, phase: complex = 1) -> Observable:
        return PauliString.from_letters(letters, sites, phase).to_observable()

    @classmethod
    def identity(cls, support: Sequence[int]) -> Observable:
        support = tuple(support)
        return cls(support, np.eye(1 << len(support)), label="I")

    def __repr__(self) -> str:
        name = self.label or "Observable"
        return f"{name}@{self.support}"


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-site Paulis with a phase in {1, -1, i, -i}.

    ``ops`` maps site to one of ``"X"``, ``"Y"``, ``"Z"``; identity sites are
    simply absent.
    """

    ops: tuple[tuple[int, str], ...]
    phase: complex = 1

    def __post_init__(self) -> None:
        cleaned: dict[int, str] = {}
        for site, letter in self.ops:
            letter = letter.upper()
            if letter not in PAULI:
                raise ValueError(f"unknown Pauli letter {letter!r}")
            if site in cleaned:
                raise ValueError(f"site {site} appears twice in Pauli string")
            if site < 0:
                raise ValueError(f"negative site {site}")
            if letter != "I":
                cleaned[int(site)] = letter
        if not any(abs(self.phase - p) < 1e-12 for p in _PHASES):
            raise ValueError(f"Pauli phase must be one of +-1, +-i, got {self.phase}")
        object.__setattr__(self, "ops", tuple(sorted(cleaned.items())))
        object.__setattr__(self, "phase", complex(self.phase))

    @classmethod
    def from_letters(cls, letters: str, sites: Sequence[int] | None = None, phase: complex = 1) -> PauliString:
        """``from_letters("XZ", [3, 5])`` is X on site 3 times Z on site 5.

        Without ``sites`` the letters cover sites ``0..len(letters)-1``.
        """
        if sites is None:
            sites = range(len(letters))
        sites = list(sites)
        if len(sites) != len(letters):
            raise ValueError("letters and sites differ in length")
        return cls(tuple(zip(sites, letters)), phase)

    @classmethod
    def from_mapping(cls, ops: Mapping[int, str], phase: complex = 1) -> PauliString:
        return cls(tuple(ops.items()), phase)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(site for site, _ in self.ops)

    @property
    def is_hermitian(self) -> bool:
        return abs(self.phase.imag) < 1e-12

    def letter(self, site: int) -> str:
        return dict(self.ops).get(site, "I")

    def to_observable(self) -> Observable:
        if not self.is_hermitian:
            raise ValueError("Pauli strings with phase +-i are not Hermitian")
        if not self.ops:
            raise ValueError("empty Pauli string has no support; use Observable.identity")
        mats = [PAULI[letter] for _, letter in self.ops]
        label = ("-" if self.phase.real < 0 else "") + "".join(f"{l}{s}" for s, l in self.ops)
        return Observable(self.support, self.phase.real * reduce(np.kron, mats), label=label)

    def __mul__(self, other: PauliString) -> PauliString:
        mine = dict(self.ops)
        theirs = dict(other.ops)
        phase = self.phase * other.phase
        out: dict[int, str] = {}
        for site in sorted(set(mine) | set(theirs)):
            ph, letter = _PRODUCT[mine.get(site, "I"), theirs.get(site, "I")]
            phase *= ph
            out[site] = letter
        return PauliString(tuple(out.items()), phase)

    def __str__(self) -> str:
        sign = {1: "+", -1: "-", 1j: "+i", -1j: "-i"}[complex(round(self.phase.real), round(self.phase.imag))]
        return sign + ("".join(f"{l}{s}" for s, l in self.ops) or "I")


def as_observable(obs) -> Observable:
    if isinstance(obs, Observable):
        return obs
    if isinstance(obs, PauliString):
        return obs.to_observable()
    raise TypeError(f"expected Observable or PauliString, got {type(obs).__name__}")


def check_disjoint(observables: Iterable[Observable], n: int | None = None) -> None:
    seen: set[int] = set()
    for obs in observables:
        sup = set(obs.support)
        if seen & sup:
            raise ValueError(f"observable supports overlap on sites {sorted(seen & sup)}")
        if n is not None and any(s >= n for s in sup):
            raise ValueError(f"support {obs.support} out of range for {n} qubits")
        seen |= sup


def apply_local(tensor: np.ndarray, matrix: np.ndarray, sites: Sequence[int]) -> np.ndarray:
    """Apply a ``2**k`` matrix to the given axes of a ``(2,)*n`` tensor."""
    k = len(sites)
    op = np.asarray(matrix).reshape((2,) * (2 * k))
    out = np.tensordot(op, tensor, axes=(list(range(k, 2 * k)), list(sites)))
    return np.moveaxis(out, list(range(k)), list(sites))


def apply_observables(state: StateVector, observables: Sequence) -> np.ndarray:
    """Return ``A_1 ... A_k |psi>`` as a flat array (``A_k`` applied first)."""
    tensor = state.tensor()
    for obs in reversed([as_observable(o) for o in observables]):
        tensor = apply_local(tensor, obs.matrix, obs.support)
    return tensor.reshape(-1)


def expectation(state: StateVector, observables: Sequence) -> complex:
    """``<psi| A_1 A_2 ... A_k |psi>`` for observables on disjoint supports."""
    obs = [as_observable(o) for o in observables]
    check_disjoint(obs, state.n)
    if not obs:
        return complex(state.norm() ** 2)
    return complex(np.vdot(state.amplitudes, apply_observables(state, obs)))


def apply_cz(state: StateVector, i: int, j: int) -> StateVector:
    """Controlled-Z between sites ``i`` and ``j``: negate amplitudes with both bits set."""
    if i == j:
        raise ValueError("controlled-Z needs two distinct sites")
    n = state.n
    if not (0 <= i < n and 0 <= j < n):
        raise ValueError(f"sites ({i}, {j}) out of range for {n} qubits")
    tensor = np.array(state.tensor())
    index = [slice(None)] * n
    index[i] = 1
    index[j] = 1
    tensor[tuple(index)] *= -1
    return StateVector(tensor.reshape(-1))


def global_phase_distance(a: StateVector, b: StateVector) -> float:
    """``min_phi || a - exp(i phi) b ||`` = ``sqrt(2 - 2 |<a|b>|)``."""
    overlap = abs(a.inner(b))
    return math.sqrt(max(0.0, 2.0 - 2.0 * overlap))


# Hamiltonians ---------------------------------------------------------------

XX = np.kron(PAULI["X"], PAULI["X"])
CZ_GENERATOR = (
    np.eye(4)
    + np.kron(PAULI["Z"], PAULI["I"])
    + np.kron(PAULI["I"], PAULI["Z"])
    - np.kron(PAULI["Z"], PAULI["Z"])
).astype(complex)


@dataclass(frozen=True, eq=False)
class Term:
    """``coupling * matrix`` acting on ``sites`` (one or two of them)."""

    coupling: float
    sites: tuple[int, ...]
    matrix: np.ndarray
    label: str = ""

    def __post_init__(self) -> None:
        sites = tuple(int(s) for s in self.sites)
        if len(sites) not in (1, 2) or len(set(sites)) != len(sites):
            raise ValueError(f"terms act on one site or two distinct sites, got {sites}")
        matrix = np.asarray(self.matrix, dtype=complex)
        if matrix.shape != (1 << len(sites),) * 2:
            raise ValueError(f"term matrix shape {matrix.shape} does not fit sites {sites}")
        if np.max(np.abs(matrix - matrix.conj().T)) > HERMITIAN_TOL:
            raise ValueError("term matrix is not Hermitian")
        if not math.isfinite(self.coupling):
            raise ValueError("coupling must be finite")
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "matrix", _frozen(matrix))
        object.__setattr__(self, "coupling", float(self.coupling))


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    """Sum of one- and two-site terms on ``n`` qubits.

    Two-site couplings satisfy ``|J| <= 1``. When ``geometry`` and
    ``max_range`` are given, every pair must lie within that distance.
    """

    n: int
    terms: tuple[Term, ...]
    geometry: object | None = None
    max_range: float | None = None
    _commuting: bool | None = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "terms", tuple(self.terms))
        for term in self.terms:
            if any(s >= self.n for s in term.sites):
                raise ValueError(f"term sites {term.sites} out of range for {self.n} qubits")
            if len(term.sites) == 2 and abs(term.coupling) > 1 + 1e-12:
                raise ValueError(f"two-site coupling {term.coupling} exceeds 1 in magnitude")
            if self.geometry is not None and self.max_range is not None and len(term.sites) == 2:
                d = self.geometry.distance(*term.sites)
                if d > self.max_range + 1e-9:
                    raise ValueError(
                        f"term on {term.sites} spans distance {d} beyond range {self.max_range}"
                    )

    @classmethod
    def xx_chain(cls, n: int, couplings: float | Sequence[float] = 1.0, **kw) -> Hamiltonian:
        """Open chain ``sum_i J_i X_i X_{i+1}``."""
        if isinstance(couplings, (int, float)):
            couplings = [float(couplings)] * (n - 1)
        if len(couplings) != n - 1:
            raise ValueError("need n - 1 couplings for an open chain")
        terms = [Term(J, (i, i + 1), XX, "XX") for i, J in enumerate(couplings)]
        return cls(n, tuple(terms), **kw)

    @classmethod
    def controlled_z(cls, n: int, edges: Iterable[tuple[int, int]], **kw) -> Hamiltonian:
        """``sum_(i,j) (I + Z_i + Z_j - Z_i Z_j)``; evolving for pi/4 gives CZ on every edge."""
        terms = [Term(1.0, (i, j), CZ_GENERATOR, "HcZ") for i, j in edges]
        return cls(n, tuple(terms), **kw)

    @property
    def commuting(self) -> bool:
        if self._commuting is None:
            object.__setattr__(self, "_commuting", _all_commute(self.terms))
        return self._commuting

    def dense(self) -> np.ndarray:
        dim = 1 << self.n
        h = np.zeros((dim, dim), dtype=complex)
        for term in self.terms:
            h += term.coupling * embed(term.matrix, term.sites, self.n)
        return h

    def sparse(self) -> scipy.sparse.csr_matrix:
        h = scipy.sparse.csr_matrix((1 << self.n, 1 << self.n), dtype=complex)
        for term in self.terms:
            h = h + term.coupling * _embed_sparse(term.matrix, term.sites, self.n)
        return h


def embed(matrix: np.ndarray, sites: Sequence[int], n: int) -> np.ndarray:
    """Full ``2**n`` matrix of a local operator."""
    dim = 1 << n
    cols = np.eye(dim, dtype=complex).reshape((2,) * n + (dim,))
    out = apply_local(cols, matrix, sites)
    return out.reshape(dim, dim)


def _embed_sparse(matrix, sites, n):
    # permute so that ``sites`` lead, kron with identity, permute back
    k = len(sites)
    rest = [s for s in range(n) if s not in sites]
    op = scipy.sparse.kron(scipy.sparse.csr_matrix(matrix), scipy.sparse.identity(1 << (n - k)), format="csr")
    order = list(sites) + rest
    perm = _basis_permutation(order, n)
    return op[perm][:, perm]


def _basis_permutation(order, n):
    # index in the reordered basis for each original basis index
    idx = np.arange(1 << n)
    bits = [(idx >> (n - 1 - s)) & 1 for s in range(n)]
    new = np.zeros_like(idx)
    for b in order:
        new = (new << 1) | bits[b]
    return new


def _all_commute(terms: Sequence[Term]) -> bool:
    for a, b in combinations(terms, 2):
        if not set(a.sites) & set(b.sites):
            continue
        joint = sorted(set(a.sites) | set(b.sites))
        pos = {s: k for k, s in enumerate(joint)}
        ma = embed(a.matrix, [pos[s] for s in a.sites], len(joint))
        mb = embed(b.matrix, [pos[s] for s in b.sites], len(joint))
        if np.linalg.norm(ma @ mb - mb @ ma) > COMMUTE_TOL:
            return False
    return True


def hermitian_expm(matrix: np.ndarray, scale: complex) -> np.ndarray:
    """``exp(scale * matrix)`` for Hermitian ``matrix`` via its eigenbasis."""
    w, v = np.linalg.eigh(matrix)
    return (v * np.exp(scale * w)) @ v.conj().T


def evolve(state: StateVector, h: Hamiltonian, t: float) -> StateVector:
    """Return ``exp(-i H t) |psi>`` without Trotterization.

    Mutually commuting term sets are applied as a product of exact local
    exponentials. Otherwise the full generator is exponentiated densely
    (scaling and squaring) up to 10 qubits; larger non-commuting systems go
    through ``scipy.sparse.linalg.expm_multiply``.
    """
    t = float(t)
    if not math.isfinite(t):
        raise ValueError(f"evolution time must be finite, got {t}")
    if h.n != state.n:
        raise ValueError(f"dimension mismatch: state has {state.n} qubits, Hamiltonian {h.n}")
    if t == 0.0 or not h.terms:
        return state
    if h.commuting:
        tensor = state.tensor()
        for term in h.terms:
            u = hermitian_expm(term.matrix, -1j * term.coupling * t)
            tensor = apply_local(tensor, u, term.sites)
        amps = tensor.reshape(-1)
    elif state.n <= DENSE_EXPM_CEILING:
        amps = scipy.linalg.expm(-1j * t * h.dense()) @ state.amplitudes
    else:
        amps = scipy.sparse.linalg.expm_multiply(-1j * t * h.sparse(), state.amplitudes)
    drift = abs(np.linalg.norm(amps) - 1.0)
    if drift > 1e-10:
        raise ArithmeticError(f"evolution lost unitarity: norm drift {drift:.3e}")
    return StateVector(amps, normalize=True)


def reduced_density_matrix(state: StateVector, sites: Sequence[int]) -> np.ndarray:
    """Density matrix on ``sites`` (in the given order)."""
    sites = list(sites)
    rest = [s for s in range(state.n) if s not in sites]
    psi = np.transpose(state.tensor(), sites + rest).reshape(1 << len(sites), -1)
    return psi @ psi.conj().T
