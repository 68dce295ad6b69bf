"""Reference states: GHZ, product, the tripartite example, graph states.

Graph states are available both as dense vectors (controlled-Z circuit on
``|+>^n``) and as stabilizer groups in binary symplectic form, which lets
Pauli correlators be evaluated exactly far beyond the dense ceiling.
"""

from __future__ import annotations

import json
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .config import ResourceLimitError, dense_ceiling
from .partitions import moebius_g
from .quantum import Hamiltonian, PauliString, StateVector, apply_cz, evolve

STABILIZER_KERNEL_LIMIT = 20


# Graphs ---------------------------------------------------------------------


@dataclass(frozen=True)
class GraphSpec:
    """Simple undirected graph on vertices ``0..n-1`` with optional coordinates."""

    n: int
    edges: tuple[tuple[int, int], ...]
    positions: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"graph needs at least one vertex, got n={self.n}")
        normal = set()
        for edge in self.edges:
            i, j = (int(v) for v in edge)
            if i == j:
                raise ValueError(f"self-loop on vertex {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) out of range for n={self.n}")
            key = (min(i, j), max(i, j))
            if key in normal:
                raise ValueError(f"duplicate edge {key}")
            normal.add(key)
        object.__setattr__(self, "edges", tuple(sorted(normal)))
        if self.positions is not None:
            pos = tuple(tuple(float(c) for c in p) for p in self.positions)
            if len(pos) != self.n:
                raise ValueError("need one position per vertex")
            object.__setattr__(self, "positions", pos)

    @classmethod
    def path(cls, n: int) -> GraphSpec:
        return cls(n, tuple((i, i + 1) for i in range(n - 1)), tuple((float(i),) for i in range(n)))

    @classmethod
    def empty(cls, n: int) -> GraphSpec:
        return cls(n, ())

    @classmethod
    def from_dict(cls, data: dict) -> GraphSpec:
        try:
            n = int(data["n"])
            edges = tuple(tuple(e) for e in data["edges"])
        except (KeyError, TypeError) as exc:
            raise ValueError(f"graph document needs 'n' and 'edges': {exc}") from exc
        positions = data.get("positions")
        return cls(n, edges, tuple(tuple(p) for p in positions) if positions is not None else None)

    @classmethod
    def from_json(cls, path: str | Path) -> GraphSpec:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        out: dict = {"n": self.n, "edges": [list(e) for e in self.edges]}
        if self.positions is not None:
            out["positions"] = [list(p) for p in self.positions]
        return out

    def neighbours(self, v: int) -> list[int]:
        return sorted({j for i, j in self.edges if i == v} | {i for i, j in self.edges if j == v})


@lru_cache(maxsize=1)
def _fig3b_fixture() -> dict:
    with resources.files("ursell").joinpath("data/fig3b.json").open() as fh:
        return json.load(fh)


def fig3b_graph(n: int) -> GraphSpec:
    """Chain of K4 cells sharing one vertex, as described in ``data/fig3b.json``."""
    fx = _fig3b_fixture()
    period, cell = fx["period"], fx["cell_size"]
    if n < cell or (n - 1) % period:
        raise ValueError(f"the long-range cluster graph needs n >= 4 and n = 1 mod 3, got {n}")
    edges = set()
    for start in range(0, n - cell + 1, period):
        for a, b in fx["cell_edges"]:
            edges.add((start + a, start + b))
    return GraphSpec(n, tuple(sorted(edges)), tuple((float(i),) for i in range(n)))


def fig3b_observables(n: int) -> list[PauliString]:
    """Single-site pattern: X at 1-based interior sites ``j = 1 mod 3``, Y elsewhere.

    Returned with 0-based sites, so the X letters sit at vertices 3, 6, ...,
    n - 4 and both endpoints carry Y.
    """
    if n < 4 or (n - 1) % 3:
        raise ValueError(f"pattern defined for n >= 4 with n = 1 mod 3, got {n}")
    letters = ["X" if 1 < j < n and j % 3 == 1 else "Y" for j in range(1, n + 1)]
    return [PauliString(((site, letter),)) for site, letter in enumerate(letters)]


def pattern_observables(letters: str, sites: Sequence[int] | None = None) -> list[PauliString]:
    """One single-site Pauli per letter, e.g. ``"YXXY"``."""
    sites = list(range(len(letters))) if sites is None else list(sites)
    return [PauliString(((s, l),)) for s, l in zip(sites, letters, strict=True)]


# Dense constructors ---------------------------------------------------------


def _check_dense(n: int, lower: int = 1) -> None:
    if n < lower:
        raise ValueError(f"need at least {lower} qubits, got {n}")
    if n > dense_ceiling():
        raise ResourceLimitError(f"n={n} exceeds the dense ceiling {dense_ceiling()}")


def ghz(n: int) -> StateVector:
    """``(|0...0> + |1...1>) / sqrt(2)``."""
    _check_dense(n, 2)
    amps = np.zeros(1 << n, dtype=complex)
    amps[0] = amps[-1] = 1 / math.sqrt(2)
    return StateVector(amps)


def product_state(site_states: Sequence[Sequence[complex]]) -> StateVector:
    return StateVector.product(site_states)


def paper_tripartite_state() -> StateVector:
    """Three-qubit state whose tripartite Z correlator is 1/18 while the 1|23 cut is uncorrelated."""
    weights = [5 / 24, 1 / 8, 1 / 12, 1 / 12, 1 / 4, 1 / 8, 1 / 12, 1 / 24]
    return StateVector(np.sqrt(weights))


def plus_state(n: int) -> StateVector:
    _check_dense(n)
    return StateVector(np.full(1 << n, 1 / math.sqrt(1 << n), dtype=complex))


def cluster_state(g: GraphSpec, order: Iterable[tuple[int, int]] | None = None) -> StateVector:
    """``|+>^n`` followed by a controlled-Z on every edge."""
    state = plus_state(g.n)
    for i, j in g.edges if order is None else order:
        state = apply_cz(state, i, j)
    return state


def cluster_state_by_evolution(g: GraphSpec) -> StateVector:
    """Evolve ``|+>^n`` for ``pi/4`` under the summed controlled-Z generators."""
    return evolve(plus_state(g.n), Hamiltonian.controlled_z(g.n, g.edges), math.pi / 4)


def preparation_time(g: GraphSpec) -> float:
    """Quoted cost of the simultaneous controlled-Z schedule.

    All generators commute and run at once for ``pi/4``; an edge spanning
    ``r`` lattice units is charged ``r`` such slots. The path graph costs
    ``pi/4`` and the range-3 cell graph ``3 pi/4``. Without positions every
    edge counts as one unit.
    """
    longest = 1
    if g.positions is not None:
        for i, j in g.edges:
            gap = math.dist(g.positions[i], g.positions[j])
            longest = max(longest, math.ceil(gap - 1e-9))
    return longest * math.pi / 4


# Stabilizer algebra ---------------------------------------------------------
#
# A Pauli operator is stored as i**e * prod_k X_k**x_k Z_k**z_k with x, z as
# integer bitsets (bit k = site k) and e mod 4. Then Y = i X Z and
# (x1, z1, e1) * (x2, z2, e2) = (x1^x2, z1^z2, e1 + e2 + 2 |z1 & x2|).


def _pauli_bits(p: PauliString) -> tuple[int, int, int]:
    x = z = 0
    e = {1: 0, 1j: 1, -1: 2, -1j: 3}[complex(round(p.phase.real), round(p.phase.imag))]
    for site, letter in p.ops:
        if letter in "XY":
            x |= 1 << site
        if letter in "ZY":
            z |= 1 << site
        if letter == "Y":
            e += 1  # Y = i X Z
    return x, z, e % 4


def _mul_bits(a, b):
    return a[0] ^ b[0], a[1] ^ b[1], (a[2] + b[2] + 2 * (a[1] & b[0]).bit_count()) % 4


@dataclass(frozen=True)
class StabilizerGroup:
    """``n`` commuting, independent Pauli generators with signs.

    Row ``i`` is ``(x_i, z_i, e_i)`` in the bitset convention above.
    """

    n: int
    generators: tuple[tuple[int, int, int], ...]
    _basis: tuple = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        gens = tuple((int(x), int(z), int(e) % 4) for x, z, e in self.generators)
        if len(gens) != self.n:
            raise ValueError(f"need {self.n} generators, got {len(gens)}")
        for x, z, e in gens:
            if (x | z) >> self.n:
                raise ValueError("generator acts outside the n sites")
            if ((x & z).bit_count() + e) % 2:
                raise ValueError("generators must be Hermitian (sign +-1)")
        for a in range(len(gens)):
            for b in range(a + 1, len(gens)):
                if _symplectic(gens[a], gens[b]):
                    raise ValueError(f"generators {a} and {b} anticommute")
        object.__setattr__(self, "generators", gens)
        basis = _echelon([(x << self.n | z, 1 << i) for i, (x, z, _) in enumerate(gens)])
        if len(basis) != self.n:
            raise ValueError("generators are not independent over GF(2)")
        object.__setattr__(self, "_basis", tuple(basis))

    def generator(self, i: int) -> PauliString:
        return _bits_to_pauli(self.generators[i], self.n)

    def symplectic_matrix(self) -> np.ndarray:
        """``n x 2n`` binary matrix ``[X | Z]``."""
        out = np.zeros((self.n, 2 * self.n), dtype=np.uint8)
        for i, (x, z, _) in enumerate(self.generators):
            for k in range(self.n):
                out[i, k] = x >> k & 1
                out[i, self.n + k] = z >> k & 1
        return out

    def decompose(self, x: int, z: int) -> int | None:
        """Bitmask of generators whose product has symplectic part ``(x, z)``, if any."""
        vec = x << self.n | z
        combo = 0
        for pivot_vec, pivot_combo in self._basis:
            if vec ^ pivot_vec < vec:
                vec ^= pivot_vec
                combo ^= pivot_combo
        return combo if vec == 0 else None

    def residue(self, x: int, z: int) -> int:
        vec = x << self.n | z
        for pivot_vec, _ in self._basis:
            if vec ^ pivot_vec < vec:
                vec ^= pivot_vec
        return vec


def _symplectic(a, b) -> int:
    return ((a[0] & b[1]).bit_count() + (a[1] & b[0]).bit_count()) % 2


def _echelon(rows: list[tuple[int, int]]) -> list[tuple[int, int]]:
    """Reduce ``(vector, tag)`` rows over GF(2) so that leading bits are distinct.

    Returned rows are sorted by decreasing leading bit; reducing a vector
    against them in that order clears every pivot bit.
    """
    basis: list[tuple[int, int]] = []
    for vec, tag in rows:
        for bv, bt in basis:
            if vec ^ bv < vec:
                vec ^= bv
                tag ^= bt
        if vec:
            basis.append((vec, tag))
            basis.sort(key=lambda r: -r[0].bit_length())
    return basis


def _bits_to_pauli(bits, n) -> PauliString:
    x, z, e = bits
    ops = []
    for k in range(n):
        bx, bz = x >> k & 1, z >> k & 1
        if bx and bz:
            ops.append((k, "Y"))
            e -= 1  # X Z = -i Y
        elif bx:
            ops.append((k, "X"))
        elif bz:
            ops.append((k, "Z"))
    return PauliString(tuple(ops), (1, 1j, -1, -1j)[e % 4])


def graph_stabilizer_group(g: GraphSpec) -> StabilizerGroup:
    """Generator ``i`` is ``X_i`` times ``Z`` on each neighbour of ``i``, sign +1."""
    adjacency = [0] * g.n
    for i, j in g.edges:
        adjacency[i] |= 1 << j
        adjacency[j] |= 1 << i
    return StabilizerGroup(g.n, tuple((1 << i, adjacency[i], 0) for i in range(g.n)))


def stabilizer_pauli_expectation(s: StabilizerGroup, p: PauliString) -> int:
    """Expectation of a Hermitian Pauli string in the stabilizer state: +1, -1 or 0."""
    if not p.is_hermitian:
        raise ValueError("only Hermitian Pauli strings (phase +-1) can be queried")
    if p.ops and max(p.support) >= s.n:
        raise ValueError(f"Pauli string acts outside the {s.n} stabilized sites")
    query = _pauli_bits(p)
    combo = s.decompose(query[0], query[1])
    if combo is None:
        return 0
    prod = (0, 0, 0)
    for i in range(s.n):
        if combo >> i & 1:
            prod = _mul_bits(prod, s.generators[i])
    diff = (query[2] - prod[2]) % 4
    if diff % 2:
        raise ArithmeticError("stabilizer product and query differ by a factor of i")
    return 1 if diff == 0 else -1


def stabilizer_ursell(s: StabilizerGroup, observables: Sequence[PauliString]) -> int:
    """Exact connected correlator of Pauli observables in a stabilizer state.

    A product of the observables over a subset has nonzero expectation only
    if its symplectic vector lies in the stabilizer row space, so the
    contributing subsets form a GF(2) subspace. Only partitions whose blocks
    all lie in that subspace are enumerated; the rest contribute zero.
    """
    m = len(observables)
    if m == 0:
        raise ValueError("need at least one observable")
    seen = 0
    for p in observables:
        for site in p.support:
            if seen >> site & 1:
                raise ValueError("observable supports overlap")
            seen |= 1 << site
    bits = [_pauli_bits(p) for p in observables]
    # subsets whose product lands in the group: kernel of the residue map
    rows = [(s.residue(x, z), 1 << j) for j, (x, z, _) in enumerate(bits)]
    kernel = []
    basis: list[tuple[int, int]] = []
    for vec, tag in rows:
        for bv, bt in basis:
            if vec ^ bv < vec:
                vec ^= bv
                tag ^= bt
        if vec:
            basis.append((vec, tag))
            basis.sort(key=lambda r: -r[0].bit_length())
        else:
            kernel.append(tag)
    if len(kernel) > STABILIZER_KERNEL_LIMIT:
        raise ResourceLimitError(f"contributing subspace of dimension {len(kernel)} is too large")
    blocks: list[tuple[int, int]] = []
    for code in range(1, 1 << len(kernel)):
        mask = 0
        for k, vec in enumerate(kernel):
            if code >> k & 1:
                mask ^= vec
        prod = (0, 0, 0)
        for j in range(m):
            if mask >> j & 1:
                prod = _mul_bits(prod, bits[j])
        blocks.append((mask, stabilizer_pauli_expectation(s, _bits_to_pauli(prod, s.n))))

    # weight polynomials in the number of blocks, memoized on the uncovered set
    memo: dict[int, dict[int, int]] = {0: {0: 1}}

    def count(remaining: int) -> dict[int, int]:
        if remaining in memo:
            return memo[remaining]
        low = remaining & -remaining
        out: dict[int, int] = {}
        for mask, sign in blocks:
            if mask & low and mask & remaining == mask:
                for k, c in count(remaining ^ mask).items():
                    out[k + 1] = out.get(k + 1, 0) + sign * c
        memo[remaining] = out
        return out

    return sum(moebius_g(k) * c for k, c in count((1 << m) - 1).items())
