"""Connected correlators (Ursell functions) by three independent routes.

* ``un_partition_sum``: the Moebius-weighted sum over all set partitions.
* ``un_recursive``: subtract every non-trivial product of lower-order
  connected correlators from the full moment, memoized over subsets.
* ``un_generating_fd``: mixed central finite difference of the cumulant
  generating function ``ln <exp(sum_i l_i A_i)>`` at zero.

All three agree analytically; the tests use each as an oracle for the others.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .config import CORRELATOR_LIMIT, ResourceLimitError
from .partitions import iter_block_masks, moebius_g
from .quantum import (
    Observable,
    StateVector,
    apply_local,
    as_observable,
    check_disjoint,
    embed,
    hermitian_expm,
    reduced_density_matrix,
)

IMAG_TOL = 1e-9
FD_STEP_RANGE = (1e-4, 1e-1)
FD_MAX_N = 6


@dataclass(frozen=True, eq=False)
class CorrelatorRequest:
    """A state and ``n`` observables on pairwise disjoint supports."""

    state: StateVector
    observables: tuple[Observable, ...]
    limit: int = CORRELATOR_LIMIT

    def __post_init__(self) -> None:
        obs = tuple(as_observable(o) for o in self.observables)
        if not obs:
            raise ValueError("a correlator needs at least one observable")
        if len(obs) > self.limit:
            raise ResourceLimitError(f"{len(obs)} observables exceed the correlator limit {self.limit}")
        check_disjoint(obs, self.state.n)
        object.__setattr__(self, "observables", obs)

    @property
    def n(self) -> int:
        return len(self.observables)


def _request(state, observables, limit=CORRELATOR_LIMIT) -> CorrelatorRequest:
    if isinstance(state, CorrelatorRequest):
        return state
    return CorrelatorRequest(state, tuple(observables), limit)


class SubsetMoments:
    """Lazy table of ``<prod_{j in S} A_j>`` keyed by subset bitmask ``S``."""

    def __init__(self, req: CorrelatorRequest) -> None:
        self.req = req
        self._cache: dict[int, complex] = {0: 1.0 + 0j}
        self._bra = req.state.amplitudes
        self._tensor = req.state.tensor()

    def __call__(self, mask: int) -> complex:
        value = self._cache.get(mask)
        if value is None:
            tensor = self._tensor
            j = 0
            m = mask
            while m:
                if m & 1:
                    obs = self.req.observables[j]
                    tensor = apply_local(tensor, obs.matrix, obs.support)
                m >>= 1
                j += 1
            value = complex(np.vdot(self._bra, tensor.reshape(-1)))
            self._cache[mask] = value
        return value

    def table(self) -> list[complex]:
        return [self(mask) for mask in range(1 << self.req.n)]


def _real(value: complex, what: str) -> float:
    if abs(value.imag) > IMAG_TOL * max(1.0, abs(value.real)):
        raise ArithmeticError(f"{what} has imaginary residue {value.imag:.3e}")
    return float(value.real)


def partition_sum(moment: Callable[[int], complex] | Sequence, n: int) -> complex:
    """Fold ``sum_P g(|P|) prod_{p in P} moment(p)`` over the partition stream.

    ``moment`` maps a block bitmask to the disconnected correlator of that
    block. Summation follows the restricted-growth order exactly.
    """
    table = list(moment) if not callable(moment) else [moment(m) for m in range(1 << n)]
    weights = [0] + [moebius_g(k) for k in range(1, n + 1)]
    total = 0j
    for masks in iter_block_masks(n, limit=max(n, 1)):
        prod = weights[len(masks)]
        for m in masks:
            prod *= table[m]
        total += prod
    return total


def u2(state: StateVector, a, b) -> float:
    """``<AB> - <A><B>`` for observables on disjoint supports."""
    req = CorrelatorRequest(state, (a, b))
    mom = SubsetMoments(req)
    return _real(mom(0b11) - mom(0b01) * mom(0b10), "u2")


def un_partition_sum(state, observables=None) -> float:
    """Connected correlator from the partition-sum definition.

    Accepts either a ``CorrelatorRequest`` or ``(state, observables)``.
    For a single observable this is its expectation value.
    """
    req = _request(state, observables)
    moments = SubsetMoments(req).table()
    return _real(partition_sum(moments, req.n), "partition sum")


def subset_cumulants(moment: Callable[[int], complex], n: int) -> tuple[list[complex], list[complex]]:
    """Connected correlators of every subset by recursion on lower orders.

    For each subset ``S`` (by increasing size), ``u(S)`` is the moment of ``S``
    minus the sum over all non-trivial partitions of ``S`` of products of
    lower-order ``u``. That sum is organized by the block holding the lowest
    index of ``S``: ``sum_{T} u(T) * F(S \\ T)`` where ``F(R)`` is the sum over
    all partitions of ``R`` of products of ``u``, itself built from ``u`` only.

    Returns ``(u, F)`` indexed by bitmask; ``F[S]`` reassembles the moment of
    ``S`` from connected pieces.
    """
    size = 1 << n
    u: list[complex] = [0j] * size
    full: list[complex] = [0j] * size
    full[0] = 1.0 + 0j
    for mask in sorted(range(1, size), key=lambda m: (m.bit_count(), m)):
        low = mask & -mask
        rest = mask ^ low
        proper = 0j
        sub = rest
        while True:
            block = sub | low
            if block != mask:
                proper += u[block] * full[mask ^ block]
            if sub == 0:
                break
            sub = (sub - 1) & rest
        u[mask] = moment(mask) - proper
        full[mask] = proper + u[mask]
    return u, full


def un_recursive(state, observables=None) -> float:
    """Connected correlator from the lower-order recursion, memoized by bitmask."""
    req = _request(state, observables)
    u, _ = subset_cumulants(SubsetMoments(req), req.n)
    return _real(u[-1], "recursive correlator")


def _log_generating(rho: np.ndarray, local_ops: list[np.ndarray], lambdas) -> float:
    # ln tr(rho exp(sum_i l_i A_i)) on the joint support
    generator = sum(lam * op for lam, op in zip(lambdas, local_ops))
    value = np.trace(rho @ hermitian_expm(generator, 1.0))
    return math.log(_real(complex(value), "generating function"))


def un_generating_fd(state, observables=None, step: float = 1e-2) -> float:
    """Connected correlator as a mixed central difference of ``ln <exp(sum l_i A_i)>``.

    Uses the tensor-product stencil with every ``l_i`` in ``{-h, +h}``: ``2**n``
    evaluations weighted by ``prod(sign_i) / (2h)**n``. Truncation error is
    ``O(h**2)``.
    """
    req = _request(state, observables, limit=FD_MAX_N)
    if not FD_STEP_RANGE[0] <= step <= FD_STEP_RANGE[1]:
        raise ValueError(f"finite-difference step {step} outside {FD_STEP_RANGE}")
    sites = [s for obs in req.observables for s in obs.support]
    rho = reduced_density_matrix(req.state, sites)
    pos = {s: k for k, s in enumerate(sites)}
    local = [embed(obs.matrix, [pos[s] for s in obs.support], len(sites)) for obs in req.observables]
    n = req.n
    total = 0.0
    for corner in range(1 << n):
        signs = [1 if corner >> i & 1 else -1 for i in range(n)]
        weight = reduce(lambda a, b: a * b, signs, 1)
        total += weight * _log_generating(rho, local, [s * step for s in signs])
    return total / (2 * step) ** n


def reconstruct_disconnected(state, observables=None) -> float:
    """Rebuild ``<A_1 ... A_n>`` as ``sum_P prod_{p in P} u_{|p|}``.

    The connected pieces come from the partition-sum definition applied to
    each sub-collection, so this is an independent check of the moment
    cumulant inversion.
    """
    req = _request(state, observables)
    moments = SubsetMoments(req).table()
    cumulant = [0j] * (1 << req.n)
    for mask in range(1, 1 << req.n):
        members = [j for j in range(req.n) if mask >> j & 1]
        sub_table = [
            moments[sum(1 << members[k] for k in range(len(members)) if sm >> k & 1)]
            for sm in range(1 << len(members))
        ]
        cumulant[mask] = partition_sum(sub_table, len(members))
    total = 0j
    for masks in iter_block_masks(req.n, limit=max(req.n, 1)):
        prod = 1.0 + 0j
        for m in masks:
            prod *= cumulant[m]
        total += prod
    return _real(total, "reconstructed moment")
