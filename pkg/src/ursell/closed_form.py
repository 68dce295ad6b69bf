"""Analytic reference values for GHZ states and the XX chain.

These never touch the dense simulator, so they serve as oracles for it.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .config import ResourceLimitError
from .partitions import stirling2

ExactRational = Fraction

BERNOULLI_LIMIT = 60
COUNTING_LIMIT = 25


@lru_cache(maxsize=None)
def _bernoulli_table(limit: int) -> tuple[Fraction, ...]:
    # Akiyama-Tanigawa; yields B_1 = +1/2, irrelevant for the even indices used here
    row = [Fraction(0)] * (limit + 1)
    out = []
    for m in range(limit + 1):
        row[m] = Fraction(1, m + 1)
        for j in range(m, 0, -1):
            row[j - 1] = j * (row[j - 1] - row[j])
        out.append(row[0])
    return tuple(out)


def bernoulli(n: int) -> Fraction:
    """Exact Bernoulli number ``B_n`` as a reduced fraction."""
    if n < 0:
        raise ValueError(f"bernoulli needs n >= 0, got {n}")
    if n > BERNOULLI_LIMIT:
        raise ResourceLimitError(f"bernoulli limited to n <= {BERNOULLI_LIMIT}, got {n}")
    return _bernoulli_table(BERNOULLI_LIMIT)[n]


def ghz_un_exact_rational(n: int) -> Fraction:
    """All-Z connected correlator of the ``n``-qubit GHZ state, exactly.

    Equal to the ``n``-th derivative of ``ln cosh`` at zero: zero for odd
    ``n`` and ``2**n (2**n - 1) B_n / n`` for even ``n``.
    """
    if n < 2:
        raise ValueError(f"GHZ correlator needs n >= 2, got {n}")
    if n % 2:
        return Fraction(0)
    return Fraction(2**n * (2**n - 1)) * bernoulli(n) / n


def ghz_un_exact(n: int) -> float:
    return float(ghz_un_exact_rational(n))


def ghz_un_asymptotic(n: int) -> float:
    """Large-``n`` magnitude using ``|B_n| ~ 4 sqrt(pi n / 2) (n / (2 pi e))**n``."""
    if n % 2:
        raise ValueError(f"asymptotic GHZ correlator is defined for even n, got {n}")
    if n < 10:
        raise ValueError(f"asymptotic form needs n >= 10, got {n}")
    log_b = math.log(4) + 0.5 * math.log(math.pi * n / 2) + n * math.log(n / (2 * math.pi * math.e))
    log_pref = n * math.log(2) + math.log(2**n - 1) - math.log(n)
    return math.exp(log_pref + log_b)


# XX chain -------------------------------------------------------------------


@dataclass(frozen=True)
class XXChainMps:
    """Bond-dimension-2 matrix product state of ``exp(-i t sum X_i X_{i+1}) |0...0>``."""

    t: float

    @property
    def left(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array([[1, 0]], dtype=complex), np.array([[0, 1]], dtype=complex)

    @property
    def bulk(self) -> tuple[np.ndarray, np.ndarray]:
        c, s = math.cos(self.t), -1j * math.sin(self.t)
        return (
            np.array([[c, 0], [0, s]], dtype=complex),
            np.array([[0, c], [s, 0]], dtype=complex),
        )

    @property
    def right(self) -> tuple[np.ndarray, np.ndarray]:
        c, s = math.cos(self.t), -1j * math.sin(self.t)
        return np.array([[c], [0]], dtype=complex), np.array([[0], [s]], dtype=complex)

    def canonical_residuals(self) -> tuple[float, float, float]:
        """Deviations of ``sum L^dag L``, ``sum A^dag A`` from I and ``sum R^dag R`` from 1."""
        eye = np.eye(2)
        lsum = sum(m.conj().T @ m for m in self.left)
        asum = sum(m.conj().T @ m for m in self.bulk)
        rsum = sum(m.conj().T @ m for m in self.right)
        return (
            float(np.max(np.abs(lsum - eye))),
            float(np.max(np.abs(asum - eye))),
            float(np.max(np.abs(rsum - 1))),
        )

    def amplitude(self, bits: Sequence[int]) -> complex:
        bits = [int(b) for b in bits]
        if len(bits) < 2:
            raise ValueError("the chain needs at least two sites")
        if any(b not in (0, 1) for b in bits):
            raise ValueError(f"bits must be 0/1, got {bits}")
        vec = self.left[bits[0]]
        bulk = self.bulk
        for b in bits[1:-1]:
            vec = vec @ bulk[b]
        return complex((vec @ self.right[bits[-1]])[0, 0])

    def amplitudes(self, n: int) -> np.ndarray:
        """All ``2**n`` amplitudes with site 0 as the most significant bit."""
        if n < 2:
            raise ValueError("the chain needs at least two sites")
        out = np.empty(1 << n, dtype=complex)
        for index in range(1 << n):
            out[index] = self.amplitude([(index >> (n - 1 - k)) & 1 for k in range(n)])
        return out


def xx_mps_amplitude(bits: Sequence[int], t: float) -> complex:
    return XXChainMps(t).amplitude(bits)


def xx_boundaries(pattern: Iterable[int], n: int) -> int:
    """Bonds of the open chain joining a Z site to an identity site."""
    sites = set(int(s) for s in pattern)
    if not sites:
        raise ValueError("pattern must contain at least one site")
    if min(sites) < 0 or max(sites) >= n:
        raise ValueError(f"pattern {sorted(sites)} out of range for n={n}")
    return sum((b in sites) != (b + 1 in sites) for b in range(n - 1))


def xx_disconnected_z(pattern: Iterable[int], n: int, t: float) -> float:
    """``<prod_{k in pattern} Z_k>`` on the XX-evolved chain: ``cos(2t)`` per boundary."""
    return math.cos(2 * t) ** xx_boundaries(pattern, n)


def xx_un_closed_form(n: int, t: float) -> float:
    """All-Z ``n``-point connected correlator of the XX chain, ``sin(2t)**(2(n-1))``."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    return (math.sin(2 * t) ** 2) ** (n - 1)


@lru_cache(maxsize=None)
def _counting_coefficients(n: int) -> tuple[int, ...]:
    # coefficient of cos(2t)**(2v): binom(n-1, v) * sum_a (-1)**a a! S(v, a)
    return tuple(
        math.comb(n - 1, v) * sum((-1) ** a * math.factorial(a) * stirling2(v, a) for a in range(v + 1))
        for v in range(n)
    )


def xx_un_by_counting(n: int, t: float) -> float:
    """Same correlator, summed over partitions grouped by cut bonds and block count.

    A partition with ``v`` bonds between different blocks contributes
    ``cos(2t)**(2v)``; there are ``binom(n-1, v) S(v, a)`` of them with
    ``a + 1`` blocks.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if n > COUNTING_LIMIT:
        raise ResourceLimitError(f"counting form limited to n <= {COUNTING_LIMIT}")
    c2 = math.cos(2 * t) ** 2
    return math.fsum(coef * c2**v for v, coef in enumerate(_counting_coefficients(n)))


def xx_state_amplitudes(n: int, t: float) -> np.ndarray:
    """Shorthand for the MPS-expanded amplitudes (no dense evolution)."""
    return XXChainMps(t).amplitudes(n)


__all__ = [
    "ExactRational",
    "XXChainMps",
    "bernoulli",
    "ghz_un_asymptotic",
    "ghz_un_exact",
    "ghz_un_exact_rational",
    "xx_boundaries",
    "xx_disconnected_z",
    "xx_mps_amplitude",
    "xx_state_amplitudes",
    "xx_un_by_counting",
    "xx_un_closed_form",
]
