import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ursell import closed_form as cf
from ursell.config import ResourceLimitError
from ursell.correlators import partition_sum
from ursell.quantum import Hamiltonian, StateVector, evolve

times = st.floats(-5, 5, allow_nan=False)


def test_bernoulli_values():
    assert cf.bernoulli(0) == 1
    assert cf.bernoulli(2) == Fraction(1, 6)
    assert cf.bernoulli(4) == Fraction(-1, 30)
    assert cf.bernoulli(6) == Fraction(1, 42)
    assert all(cf.bernoulli(n) == 0 for n in range(3, 60, 2))
    with pytest.raises(ValueError):
        cf.bernoulli(-1)
    with pytest.raises(ResourceLimitError):
        cf.bernoulli(61)


@pytest.mark.parametrize("n", range(1, 30))
def test_bernoulli_recurrence(n):
    # sum_{k<=n} C(n+1, k) B_k = 0, independent of the generation algorithm (B_1 = -1/2 there)
    b = [cf.bernoulli(k) for k in range(n + 1)]
    b[1] = Fraction(-1, 2)
    assert sum(math.comb(n + 1, k) * b[k] for k in range(n + 1)) == 0


def test_ghz_exact_values():
    assert cf.ghz_un_exact(2) == 1
    assert cf.ghz_un_exact(3) == 0
    assert cf.ghz_un_exact(4) == -2
    assert isinstance(cf.ghz_un_exact_rational(8), Fraction)
    with pytest.raises(ValueError):
        cf.ghz_un_exact(1)


def test_ghz_exact_is_log_cosh_derivative():
    # Taylor coefficients of ln cosh(x) from power series arithmetic on Fractions
    order = 14
    cosh = [Fraction(1, math.factorial(k)) if k % 2 == 0 else Fraction(0) for k in range(order + 1)]
    d = [Fraction(0)] * (order + 1)  # series of ln(1 + w) with w = cosh - 1
    w = cosh[:]
    w[0] = Fraction(0)
    power = [Fraction(1)] + [Fraction(0)] * order
    for m in range(1, order + 1):
        power = [sum(power[i] * w[k - i] for i in range(k + 1)) for k in range(order + 1)]
        for k in range(order + 1):
            d[k] += Fraction((-1) ** (m + 1), m) * power[k]
    for n in range(2, order + 1):
        assert cf.ghz_un_exact_rational(n) == d[n] * math.factorial(n)


def test_ghz_asymptotic():
    assert cf.ghz_un_asymptotic(20) / abs(cf.ghz_un_exact(20)) == pytest.approx(1, abs=0.05)
    assert cf.ghz_un_asymptotic(40) / abs(cf.ghz_un_exact(40)) == pytest.approx(1, abs=0.01)
    with pytest.raises(ValueError):
        cf.ghz_un_asymptotic(11)
    with pytest.raises(ValueError):
        cf.ghz_un_asymptotic(8)


@given(times)
def test_mps_canonical(t):
    assert max(cf.XXChainMps(t).canonical_residuals()) <= 1e-12


@given(times)
def test_mps_normalized_and_parity(t):
    amps = cf.XXChainMps(t).amplitudes(6)
    assert np.sum(np.abs(amps) ** 2) == pytest.approx(1, abs=1e-12)
    for index, a in enumerate(amps):
        if index.bit_count() % 2:
            assert a == 0


def test_mps_initial_state():
    assert cf.xx_mps_amplitude([0, 0, 0, 0], 0.0) == 1


@pytest.mark.parametrize("n", range(2, 9))
def test_mps_matches_dense(n, rng):
    h = Hamiltonian.xx_chain(n)
    for t in rng.uniform(0, 3, 3):
        dense = evolve(StateVector.basis([0] * n), h, t).amplitudes
        assert np.allclose(cf.xx_state_amplitudes(n, t), dense, atol=1e-10)


def test_boundary_rule_examples():
    for t in (0.2, 0.9):
        assert cf.xx_disconnected_z([1, 2, 4], 5, t) == pytest.approx(math.cos(2 * t) ** 3)
        assert cf.xx_disconnected_z(range(6), 6, t) == 1
    assert cf.xx_disconnected_z([0, 3], 5, 0.0) == 1
    with pytest.raises(ValueError):
        cf.xx_disconnected_z([], 3, 0.1)


def test_closed_form_examples():
    assert cf.xx_un_closed_form(2, math.pi / 4) == pytest.approx(1)
    assert cf.xx_un_closed_form(5, math.pi / 8) == pytest.approx(0.0625)
    assert cf.xx_un_closed_form(10, math.pi / 4) == pytest.approx(1)
    assert cf.xx_un_by_counting(1, 0.4) == 1
    assert cf.xx_un_by_counting(3, math.pi / 4) == pytest.approx(1)


@given(st.integers(1, 25), times)
def test_counting_equals_closed_form(n, t):
    assert cf.xx_un_by_counting(n, t) == pytest.approx(cf.xx_un_closed_form(n, t), abs=1e-9)


@pytest.mark.parametrize("n", range(2, 8))
def test_partition_sum_over_boundary_rule(n):
    # the boundary rule fed through the partition sum lands on the closed form
    for t in (0.1, 0.5, 1.2):
        table = [1.0] + [cf.xx_disconnected_z([k for k in range(n) if m >> k & 1], n, t) for m in range(1, 1 << n)]
        assert partition_sum(table, n).real == pytest.approx(cf.xx_un_closed_form(n, t), abs=1e-12)
