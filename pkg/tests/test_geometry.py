import json
import math
from itertools import combinations

import numpy as np
import pytest
import scipy.sparse.csgraph
from hypothesis import given, settings, strategies as st

from ursell.config import CalibrationError
from ursell.correlators import un_partition_sum
from ursell.geometry import (
    BoundParams,
    Geometry,
    bound_envelope,
    calibrate_velocity,
    check_bound,
    critical_distance,
    decay_slopes,
    log_bound_envelope,
    set_distance,
    two_point_samples,
)
from ursell.partitions import enumerate_bipartitions
from ursell.quantum import PAULI, Hamiltonian, Observable, StateVector, Term, evolve
from ursell import closed_form as cf

COLLINEAR = Geometry(positions=[(0.0,), (1.0,), (3.0,)])


def mst_bottleneck(g, supports):
    # the best cut over bipartitions is the heaviest edge of a minimum spanning tree
    m = len(supports)
    dist = np.zeros((m, m))
    for i, j in combinations(range(m), 2):
        dist[i, j] = dist[j, i] = set_distance(g, supports[i], supports[j])
    tree = scipy.sparse.csgraph.minimum_spanning_tree(dist)
    return float(tree.max())


def random_supports(n_sites, m, rng):
    perm = [int(s) for s in rng.permutation(n_sites)]
    cuts = sorted(int(c) for c in rng.choice(range(1, n_sites), size=m - 1, replace=False))
    return [perm[a:b] for a, b in zip([0] + cuts, cuts + [n_sites])]


def test_set_distance_examples():
    assert set_distance(COLLINEAR, [0], [1, 2]) == 1
    assert set_distance(COLLINEAR, [2], [0, 1]) == 2
    with pytest.raises(ValueError):
        set_distance(COLLINEAR, [0], [0, 1])
    with pytest.raises(ValueError):
        set_distance(COLLINEAR, [], [1])


def test_collinear_critical_distance():
    r_value, bip = critical_distance(COLLINEAR, [[0], [1], [2]])
    assert r_value == 2
    assert bip.first == (0, 1) and bip.second == (2,)


def test_two_supports():
    g = Geometry(positions=np.arange(6.0))
    assert critical_distance(g, [[0, 1], [4, 5]])[0] == set_distance(g, [0, 1], [4, 5]) == 3


def test_two_clique_layout():
    # two tight clusters 10 apart: any clique-respecting support choice sees the gap
    rng = np.random.default_rng(1)
    left = rng.uniform(0, 0.5, size=(4, 2))
    right = rng.uniform(0, 0.5, size=(4, 2)) + [10.0, 0.0]
    g = Geometry(positions=np.vstack([left, right]))
    for a in range(1, 5):
        for b in range(1, 5):
            supports = [[k] for k in range(a)] + [[4 + k] for k in range(b)]
            gap = set_distance(g, range(a), range(4, 4 + b))
            r_value, bip = critical_distance(g, supports)
            assert r_value == pytest.approx(gap)
            assert set(bip.second) in ({*range(a, a + b)}, {*range(a)})


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_critical_distance_is_mst_bottleneck(seed):
    rng = np.random.default_rng(seed)
    n_sites = int(rng.integers(2, 12))
    g = Geometry(positions=rng.uniform(0, 10, size=(n_sites, 2)))
    m = int(rng.integers(2, n_sites + 1))
    supports = random_supports(n_sites, m, rng)
    assert critical_distance(g, supports)[0] == pytest.approx(mst_bottleneck(g, supports))


@pytest.mark.parametrize("n", range(2, 9))
def test_sandwich_exhaustive(n, rng):
    for _ in range(5):
        g = Geometry(positions=rng.uniform(0, 5, size=(n, 3)))
        supports = [[k] for k in range(n)]
        r_value, bip = critical_distance(g, supports)
        cuts = [min(g.distance(a, b) for a in p.first for b in p.second) for p in enumerate_bipartitions(n)]
        assert min(cuts) <= r_value <= max(g.distance(a, b) for a, b in combinations(range(n), 2))
        assert r_value == max(cuts)
        assert min(g.distance(a, b) for a in bip.first for b in bip.second) == r_value


def test_geometry_validation(tmp_path):
    with pytest.raises(ValueError):
        Geometry(distances=[[0, 1], [2, 0]])
    with pytest.raises(ValueError):
        Geometry(distances=[[0, 1, 5], [1, 0, 1], [5, 1, 0]])
    Geometry(distances=[[0, 1, 5], [1, 0, 1], [5, 1, 0]], allow_nonmetric=True)
    with pytest.raises(ValueError):
        Geometry(positions=[(0.0,), (0.0,)])
    with pytest.raises(ValueError):
        critical_distance(COLLINEAR, [[0], [0, 1]])
    g = Geometry(distances=[[0, 2, 3], [2, 0, 4], [3, 4, 0]])
    path = tmp_path / "geo.json"
    path.write_text(json.dumps(g.to_dict()))
    assert np.array_equal(Geometry.from_json(path).distances, g.distances)


def test_envelope_examples():
    assert bound_envelope(2, BoundParams(1, 1), 3.0, 3.0) == pytest.approx(1)
    p = BoundParams(0.7, 1.0)
    assert bound_envelope(3, p, 0.0, 0.0) == pytest.approx(27 / 4 * 0.7)
    assert log_bound_envelope(10, BoundParams(1, 1), 0.0, 50.0) == pytest.approx(10 * math.log(10) - math.log(4) - 50)
    assert bound_envelope(40, BoundParams(1, 1), 1e4, 0.0) == math.inf
    with pytest.raises(ValueError):
        BoundParams(0, 1)


def test_check_bound_reports_violation():
    series = [(t, 1e-3) for t in np.linspace(0, 1, 5)] + [(0.5, 10.0)]
    report = check_bound(series, 2, 1.0, BoundParams(1, 1))
    assert not report.passed
    assert report.first_violation == 0.5
    assert len(report.violations) == 1
    with pytest.raises(ValueError):
        check_bound([(0.1, math.nan)], 2, 1.0, BoundParams(1, 1))


def test_check_bound_closed_form_series():
    n = 6
    series = [(t, cf.xx_un_closed_form(n, t)) for t in np.linspace(0, 3, 40)]
    r_value = critical_distance(Geometry.chain(n), [[k] for k in range(n)])[0]
    assert check_bound(series, n, r_value, BoundParams(1.05, 0.5)).passed


def test_calibration_xx_chain():
    cal = calibrate_velocity(Geometry.chain(10), Hamiltonian.xx_chain(10))
    assert 0 < cal.params.v < 10
    assert cal.max_log_slack_violation <= 1e-9
    assert all(s <= -1 for s in decay_slopes(cal.samples, cal).values())


def test_calibration_out_of_sample():
    cal = calibrate_velocity(Geometry.chain(10), Hamiltonian.xx_chain(10))
    samples = two_point_samples(Geometry.chain(12), Hamiltonian.xx_chain(12), times=np.linspace(0.05, 3.0, 20))
    for s in samples:
        if s.value != 0:
            slack = math.log(cal.params.c2) + cal.params.v * s.t - s.r - math.log(abs(s.value))
            assert slack >= -1e-9


def test_calibration_without_signal():
    with pytest.raises(CalibrationError):
        calibrate_velocity(Geometry.chain(4), Hamiltonian.xx_chain(4, 0.0))


def random_nn_hamiltonian(n, rng):
    terms = [Term(rng.uniform(-1, 1), (i, i + 1), np.kron(PAULI["X"], PAULI["X"]), "XX") for i in range(n - 1)]
    terms += [Term(rng.uniform(-1, 1), (i,), PAULI["Z"], "Z") for i in range(n)]
    terms += [Term(rng.uniform(-1, 1), (i,), PAULI["X"], "X") for i in range(n)]
    return Hamiltonian(n, tuple(terms))


@pytest.mark.parametrize("seed", [11, 12])
def test_multipartite_envelope_holds_on_random_chains(seed):
    # calibrate on two-point data, then every contiguous k-point correlator must stay below
    rng = np.random.default_rng(seed)
    n = 6
    g, h = Geometry.chain(n), random_nn_hamiltonian(n, rng)
    cal = calibrate_velocity(g, h, times=np.linspace(0.1, 3.0, 15))
    zero = StateVector.basis([0] * n)
    for t in np.linspace(0.1, 3.0, 8):
        state = evolve(zero, h, t)
        for k in range(2, n + 1):
            for start in range(n - k + 1):
                supports = [[s] for s in range(start, start + k)]
                value = un_partition_sum(state, [Observable.pauli("Z", s) for s in supports])
                report = check_bound([(t, value)], k, critical_distance(g, supports)[0], cal.params, 1e-9)
                assert report.passed
