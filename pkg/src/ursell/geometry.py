"""Site geometries, the critical distance over bipartitions, and Lieb-Robinson envelopes.

The envelope for an ``n``-point connected correlator is
``(n**n / 4) * c2 * exp(v t - R)`` where ``R`` is the largest, over all
bipartitions of the supports, of the smallest distance across the cut.
``c2`` and ``v`` are inputs; ``calibrate_velocity`` estimates them from
simulated two-point data.
"""

from __future__ import annotations

import json
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np
import scipy.optimize

from .config import CalibrationError, ResourceLimitError
from .correlators import SubsetMoments, CorrelatorRequest
from .partitions import Bipartition
from .quantum import Hamiltonian, Observable, StateVector, evolve

TRIANGLE_TOL = 1e-9
MAX_SUPPORTS = 20
SIGNAL_FLOOR = 1e-14


class Geometry:
    """Pairwise site distances, from Euclidean positions or an explicit matrix."""

    def __init__(
        self,
        *,
        positions: Sequence[Sequence[float]] | None = None,
        distances: Sequence[Sequence[float]] | None = None,
        allow_nonmetric: bool = False,
    ) -> None:
        if (positions is None) == (distances is None):
            raise ValueError("give exactly one of positions or distances")
        if positions is not None:
            pos = np.asarray(positions, dtype=float)
            if pos.ndim == 1:
                pos = pos[:, None]
            diff = pos[:, None, :] - pos[None, :, :]
            dist = np.sqrt((diff**2).sum(-1))
            self.positions: np.ndarray | None = pos
        else:
            dist = np.asarray(distances, dtype=float)
            self.positions = None
        if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
            raise ValueError(f"distance matrix must be square, got shape {dist.shape}")
        n = dist.shape[0]
        if not np.all(np.isfinite(dist)):
            raise ValueError("distances must be finite")
        if np.max(np.abs(dist - dist.T), initial=0.0) > 1e-12:
            raise ValueError("distance matrix is not symmetric")
        if np.any(np.diag(dist) != 0):
            raise ValueError("distance matrix needs a zero diagonal")
        off = dist[~np.eye(n, dtype=bool)]
        if np.any(off <= 0):
            raise ValueError("distinct sites must be at strictly positive distance")
        if not allow_nonmetric and n > 2:
            # d[i,k] <= d[i,j] + d[j,k] for all j
            via = (dist[:, :, None] + dist[None, :, :]).min(axis=1)
            if np.any(dist > via + TRIANGLE_TOL):
                raise ValueError("distances violate the triangle inequality (pass allow_nonmetric=True to waive)")
        dist.setflags(write=False)
        self.distances = dist
        self.allow_nonmetric = allow_nonmetric

    @property
    def n(self) -> int:
        return self.distances.shape[0]

    def distance(self, i: int, j: int) -> float:
        return float(self.distances[i, j])

    @classmethod
    def chain(cls, n: int, spacing: float = 1.0) -> Geometry:
        return cls(positions=[[spacing * i] for i in range(n)])

    @classmethod
    def from_dict(cls, data: dict) -> Geometry:
        if "positions" in data:
            return cls(positions=data["positions"])
        if "distances" in data:
            return cls(distances=data["distances"], allow_nonmetric=bool(data.get("allow_nonmetric", False)))
        raise ValueError("geometry document needs 'positions' or 'distances'")

    @classmethod
    def from_json(cls, path: str | Path) -> Geometry:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        if self.positions is not None:
            return {"positions": self.positions.tolist()}
        return {"distances": self.distances.tolist(), "allow_nonmetric": self.allow_nonmetric}


@dataclass(frozen=True)
class BoundParams:
    """Bipartite prefactor ``c2`` and velocity ``v`` of the envelope."""

    c2: float
    v: float

    def __post_init__(self) -> None:
        if not (self.c2 > 0 and math.isfinite(self.c2)):
            raise ValueError(f"c2 must be positive and finite, got {self.c2}")
        if not (self.v > 0 and math.isfinite(self.v)):
            raise ValueError(f"v must be positive and finite, got {self.v}")


def set_distance(g: Geometry, s1: Iterable[int], s2: Iterable[int]) -> float:
    """Smallest distance between a site of ``s1`` and a site of ``s2``."""
    a, b = sorted(set(s1)), sorted(set(s2))
    if not a or not b:
        raise ValueError("both site sets must be nonempty")
    if set(a) & set(b):
        raise ValueError(f"site sets overlap on {sorted(set(a) & set(b))}")
    return float(g.distances[np.ix_(a, b)].min())


def _support_distances(g: Geometry, supports: Sequence[Iterable[int]]) -> np.ndarray:
    sets = [sorted(set(s)) for s in supports]
    for s in sets:
        if not s:
            raise ValueError("supports must be nonempty")
    for (i, a), (j, b) in combinations(enumerate(sets), 2):
        if set(a) & set(b):
            raise ValueError(f"supports {i} and {j} overlap")
    m = len(sets)
    out = np.zeros((m, m))
    for i, j in combinations(range(m), 2):
        out[i, j] = out[j, i] = g.distances[np.ix_(sets[i], sets[j])].min()
    return out


def critical_distance(g: Geometry, supports: Sequence[Iterable[int]]) -> tuple[float, Bipartition]:
    """Largest cut distance over all bipartitions of the supports.

    Exhaustive over the ``2**(m-1) - 1`` bipartitions in canonical order; the
    first maximizer wins ties.
    """
    m = len(supports)
    if m < 2:
        raise ValueError("need at least two supports")
    if m > MAX_SUPPORTS:
        raise ResourceLimitError(f"{m} supports exceed the brute-force limit {MAX_SUPPORTS}")
    dist = _support_distances(g, supports)
    best_value = -math.inf
    best_code = 0
    chunk = 1 << 14
    total = 1 << (m - 1)
    bits = np.arange(1, m)
    for start in range(1, total, chunk):
        codes = np.arange(start, min(start + chunk, total))
        second = np.zeros((codes.size, m), dtype=bool)
        second[:, 1:] = (codes[:, None] >> (bits - 1)) & 1
        cut = np.full(codes.size, np.inf)
        for a in range(m):
            crossing = second != second[:, a : a + 1]
            cut = np.minimum(cut, np.where(crossing, dist[a], np.inf).min(axis=1))
        k = int(np.argmax(cut))
        if cut[k] > best_value:
            best_value = float(cut[k])
            best_code = int(codes[k])
    second_idx = tuple(i for i in range(1, m) if best_code >> (i - 1) & 1)
    first_idx = tuple(i for i in range(m) if i not in second_idx)
    return best_value, Bipartition(first_idx, second_idx)


def log_bound_envelope(n: int, p: BoundParams, t: float, r: float) -> float:
    """Natural log of ``(n**n / 4) c2 exp(v t - r)``."""
    if n < 2:
        raise ValueError(f"envelope needs n >= 2, got {n}")
    if r < 0 or t < 0:
        raise ValueError("distance and time must be non-negative")
    return n * math.log(n) - math.log(4) + math.log(p.c2) + p.v * t - r


def bound_envelope(n: int, p: BoundParams, t: float, r: float) -> float:
    """``(n**n / 4) c2 exp(v t - r)``, or ``inf`` where it overflows a double."""
    log_value = log_bound_envelope(n, p, t, r)
    return math.exp(log_value) if log_value < 709.0 else math.inf


@dataclass
class BoundPoint:
    t: float
    value: float
    log_envelope: float
    log_slack: float
    passed: bool


@dataclass
class BoundReport:
    n: int
    distance: float
    params: BoundParams
    points: list[BoundPoint]
    min_log_slack: float
    first_violation: float | None
    tolerance: float = 0.0

    @property
    def passed(self) -> bool:
        return self.first_violation is None

    @property
    def violations(self) -> list[BoundPoint]:
        return [pt for pt in self.points if not pt.passed]


def check_bound(
    series: Iterable[tuple[float, float]],
    n: int,
    R: float,
    p: BoundParams,
    tolerance: float = 0.0,
) -> BoundReport:
    """Compare ``|u_n(t)|`` with the envelope point by point.

    Slack is ``ln(envelope) - ln|u|`` (``inf`` for a zero correlator). A point
    passes when its slack is at least ``-tolerance``. Non-finite samples are
    dropped before checking.
    """
    points = []
    for t, value in series:
        t, value = float(t), float(value)
        if not (math.isfinite(t) and math.isfinite(value)):
            continue
        log_env = log_bound_envelope(n, p, t, R)
        slack = math.inf if value == 0 else log_env - math.log(abs(value))
        points.append(BoundPoint(t, value, log_env, slack, slack >= -tolerance))
    if not points:
        raise ValueError("no finite (t, u) samples to check")
    first = next((pt.t for pt in points if not pt.passed), None)
    return BoundReport(n, R, p, points, min(pt.log_slack for pt in points), first, tolerance)


# Calibration ----------------------------------------------------------------


@dataclass
class Sample:
    t: float
    r: float
    sites: tuple[int, int]
    value: float


@dataclass
class CalibrationResult:
    """Fitted envelope parameters and the per-sample log slack that remains."""

    params: BoundParams
    samples: list[Sample]
    residuals: np.ndarray = field(repr=False)

    @property
    def max_log_slack_violation(self) -> float:
        """Largest amount by which a training sample exceeds the envelope (0 if none)."""
        return float(max(0.0, -self.residuals.min())) if self.residuals.size else 0.0

    def light_cone_radius(self, t: float) -> float:
        """Distance beyond which the two-point envelope drops below 1."""
        return math.log(self.params.c2) + self.params.v * t


def two_point_samples(
    g: Geometry,
    h: Hamiltonian,
    probe: tuple[str, str] = ("Z", "Z"),
    times: Sequence[float] = tuple(np.linspace(0.05, 3.0, 60)),
    initial: StateVector | None = None,
) -> list[Sample]:
    """``u2(P_i, Q_j)`` for every site pair and time on the evolved state."""
    if g.n != h.n:
        raise ValueError(f"geometry has {g.n} sites but the Hamiltonian {h.n}")
    state = initial if initial is not None else StateVector.basis([0] * h.n)
    samples = []
    previous, elapsed = state, 0.0
    for t in sorted(float(x) for x in times):
        previous = evolve(previous, h, t - elapsed)
        elapsed = t
        for i, j in combinations(range(h.n), 2):
            req = CorrelatorRequest(
                previous, (Observable.pauli(probe[0], [i]), Observable.pauli(probe[1], [j]))
            )
            mom = SubsetMoments(req)
            value = (mom(3) - mom(1) * mom(2)).real
            samples.append(Sample(t, g.distance(i, j), (i, j), float(value)))
    return samples


def fit_envelope(samples: Sequence[Sample], floor: float = SIGNAL_FLOOR, min_velocity: float = 1e-6) -> CalibrationResult:
    """Smallest ``(ln c2, v)`` envelope above every sample, by linear programming.

    Constraints ``ln c2 + v t_k - r_k >= ln|u_k|`` for samples above
    ``floor``; the objective is the summed slack, i.e. the envelope's total
    height over the sampled points.
    """
    live = [s for s in samples if abs(s.value) > floor]
    if not live:
        raise CalibrationError("every two-point correlator is below the signal floor")
    t = np.array([s.t for s in live])
    r = np.array([s.r for s in live])
    y = np.log(np.abs([s.value for s in live]))
    # variables (a, v) with a = ln c2; minimize sum(a + v t) subject to -(a + v t) <= -(y + r)
    res = scipy.optimize.linprog(
        c=[len(live), float(t.sum())],
        A_ub=np.column_stack([-np.ones_like(t), -t]),
        b_ub=-(y + r),
        bounds=[(None, None), (min_velocity, None)],
        method="highs",
    )
    if not res.success:
        raise CalibrationError(f"envelope fit failed: {res.message}")
    a, v = res.x
    params = BoundParams(math.exp(a), float(v))
    all_t = np.array([s.t for s in samples])
    all_r = np.array([s.r for s in samples])
    all_y = np.log(np.maximum(np.abs([s.value for s in samples]), floor))
    residuals = a + v * all_t - all_r - all_y
    return CalibrationResult(params, list(samples), residuals)


def calibrate_velocity(
    g: Geometry,
    h: Hamiltonian,
    probe: tuple[str, str] = ("Z", "Z"),
    times: Sequence[float] = tuple(np.linspace(0.05, 3.0, 60)),
    initial: StateVector | None = None,
    floor: float = SIGNAL_FLOOR,
) -> CalibrationResult:
    """Fit ``(c2, v)`` so every simulated two-point correlator sits under ``c2 exp(v t - r)``."""
    if h.n > 12:
        raise ResourceLimitError(f"calibration simulates densely; n={h.n} exceeds 12")
    return fit_envelope(two_point_samples(g, h, probe, times, initial), floor)


def decay_slopes(samples: Sequence[Sample], cal: CalibrationResult, floor: float = SIGNAL_FLOOR) -> dict[float, float]:
    """Steepest-case slope of ``ln|u2|`` against distance outside the fitted cone, per time.

    For each time, the largest ``|u2|`` at each distance beyond the cone
    radius is kept; the reported slope is the maximum over pairs
    ``r1 < r2`` of ``(ln|u(r2)| - ln|u(r1)|) / (r2 - r1)``, taken only where
    ``|u(r1)|`` is above ``floor``. Times with fewer than two such distances
    are omitted; a distance whose value is below ``floor`` counts as
    complete decay (slope ``-inf``).
    """
    by_time: dict[float, dict[float, float]] = {}
    for s in samples:
        if s.r <= cal.light_cone_radius(s.t):
            continue
        row = by_time.setdefault(s.t, {})
        row[s.r] = max(row.get(s.r, 0.0), abs(s.value))
    out = {}
    for t, row in by_time.items():
        rs = sorted(row)
        slopes = [
            (math.log(row[r2]) - math.log(row[r1])) / (r2 - r1) if row[r2] > floor else -math.inf
            for r1, r2 in combinations(rs, 2)
            if row[r1] > floor
        ]
        if slopes:
            out[t] = max(slopes)
    return out
