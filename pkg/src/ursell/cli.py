"""Batch experiment runner.

Usage::

    ursell <subcommand> [--config run.json] [--out path] [--seed N] [--format csv|json]

Subcommands: figure4, ghz-scan, tripartite, cluster, bound-check, xcheck.
A config file looks like ``{"params": {...}, "output": "out.csv",
"format": "csv", "seed": 0}``; command-line flags override its keys.

Exit codes: 0 success, 2 config error, 3 precondition violation,
4 bound violation, 5 calibration failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from collections.abc import Callable, Sequence
from pathlib import Path

import numpy as np

from . import closed_form as cf
from .config import CalibrationError, ResourceLimitError, dense_ceiling
from .correlators import (
    partition_sum,
    SubsetMoments,
    CorrelatorRequest,
    u2,
    un_generating_fd,
    un_partition_sum,
    un_recursive,
)
from .geometry import (
    BoundParams,
    Geometry,
    calibrate_velocity,
    check_bound,
    critical_distance,
    bound_envelope,
)
from .quantum import Hamiltonian, Observable, PAULI, StateVector, Term, evolve
from .states import (
    GraphSpec,
    cluster_state,
    fig3b_graph,
    fig3b_observables,
    ghz,
    graph_stabilizer_group,
    paper_tripartite_state,
    pattern_observables,
    preparation_time,
    stabilizer_ursell,
)

log = logging.getLogger("ursell")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PRECONDITION = 3
EXIT_VIOLATION = 4
EXIT_CALIBRATION = 5

FIGURE4_COLUMNS = ["n", "t", "u_closed_form", "u_dense", "abs_diff"]
GHZ_COLUMNS = ["n", "u_exact", "u_dense", "u_asymptotic", "dense_abs_diff", "asymptotic_ratio"]
BOUND_COLUMNS = ["k", "support", "t", "u", "R", "envelope", "log_slack", "passed"]

FIGURE4_DENSE_MAX = 10
GHZ_DENSE_MAX = 12


class ConfigError(Exception):
    pass


class Table:
    """Rows with fixed column names, written as CSV or JSON."""

    def __init__(self, columns: Sequence[str], rows: list[dict] | None = None, meta: dict | None = None):
        self.columns = list(columns)
        self.rows = rows or []
        self.meta = meta or {}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=self.columns, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: _fmt(row.get(k)) for k in self.columns})
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"meta": self.meta, "columns": self.columns, "rows": self.rows}, indent=2, default=_json_default) + "\n"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, tuple):
        return list(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _report_json(report: dict) -> str:
    return json.dumps(report, indent=2, default=_json_default) + "\n"


# Parameter helpers ------------------------------------------------------------


def time_grid(spec, default=None) -> np.ndarray:
    """A strictly increasing time grid from a list or ``{"start", "stop", "num"}``."""
    if spec is None:
        spec = default
    if isinstance(spec, dict):
        try:
            grid = np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed time grid {spec!r}") from exc
    elif isinstance(spec, (list, tuple)):
        grid = np.asarray(spec, dtype=float)
    else:
        raise ConfigError(f"malformed time grid {spec!r}")
    if grid.size == 0 or not np.all(np.isfinite(grid)):
        raise ConfigError("time grid must be nonempty and finite")
    if np.any(np.diff(grid) <= 0):
        raise ConfigError("time grid must be strictly increasing")
    return grid


def _int_list(value, name) -> list[int]:
    if isinstance(value, int):
        return [value]
    try:
        return [int(v) for v in value]
    except TypeError as exc:
        raise ConfigError(f"{name} must be an int or list of ints") from exc


def _resolve(path, base: Path | None) -> Path:
    p = Path(path)
    if not p.is_absolute() and base is not None:
        p = base / p
    if not p.exists():
        raise ConfigError(f"referenced file {p} does not exist")
    return p


def z_moments(state: StateVector) -> list[float]:
    """``<prod_{k in S} Z_k>`` for every subset ``S`` of sites, indexed by bitmask over sites."""
    n = state.n
    probs = np.abs(state.amplitudes) ** 2
    index = np.arange(1 << n)
    bits = [((index >> (n - 1 - k)) & 1) for k in range(n)]
    out = [1.0] * (1 << n)
    for mask in range(1, 1 << n):
        parity = np.zeros(1 << n, dtype=np.int64)
        for k in range(n):
            if mask >> k & 1:
                parity ^= bits[k]
        out[mask] = float(np.dot(probs, 1 - 2 * parity))
    return out


# Experiments ------------------------------------------------------------------


def run_figure4(n_list: Sequence[int], times: Sequence[float]) -> Table:
    """All-Z connected correlator of the XX chain: closed form and, for n <= 10, dense partition sum."""
    table = Table(FIGURE4_COLUMNS, meta={"experiment": "figure4"})
    for n in n_list:
        if n < 2:
            raise ValueError(f"figure4 needs n >= 2, got {n}")
        dense = n <= min(FIGURE4_DENSE_MAX, dense_ceiling())
        h = Hamiltonian.xx_chain(n) if dense else None
        state = StateVector.basis([0] * n) if dense else None
        elapsed = 0.0
        for t in times:
            t = float(t)
            closed = cf.xx_un_closed_form(n, t)
            row = {"n": n, "t": t, "u_closed_form": closed, "u_dense": None, "abs_diff": None}
            if dense:
                state = evolve(state, h, t - elapsed)
                elapsed = t
                value = partition_sum(z_moments(state), n).real
                row["u_dense"] = float(value)
                row["abs_diff"] = abs(float(value) - closed)
            table.rows.append(row)
    return table


def run_ghz_scan(n_max: int, dense_max: int = GHZ_DENSE_MAX) -> Table:
    """Exact Bernoulli form for every n, dense partition sum where feasible, asymptotic for even n >= 10."""
    if n_max < 2:
        raise ValueError(f"ghz-scan needs n_max >= 2, got {n_max}")
    if n_max > 40:
        raise ValueError(f"ghz-scan exact formula limited to n_max <= 40, got {n_max}")
    dense_max = min(dense_max, GHZ_DENSE_MAX, dense_ceiling())
    table = Table(GHZ_COLUMNS, meta={"experiment": "ghz-scan"})
    for n in range(2, n_max + 1):
        exact = cf.ghz_un_exact(n)
        row = {"n": n, "u_exact": exact, "u_dense": None, "u_asymptotic": None,
               "dense_abs_diff": None, "asymptotic_ratio": None}
        if n <= dense_max:
            dense = partition_sum(z_moments(ghz(n)), n).real
            row["u_dense"] = float(dense)
            row["dense_abs_diff"] = abs(float(dense) - exact)
        if n % 2 == 0 and n >= 10:
            asym = cf.ghz_un_asymptotic(n)
            row["u_asymptotic"] = asym
            row["asymptotic_ratio"] = asym / abs(exact)
        table.rows.append(row)
    return table


def run_tripartite_demo() -> dict:
    """Tripartite Z correlator and the three single-site-versus-rest cuts."""
    psi = paper_tripartite_state()
    z = [Observable.pauli("Z", [k]) for k in range(3)]
    zz = {cut: Observable.pauli("ZZ", [a, b]) for cut, (a, b) in {0: (1, 2), 1: (0, 2), 2: (0, 1)}.items()}
    return {
        "experiment": "tripartite",
        "u3_partition_sum": un_partition_sum(psi, z),
        "u3_recursive": un_recursive(psi, z),
        "u3_finite_difference": un_generating_fd(psi, z, 1e-2),
        "u3_expected": 1 / 18,
        "u2_cut_1|23": u2(psi, z[0], zz[0]),
        "u2_cut_2|13": u2(psi, z[1], zz[1]),
        "u2_cut_3|12": u2(psi, z[2], zz[2]),
    }


def _cluster_observables(pattern: str, n: int):
    if pattern == "fig3b":
        return fig3b_observables(n)
    if pattern == "path":
        return pattern_observables("Y" + "X" * (n - 2) + "Y")
    if len(pattern) != n or set(pattern) - set("XYZ"):
        raise ValueError(f"observable pattern {pattern!r} must be fig3b, path, or {n} letters from XYZ")
    return pattern_observables(pattern)


def run_cluster(graph: GraphSpec, pattern: str, method: str = "auto") -> dict:
    """Designated n-point correlator of a graph state, dense or by stabilizer counting."""
    n = graph.n
    observables = _cluster_observables(pattern, n)
    if method == "auto":
        method = "dense" if n <= min(10, dense_ceiling()) else "stabilizer"
    if method == "dense":
        value = un_partition_sum(cluster_state(graph), [p.to_observable() for p in observables])
    elif method == "stabilizer":
        value = stabilizer_ursell(graph_stabilizer_group(graph), observables)
    else:
        raise ValueError(f"unknown method {method!r}")
    return {
        "experiment": "cluster",
        "n": n,
        "method": method,
        "observables": "".join(p.ops[0][1] for p in observables),
        "u_n": value,
        "abs_u_n": abs(value),
        "preparation_time": preparation_time(graph),
    }


def _hamiltonian_from(spec: dict, n: int) -> Hamiltonian:
    kind = spec.get("type", "xx_chain")
    if kind == "xx_chain":
        return Hamiltonian.xx_chain(n, spec.get("couplings", 1.0))
    if kind == "terms":
        terms = []
        for term in spec["terms"]:
            sites = tuple(term["sites"])
            letters = term["ops"]
            if len(letters) != len(sites):
                raise ConfigError(f"term {term} needs one Pauli letter per site")
            matrix = PAULI[letters[0]] if len(sites) == 1 else np.kron(PAULI[letters[0]], PAULI[letters[1]])
            terms.append(Term(float(term["J"]), sites, matrix, letters))
        return Hamiltonian(n, tuple(terms))
    raise ConfigError(f"unknown Hamiltonian type {kind!r}")


def _supports_from(spec, n: int) -> list[list[list[int]]]:
    """Lists of single-site supports; ``{"contiguous": [k, ...]}`` expands to every window."""
    if isinstance(spec, dict) and "contiguous" in spec:
        out = []
        for k in _int_list(spec["contiguous"], "contiguous"):
            out.extend([[[s + i] for i in range(k)] for s in range(n - k + 1)])
        return out
    if isinstance(spec, list):
        return [[list(s) if isinstance(s, list) else [int(s)] for s in group] for group in spec]
    raise ConfigError(f"malformed supports {spec!r}")


def run_bound_check(
    geometry: Geometry,
    hamiltonian: Hamiltonian,
    supports: list[list[list[int]]],
    times: Sequence[float],
    params: BoundParams | None = None,
    letter: str = "Z",
    tolerance: float = 1e-9,
) -> tuple[Table, dict]:
    """Connected correlators against the multipartite envelope for each support set and time.

    With ``params=None`` the envelope is calibrated from two-point data of
    the same Hamiltonian first.
    """
    calibration = None
    if params is None:
        calibration = calibrate_velocity(geometry, hamiltonian)
        params = calibration.params
    n = hamiltonian.n
    table = Table(BOUND_COLUMNS, meta={"experiment": "bound-check"})
    distances = {}
    for group in supports:
        key = json.dumps(group)
        distances[key] = critical_distance(geometry, group)[0] if len(group) > 1 else 0.0
    state = StateVector.basis([0] * n)
    elapsed = 0.0
    series: dict[str, list[tuple[float, float]]] = {json.dumps(g): [] for g in supports}
    for t in times:
        t = float(t)
        state = evolve(state, hamiltonian, t - elapsed)
        elapsed = t
        for group in supports:
            obs = [Observable(tuple(s), _letter_matrix(letter, len(s)), label=letter * len(s)) for s in group]
            value = un_partition_sum(CorrelatorRequest(state, tuple(obs)))
            series[json.dumps(group)].append((t, value))
    violations = 0
    min_slack = math.inf
    for group in supports:
        key = json.dumps(group)
        k = len(group)
        if k < 2:
            continue
        report = check_bound(series[key], k, distances[key], params, tolerance)
        violations += len(report.violations)
        min_slack = min(min_slack, report.min_log_slack)
        for pt in report.points:
            table.rows.append({
                "k": k, "support": key.replace(" ", ""), "t": pt.t, "u": pt.value, "R": distances[key],
                "envelope": bound_envelope(k, params, pt.t, distances[key]),
                "log_slack": pt.log_slack, "passed": pt.passed,
            })
    summary = {
        "c2": params.c2,
        "v": params.v,
        "calibrated": calibration is not None,
        "violations": violations,
        "min_log_slack": min_slack,
    }
    table.meta.update(summary)
    return table, summary


def _letter_matrix(letter: str, size: int) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for _ in range(size):
        out = np.kron(out, PAULI[letter])
    return out


def run_xcheck(seed: int, trials: int, step: float = 1e-2) -> dict:
    """Randomized three-way agreement of the correlator definitions, plus product-state vanishing."""
    if trials < 1:
        raise ValueError(f"xcheck needs trials >= 1, got {trials}")
    rng = np.random.default_rng(seed)
    max_rec = 0.0
    max_fd = 0.0
    max_product = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 6))
        state = StateVector.random(n, rng)
        k = int(rng.integers(2, n + 1))
        sites = rng.permutation(n)[:k]
        obs = [Observable.pauli(str(rng.choice(list("XYZ"))), [int(s)]) for s in sites]
        req = CorrelatorRequest(state, tuple(obs))
        ps = un_partition_sum(req)
        max_rec = max(max_rec, abs(ps - un_recursive(req)))
        max_fd = max(max_fd, abs(ps - un_generating_fd(req, step=step)))
        max_product = max(max_product, _product_trial(rng))
    return {
        "experiment": "xcheck",
        "seed": seed,
        "trials": trials,
        "fd_step": step,
        "max_partition_vs_recursive": max_rec,
        "max_partition_vs_finite_difference": max_fd,
        "finite_difference_bound": 10 * step**2,
        "max_product_state_mixed_cut": max_product,
    }


def _product_trial(rng: np.random.Generator) -> float:
    # random pure state of the form |a> (x) |b> over a random bipartition of the sites
    n = int(rng.integers(2, 6))
    k = int(rng.integers(1, n))
    left = StateVector.random(k, rng) if k > 1 else StateVector(_random_qubit(rng))
    right = StateVector.random(n - k, rng) if n - k > 1 else StateVector(_random_qubit(rng))
    state = StateVector(np.kron(left.amplitudes, right.amplitudes))
    perm = rng.permutation(n)
    # sites perm[:k] hold the left factor after relabelling
    tensor = np.transpose(state.tensor(), np.argsort(perm))
    state = StateVector(tensor.reshape(-1))
    side_a = [int(s) for s in perm[:k]]
    side_b = [int(s) for s in perm[k:]]
    picks = [side_a[int(rng.integers(len(side_a)))], side_b[int(rng.integers(len(side_b)))]]
    extra = [s for s in range(n) if s not in picks and rng.random() < 0.5]
    obs = [Observable.pauli(str(rng.choice(list("XYZ"))), [s]) for s in picks + extra]
    return abs(un_partition_sum(state, obs))


def _random_qubit(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    return v / np.linalg.norm(v)


# Command line -----------------------------------------------------------------


def _load_config(path: str | None) -> tuple[dict, Path | None]:
    if path is None:
        return {}, None
    p = Path(path)
    try:
        with open(p) as fh:
            cfg = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file {p} not found") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg, p.parent


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _cmd_figure4(params, fmt, seed, base):
    table = run_figure4(
        _int_list(params.get("n", [2, 4, 6, 8, 10]), "n"),
        time_grid(params.get("times"), {"start": 0.0, "stop": math.pi / 2, "num": 101}),
    )
    return (table.to_csv() if fmt == "csv" else table.to_json()), EXIT_OK


def _cmd_ghz_scan(params, fmt, seed, base):
    table = run_ghz_scan(int(params.get("n_max", 20)), int(params.get("dense_max", GHZ_DENSE_MAX)))
    return (table.to_csv() if fmt == "csv" else table.to_json()), EXIT_OK


def _cmd_tripartite(params, fmt, seed, base):
    report = run_tripartite_demo()
    if fmt == "csv":
        table = Table(["quantity", "value"], [{"quantity": k, "value": v} for k, v in report.items() if k != "experiment"])
        return table.to_csv(), EXIT_OK
    return _report_json(report), EXIT_OK


def _cmd_cluster(params, fmt, seed, base):
    graph_spec = params.get("graph", "path")
    n = params.get("n")
    if graph_spec == "path":
        graph = GraphSpec.path(int(n if n is not None else 6))
    elif graph_spec == "fig3b":
        graph = fig3b_graph(int(n if n is not None else 10))
    else:
        graph = GraphSpec.from_json(_resolve(graph_spec, base))
        if n is not None and int(n) != graph.n:
            raise ConfigError(f"graph file has n={graph.n}, config says {n}")
    default_pattern = "fig3b" if graph_spec == "fig3b" else "path"
    report = run_cluster(graph, params.get("observables", default_pattern), params.get("method", "auto"))
    if fmt == "csv":
        table = Table(list(report), [report])
        return table.to_csv(), EXIT_OK
    return _report_json(report), EXIT_OK


def _cmd_bound_check(params, fmt, seed, base):
    if "geometry" in params:
        geometry = Geometry.from_json(_resolve(params["geometry"], base))
    else:
        geometry = Geometry.chain(int(params.get("n", 6)))
    n = geometry.n
    hamiltonian = _hamiltonian_from(params.get("hamiltonian", {"type": "xx_chain"}), n)
    raw = params.get("params", "calibrate")
    if raw == "calibrate":
        bound_params = None
    elif isinstance(raw, dict):
        bound_params = BoundParams(float(raw["c2"]), float(raw["v"]))
    else:
        raise ConfigError(f"params must be 'calibrate' or {{'c2', 'v'}}, got {raw!r}")
    supports = _supports_from(params.get("supports", {"contiguous": [2, 3]}), n)
    times = time_grid(params.get("times"), {"start": 0.0, "stop": 3.0, "num": 31})
    table, summary = run_bound_check(
        geometry, hamiltonian, supports, times, bound_params,
        letter=params.get("letter", "Z"), tolerance=float(params.get("tolerance", 1e-9)),
    )
    text = table.to_csv() if fmt == "csv" else table.to_json()
    log.info("bound-check: %s", summary)
    return text, (EXIT_VIOLATION if summary["violations"] else EXIT_OK)


def _cmd_xcheck(params, fmt, seed, base):
    report = run_xcheck(seed, int(params.get("trials", 100)), float(params.get("step", 1e-2)))
    if fmt == "csv":
        table = Table(list(report), [report])
        return table.to_csv(), EXIT_OK
    return _report_json(report), EXIT_OK


COMMANDS: dict[str, Callable] = {
    "figure4": _cmd_figure4,
    "ghz-scan": _cmd_ghz_scan,
    "tripartite": _cmd_tripartite,
    "cluster": _cmd_cluster,
    "bound-check": _cmd_bound_check,
    "xcheck": _cmd_xcheck,
}
DEFAULT_FORMAT = {"tripartite": "json", "cluster": "json", "xcheck": "json"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ursell", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--seed", type=int, help="random seed")
        p.add_argument("--format", choices=["csv", "json"], help="output format")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg, base = _load_config(args.config)
        experiment = cfg.get("experiment")
        if experiment is not None and experiment != args.command:
            raise ConfigError(f"config is for {experiment!r}, not {args.command!r}")
        params = cfg.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError("'params' must be an object")
        out = args.out if args.out is not None else cfg.get("output")
        fmt = args.format or cfg.get("format") or DEFAULT_FORMAT.get(args.command, "csv")
        if fmt not in ("csv", "json"):
            raise ConfigError(f"unknown output format {fmt!r}")
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        text, code = COMMANDS[args.command](params, fmt, seed, base)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except CalibrationError as exc:
        log.error("calibration failed: %s", exc)
        return EXIT_CALIBRATION
    except (ValueError, ResourceLimitError) as exc:
        log.error("precondition violated: %s", exc)
        return EXIT_PRECONDITION
    _emit(text, out)
    if code == EXIT_VIOLATION:
        log.warning("envelope violated")
    return code


if __name__ == "__main__":
    sys.exit(main())
