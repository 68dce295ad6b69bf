import csv
import io
import json
import math

import pytest

from ursell.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_PRECONDITION,
    EXIT_VIOLATION,
    FIGURE4_COLUMNS,
    ConfigError,
    main,
    run_figure4,
    run_ghz_scan,
    time_grid,
)


def run(tmp_path, command, params=None, *extra):
    args = [command]
    if params is not None:
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"params": params}))
        args += ["--config", str(cfg)]
    out = tmp_path / "out.txt"
    code = main(args + ["--out", str(out), *extra])
    return code, (out.read_text() if out.exists() else "")


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_figure4_rows(tmp_path):
    code, text = run(tmp_path, "figure4", {"n": [2, 4, 8], "times": [0.0, math.pi / 8, math.pi / 4]})
    assert code == EXIT_OK
    assert text.splitlines()[0] == ",".join(FIGURE4_COLUMNS)
    table = {(int(r["n"]), float(r["t"])): r for r in rows(text)}
    assert float(table[4, math.pi / 4]["u_closed_form"]) == pytest.approx(1)
    assert float(table[8, math.pi / 8]["u_closed_form"]) == pytest.approx(0.5**7)
    assert float(table[8, math.pi / 8]["abs_diff"]) <= 1e-9
    assert float(table[2, 0.0]["u_closed_form"]) == 0


def test_figure4_blank_dense_column_above_limit():
    table = run_figure4([12], [0.3])
    assert table.rows[0]["u_dense"] is None
    assert table.to_csv().splitlines()[1].endswith(",,")


def test_ghz_scan():
    table = {row["n"]: row for row in run_ghz_scan(20, 8).rows}
    assert table[4]["u_exact"] == -2
    assert table[7]["u_exact"] == 0
    assert abs(table[20]["asymptotic_ratio"] - 1) <= 0.05
    assert table[6]["dense_abs_diff"] <= 1e-10
    assert table[10]["u_dense"] is None


def test_tripartite(tmp_path):
    code, text = run(tmp_path, "tripartite")
    report = json.loads(text)
    assert code == EXIT_OK
    assert report["u3_partition_sum"] == pytest.approx(1 / 18, abs=1e-12)
    assert abs(report["u2_cut_1|23"]) <= 1e-12
    assert abs(report["u2_cut_2|13"]) > 1e-3 and abs(report["u2_cut_3|12"]) > 1e-3


def test_cluster_path(tmp_path):
    code, text = run(tmp_path, "cluster", {"graph": "path", "n": 6})
    report = json.loads(text)
    assert code == EXIT_OK
    assert report["method"] == "dense"
    assert report["abs_u_n"] == pytest.approx(1, abs=1e-10)
    assert report["preparation_time"] == pytest.approx(math.pi / 4)


@pytest.mark.parametrize("n, method", [(10, "dense"), (13, "stabilizer")])
def test_cluster_fig3b(tmp_path, n, method):
    code, text = run(tmp_path, "cluster", {"graph": "fig3b", "n": n})
    report = json.loads(text)
    assert report["method"] == method
    assert report["abs_u_n"] == pytest.approx(2 ** ((n - 1) // 3), abs=1e-10)
    assert report["u_n"] == pytest.approx(-(2 ** ((n - 1) // 3)), abs=1e-10)


def test_cluster_respects_dense_ceiling(tmp_path, monkeypatch):
    monkeypatch.setenv("URSELL_DENSE_CEILING", "5")
    code, text = run(tmp_path, "cluster", {"graph": "path", "n": 8})
    assert json.loads(text)["method"] == "stabilizer"


def test_cluster_graph_file(tmp_path):
    (tmp_path / "g.json").write_text(json.dumps({"n": 3, "edges": [[0, 1], [1, 2]]}))
    code, text = run(tmp_path, "cluster", {"graph": "g.json", "observables": "YXY"})
    assert code == EXIT_OK
    assert json.loads(text)["abs_u_n"] == pytest.approx(1)


def test_bound_check_calibrated(tmp_path):
    code, text = run(tmp_path, "bound-check", {"n": 6, "times": {"start": 0, "stop": 3, "num": 7}})
    assert code == EXIT_OK
    assert all(r["passed"] == "True" for r in rows(text))


def test_bound_check_collinear(tmp_path):
    (tmp_path / "geo.json").write_text(json.dumps({"positions": [[0.0], [1.0], [3.0]]}))
    params = {"geometry": "geo.json", "supports": [[0, 1, 2]], "params": {"c2": 1.0, "v": 1.0}, "times": [0.5]}
    code, text = run(tmp_path, "bound-check", params)
    assert float(rows(text)[0]["R"]) == 2.0


def test_bound_check_adversarial(tmp_path):
    params = {"n": 4, "params": {"c2": 1e-9, "v": 1.0}, "times": [0.3, 0.6]}
    code, text = run(tmp_path, "bound-check", params)
    assert code == EXIT_VIOLATION
    assert any(r["passed"] == "False" for r in rows(text))


def test_xcheck_deterministic(tmp_path):
    code, first = run(tmp_path, "xcheck", {"trials": 100}, "--seed", "7")
    report = json.loads(first)
    assert code == EXIT_OK
    assert report["max_partition_vs_recursive"] <= 1e-10
    assert report["max_partition_vs_finite_difference"] <= 10 * report["fd_step"] ** 2
    assert report["max_product_state_mixed_cut"] <= 1e-10
    _, second = run(tmp_path, "xcheck", {"trials": 100}, "--seed", "7")
    assert first == second


def test_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["figure4", "--config", str(bad)]) == EXIT_CONFIG
    assert main(["figure4", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    code, _ = run(tmp_path, "figure4", {"times": [0.2, 0.1]})
    assert code == EXIT_CONFIG
    code, _ = run(tmp_path, "ghz-scan", {"n_max": 41})
    assert code == EXIT_PRECONDITION
    code, _ = run(tmp_path, "cluster", {"graph": "fig3b", "n": 9})
    assert code == EXIT_PRECONDITION
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps({"experiment": "ghz-scan"}))
    assert main(["figure4", "--config", str(wrong)]) == EXIT_CONFIG


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"params": {"n_max": 6}, "format": "json", "output": str(tmp_path / "a.json")}))
    assert main(["ghz-scan", "--config", str(cfg), "--format", "csv", "--out", str(tmp_path / "b.csv")]) == 0
    assert not (tmp_path / "a.json").exists()
    assert (tmp_path / "b.csv").read_text().startswith("n,u_exact")


def test_time_grid():
    assert len(time_grid({"start": 0, "stop": 1, "num": 50})) == 50
    with pytest.raises(ConfigError):
        time_grid([1.0, 1.0])
