import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xicanon import cli
from xicanon.errors import ConfigError


def run(argv):
    return cli.main([str(a) for a in argv])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(allow_nan=True, allow_infinity=True), min_size=1, max_size=6),
       st.sampled_from(["csv", "json"]))
def test_table_round_trip(tmp_path_factory, values, fmt):
    path = tmp_path_factory.mktemp("rt") / f"t.{fmt}"
    rows = [(i, v, "label", i % 2 == 0) for i, v in enumerate(values)]
    t = cli.Table(["i", "v", "s", "flag"], rows, {"omega": 1.5, "grid": [1.0, 2.0, 3], "x": math.inf})
    cli.write_table(t, str(path), fmt)
    back = cli.read_table(str(path))
    assert back.columns == t.columns and back.meta == t.meta
    for r, b in zip(rows, back.rows):
        assert b[0] == r[0] and type(b[0]) is int
        assert (math.isnan(r[1]) and math.isnan(b[1])) or b[1] == r[1]
        assert b[2:] == r[2:]


def test_csv_uses_full_precision(tmp_path):
    path = tmp_path / "p.csv"
    cli.write_table(cli.Table(["x"], [(0.1,), (1 / 3,)], {}), str(path), "csv")
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# ") and lines[2] == "0.10000000000000001"
    assert float(lines[3]) == 1 / 3


def test_parse_helpers():
    assert cli.parse_range("1:2:5") == (1.0, 2.0, 5)
    assert cli.parse_complex("2,0.5") == 2 + 0.5j and cli.parse_complex("3") == 3
    for bad in ("1:2", "a:b:c", "2:1:5", "1:2:0"):
        with pytest.raises(ConfigError):
            cli.parse_range(bad)
    with pytest.raises(ConfigError):
        cli.parse_complex("1,2,3")


def test_theta_command(tmp_path):
    out = tmp_path / "theta.json"
    assert run(["theta", "--t-grid=-3:3:7", "--format", "json", "--out", out]) == 0
    doc = json.loads(out.read_text())
    assert doc["meta"]["omega"] == 1.5 and "git_describe" in doc["meta"] and "tolerances" in doc["meta"]
    assert len(doc["rows"]) == 7


def test_config_errors_exit_two(tmp_path, capsys):
    assert run(["theta", "--t-grid", "bad"]) == 2
    assert run(["theta", "--z", "1,2,3"]) == 2
    assert run(["nonsense"]) == 2
    assert run(["mcurve", "--a-grid", "1:5:3"]) == 2
    assert run(["det", "--omega", "0.8", "--a-grid", "1:1.5:2"]) == 2
    assert run(["theta", "--plot"]) == 2
    assert run(["theta", "--gnuplot", "--format", "json", "--out", tmp_path / "x.json"]) == 2
    assert run(["theta", "--out", tmp_path / "missing" / "x.csv"]) == 2


def test_det_command_with_plot_and_gnuplot(tmp_path):
    out = tmp_path / "det.csv"
    assert run(["det", "--a-grid", "1:1.4:3", "--out", out, "--plot", "--gnuplot"]) == 0
    t = cli.read_table(str(out))
    assert t.meta["grid"] == [1.0, 1.4, 3]
    assert (tmp_path / "det.png").stat().st_size > 1000
    script = (tmp_path / "det.gp").read_text()
    assert "'det.csv'" in script and "set datafile separator ','" in script


def test_zeros_command(tmp_path):
    out = tmp_path / "zeros.csv"
    assert run(["zeros", "--tmax", "20", "--out", out]) == 0
    t = cli.read_table(str(out))
    assert t.meta["count_matches"] and len(t.rows) == t.meta["contour_count"]


def test_verify_exit_status_and_determinism(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["verify", "--only", "specfun", "--seed", "7", "--out", a]) == 0
    assert run(["verify", "--only", "specfun", "--seed", "7", "--out", b]) == 0
    assert a.read_bytes() == b.read_bytes()
    err = capsys.readouterr().err
    assert "PASS theta_unitarity" in err


def test_verify_failing_check_exits_one(monkeypatch, tmp_path):
    from xicanon import verification as ver

    def failing(cfg):
        return [ver.CheckResult("theta_unitarity", ver.ANCHORS["theta_unitarity"], {"x": 1.0}, 1e-12, False)]

    monkeypatch.setattr(ver, "SUITE", [("specfun", failing)])
    assert run(["verify", "--out", tmp_path / "r.csv", "--plot"]) == 1
    assert (tmp_path / "r.png").exists()


def test_evolve_rejects_large_a():
    assert run(["evolve", "--a-max", "5"]) == 2
