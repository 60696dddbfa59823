import csv
import json

import numpy as np
import pytest

from varsteady import __version__, cli
from varsteady.config import ConfigError, RunConfig, parse_grid, parse_system


def run_cli(tmp_path, *args, name="out.csv"):
    out = tmp_path / name
    code = cli.main([*args, "--out", str(out)])
    return code, out


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def summary_of(path):
    return json.loads(path.with_suffix(".summary.json").read_text())


@pytest.mark.parametrize(
    "spec, expected",
    [
        ("0:1:0.25", [0, 0.25, 0.5, 0.75, 1.0]),
        ("0:1:0.3", [0, 0.3, 0.6, 0.9]),
        ("0:0.98:0.1", [0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]),
        ("0:0.93:0.1", [0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]),
        ("-8:2:5", [-8, -3, 2]),
        ("1,2.5,4", [1, 2.5, 4]),
        (3, [3.0]),
        ([1, 2], [1.0, 2.0]),
    ],
)
def test_grid_syntax(spec, expected):
    assert np.allclose(parse_grid(spec), expected)


def test_fine_grid_has_exact_count_and_endpoint():
    g = parse_grid("0:10:0.05")
    assert len(g) == 201 and g[-1] == 10.0 and g[91] == 4.55


@pytest.mark.parametrize("bad", ["0:1", "1:0:0.1", "0:1:0", "a:b:c"])
def test_bad_grids(bad):
    with pytest.raises(ValueError):
        parse_grid(bad)


def test_every_violation_is_reported():
    with pytest.raises(ConfigError) as err:
        RunConfig.from_sources({}, {"task": "sweep", "model": "ising", "g": "0:1", "J": 1, "threads": 0, "format": "xml"})
    text = str(err.value)
    for fragment in ("g:", "J does not apply", "threads", "format"):
        assert fragment in text
    assert len(err.value.problems) >= 4


def test_bad_config_exits_with_status_two(tmp_path, capsys):
    code, out = run_cli(tmp_path, "sweep", "--g", "0:1:0.5", "--h", "0:1:0.5")
    assert code == 2
    assert "exactly one grid parameter" in capsys.readouterr().err
    assert not out.exists()


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"task": "sweep", "bogus": 1}))
    assert cli.main(["sweep", "--config", str(cfg)]) == 2


def test_config_file_merges_with_flags(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": "ising", "V": 0, "g": "0:1:0.5", "restarts": 2, "seed": 3}))
    code, out = run_cli(tmp_path, "sweep", "--config", str(cfg), "--g", "0:1:0.25")
    assert code == 0
    meta = summary_of(out)
    assert meta["config"]["seed"] == 3 and meta["config"]["restarts"] == 2
    assert meta["config"]["resolved_grids"]["g"] == [0, 0.25, 0.5, 0.75, 1.0]


def test_sweep_output_and_determinism(tmp_path):
    args = ("sweep", "--model", "ising", "--V", "0", "--g", "0:2:0.5", "--restarts", "2")
    code, a = run_cli(tmp_path, *args, name="a.csv")
    _, b = run_cli(tmp_path, *args, name="b.csv")
    assert code == 0
    assert a.read_bytes() == b.read_bytes()
    rows = read_csv(a)
    assert list(rows[0]) == ["g", "n_up", "norm", "chi"]
    exact = [g**2 / (1 + 2 * g**2) for g in (0, 0.5, 1, 1.5, 2)]
    assert np.allclose([float(r["n_up"]) for r in rows], exact, atol=1e-6)
    meta = summary_of(a)
    assert meta["version"] == __version__ and meta["schema_version"] == cli.SCHEMA_VERSION
    assert meta["summary"]["jump"] is None and meta["summary"]["converged"]


def test_json_format(tmp_path):
    code, out = run_cli(tmp_path, "single-point", "--g", "0", "--V", "5", "--format", "json", name="o.json")
    assert code == 0
    data = json.loads(out.read_text())
    assert data["rows"][0]["n_up"] < 1e-8 and data["task"] == "single-point"


def test_meanfield_sweep(tmp_path):
    code, out = run_cli(tmp_path, "sweep", "--ansatz", "meanfield", "--g", "2,6")
    assert code == 0
    assert [int(r["fixed_points"]) for r in read_csv(out)] == [1, 2]
    assert summary_of(out)["summary"]["multistable_values"] == [6.0]


def test_single_point_variants(tmp_path):
    for ansatz in ("product", "correlated", "meanfield"):
        code, out = run_cli(tmp_path, "single-point", "--g", "0", "--ansatz", ansatz, "--restarts", "1", name=f"{ansatz}.csv")
        assert code == 0
        assert summary_of(out)["summary"]["converged"]


def test_boson_single_point(tmp_path):
    code, out = run_cli(tmp_path, "single-point", "--model", "bh", "--J", "0", "--nmax", "3", "--restarts", "1")
    assert code == 0
    assert float(read_csv(out)[0]["norm"]) < 1e-6


def test_phase_diagram_product(tmp_path):
    code, out = run_cli(tmp_path, "phase-diagram", "--g", "2:6:0.25", "--V", "0.5,3", "--restarts", "1")
    assert code == 0
    cp = summary_of(out)["summary"]["critical_point"]
    assert 0.5 < cp["V"] <= 3 and 2 < cp["g"] < 6
    rows = read_csv(out)
    assert float(rows[0]["V"]) == 0.5 and rows[0]["jump_g"] == ""


def test_compare_mf_with_threads(tmp_path):
    args = ("compare-mf", "--g", "0,6", "--h", "0", "--restarts", "1")
    code, a = run_cli(tmp_path, *args, "--threads", "2", name="a.csv")
    _, b = run_cli(tmp_path, *args, "--threads", "2", name="b.csv")
    assert code == 0 and a.read_bytes() == b.read_bytes()
    rows = read_csv(a)
    assert [float(r["g"]) for r in rows] == [0.0, 6.0]
    assert all(float(r["var_norm"]) <= float(r["mf_norm"]) + 1e-9 for r in rows)
    assert summary_of(a)["summary"]["max_var_minus_mf"] <= 1e-9


def test_exact_task(tmp_path):
    code, out = run_cli(tmp_path, "exact", "--system", "plaquette", "--g", "1:3:1")
    assert code == 0
    rows = read_csv(out)
    assert list(rows[0]) == ["g", "n_up", "chi", "residual", "converged"]
    assert summary_of(out)["summary"]["system"] == "plaquette-2x2"


def test_bias_task(tmp_path):
    code, out = run_cli(tmp_path, "bias-demo", "--g", "0.5", "--V", "1", "--N", "2:8:1", "--restarts", "1")
    assert code == 0
    s = summary_of(out)["summary"]
    assert s["crossover_N"] == {"1.0": None, "2.0": 6}


def test_strict_flags_non_convergence(tmp_path, monkeypatch):
    monkeypatch.setitem(cli.RUNNERS, "single-point", lambda cfg: ([{"x": 1.0}], {"converged": False}))
    assert cli.main(["single-point", "--out", str(tmp_path / "s.csv")]) == 0
    assert cli.main(["single-point", "--strict", "--out", str(tmp_path / "s.csv")]) == 1


@pytest.mark.parametrize("name, n", [("torus-3", 9), ("plaquette", 4), ("chain-5", 5), ("ring-6", 6)])
def test_system_names(name, n):
    assert parse_system(name).n_sites == n


def test_bad_system_name():
    with pytest.raises(ValueError):
        parse_system("cube-3")
    with pytest.raises(ValueError):
        parse_system("torus-x")
