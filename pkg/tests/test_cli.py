import copy

import numpy as np
import pytest
import yaml

from twoqubit_heom import cli
from twoqubit_heom.cli import ConfigError, main, parse_config
from twoqubit_heom.measures import concurrence, discord
from twoqubit_heom.model import build_initial

BASE = {
    "topology": "independent",
    "solver": "heom",
    "system": {"omega_a": 1.0, "omega_b": 1.0},
    "bath": {"lambda": 0.02, "f": 0.1, "omega_c": 1.0},
    "initial": {"kind": "bell_phi", "alpha": 0.7071067811865476},
    "time": {"t_max": 2.0, "n_samples": 20, "dt": 0.01},
    "truncation": {"depth": 2},
}


def config(**changes):
    doc = copy.deepcopy(BASE)
    for key, value in changes.items():
        if value is None:
            doc.pop(key)
        elif isinstance(value, dict) and isinstance(doc.get(key), dict):
            doc[key].update(value)
        else:
            doc[key] = value
    return doc


def write(tmp_path, doc, name="run.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(doc))
    return str(path)


def read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    return header, np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def test_parse_valid_config():
    cfg, f = parse_config(config())
    assert f == 0.1
    assert cfg.bath.gamma == pytest.approx(0.002)
    assert cfg.depth == 2 and cfg.n_samples == 20
    assert len(cfg.t_grid) == 21


def test_defaults():
    doc = config(truncation=None, system=None)
    doc["time"] = {"t_max": 30}
    cfg, _ = parse_config(doc)
    assert cfg.depth == "auto" and cfg.n_samples == 600 and cfg.dt == 0.01
    assert cfg.system.omega_a == 1.0


@pytest.mark.parametrize("doc, key", [
    (config(colour="red"), "colour"),
    (config(bath={"lamda": 0.1}), "lamda"),
    (config(time={"tmax": 3}), "tmax"),
    (config(initial=None), "initial"),
])
def test_config_errors_name_the_key(doc, key):
    with pytest.raises(ConfigError, match=key):
        parse_config(doc)


@pytest.mark.parametrize("doc", [
    config(bath={"gamma": 0.1}),
    config(bath={"lambda": 0.5, "omega_c": 1.0, "f": None}),
])
def test_exactly_one_of_f_or_gamma(doc):
    doc["bath"] = {k: v for k, v in doc["bath"].items() if v is not None}
    with pytest.raises(ConfigError, match="exactly one"):
        parse_config(doc)


@pytest.mark.parametrize("doc, match", [
    (config(solver="rwa", topology="common"), "independent"),
    (config(solver="rwa", initial={"kind": "custom", "matrix": (np.full((4, 4), 0.25)).tolist()}), "X-shaped"),
    (config(solver="pseudomode"), "common"),
    (config(solver="exact"), "solver"),
    (config(topology="shared"), "topology"),
    (config(truncation={"depth": 0}), "depth"),
    (config(time={"n_samples": 2.5}), "n_samples"),
    (config(bath={"lambda": "big"}), "lambda"),
    (config(initial={"alpha": 2.0}), "alpha"),
    (config(bath={"lambda": 0.0}), "gamma"),
])
def test_invalid_configs(doc, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(doc)


def test_step_divides_sample_spacing():
    cfg, _ = parse_config(config(time={"t_max": 50, "n_samples": 600, "dt": 0.01}))
    dt = cfg.step()
    spacing = 50 / 600
    assert dt <= 0.01
    assert abs(spacing / dt - round(spacing / dt)) < 1e-9


def test_simulate_writes_series(tmp_path):
    out = tmp_path / "series.csv"
    assert main(["simulate", "--config", write(tmp_path, config()), "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert header == list(cli.SERIES_COLUMNS)
    assert rows.shape == (21, 7)
    assert np.all(np.diff(rows[:, 0]) > 0)
    assert rows[:, 5].max() <= 1e-6
    # row 0 reproduces the measures of the initial state
    cfg, _ = parse_config(config())
    rho0 = build_initial(cfg.initial)
    d = discord(rho0)
    expected = [0.0, concurrence(rho0), d.discord, d.mutual_information, d.classical_correlation]
    assert np.allclose(rows[0, :5], expected, atol=1e-12)


def test_output_is_byte_reproducible(tmp_path):
    path = write(tmp_path, config())
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate", "--config", path, "--out", str(a)]) == 0
    assert main(["simulate", "--config", path, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    first = a.read_text().splitlines()[1]
    assert first.split(",")[0] == "0.000000000000e+00"


def test_output_path_from_config(tmp_path):
    out = tmp_path / "nested" / "dir" / "series.csv"
    assert main(["simulate", "--config", write(tmp_path, config(output=str(out)))]) == 0
    assert out.exists()


def test_free_evolution(tmp_path):
    doc = config(bath={"lambda": 0.0, "gamma": 0.1, "f": None})
    doc["bath"].pop("f")
    out = tmp_path / "free.csv"
    assert main(["simulate", "--config", write(tmp_path, doc), "--out", str(out)]) == 0
    _, rows = read_csv(out)
    assert np.allclose(rows[:, 1], 1.0, atol=1e-9)
    assert np.allclose(rows[:, 2], np.log(2), atol=1e-9)


@pytest.mark.parametrize("solver, topology, extra", [("rwa", "independent", {}),
                                                     ("pseudomode", "common", {"pseudomode": {"n_ph": 4}})])
def test_other_solvers(tmp_path, solver, topology, extra):
    doc = config(solver=solver, topology=topology, **extra)
    out = tmp_path / "s.csv"
    assert main(["simulate", "--config", write(tmp_path, doc), "--out", str(out)]) == 0
    _, rows = read_csv(out)
    assert rows.shape == (21, 7)
    assert rows[0, 1] == pytest.approx(1.0)


def test_config_error_exit_code_and_no_file(tmp_path, capsys):
    out = tmp_path / "never.csv"
    assert main(["simulate", "--config", write(tmp_path, config(bath={"omega": 2})), "--out", str(out)]) == 1
    assert "omega" in capsys.readouterr().err
    assert not out.exists()
    bad = tmp_path / "bad.yaml"
    bad.write_text("topology: [independent\n")
    assert main(["simulate", "--config", str(bad), "--out", str(out)]) == 1
    assert main(["simulate", "--config", str(tmp_path / "missing.yaml"), "--out", str(out)]) == 1
    assert main(["converge", "--config", str(bad), "--tol", "1e-3", "--out", str(out)]) == 1
    assert not out.exists()
    assert list(tmp_path.glob("*.tmp")) == []


def test_numerical_abort_exit_code(tmp_path, capsys):
    doc = config(bath={"lambda": 2.0, "f": 10}, time={"t_max": 5, "n_samples": 5, "dt": 0.5},
                 truncation={"depth": 4})
    out = tmp_path / "s.csv"
    assert main(["simulate", "--config", write(tmp_path, doc), "--out", str(out)]) == 2
    assert "numerical abort" in capsys.readouterr().err
    assert not out.exists()


def test_sweep_single_lambda_matches_simulate(tmp_path):
    path = write(tmp_path, config())
    series, sweep = tmp_path / "series.csv", tmp_path / "sweep.csv"
    assert main(["simulate", "--config", path, "--out", str(series)]) == 0
    assert main(["sweep", "--config", path, "--lambda", "0.02", "--out", str(sweep)]) == 0
    header, rows = read_csv(sweep)
    assert header == ["lambda", "t", "concurrence", "discord"]
    _, ref = read_csv(series)
    assert np.array_equal(rows[:, 1:], ref[:, :3])
    assert np.all(rows[:, 0] == 0.02)


def test_sweep_keeps_gamma_proportional(tmp_path):
    cfg, f = parse_config(config())
    point = cfg.with_lambda(0.5, f)
    assert point.bath.gamma == pytest.approx(0.05)
    cfg, f = parse_config(config(bath={"gamma": 0.3, "f": None}) | {"bath": {"lambda": 0.1, "gamma": 0.3}})
    assert f is None and cfg.with_lambda(0.5).bath.gamma == 0.3


def test_sweep_reports_failures_without_aborting(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    # lambda = 0 with gamma = f lambda is not a valid bath; the other point still runs
    code = main(["sweep", "--config", write(tmp_path, config()), "--lambda", "0,0.02", "--out", str(out)])
    assert code == 2
    assert "lambda=0" in capsys.readouterr().err
    _, rows = read_csv(out)
    assert set(rows[:, 0]) == {0.02}


def test_sweep_is_independent_of_parallelism(tmp_path):
    path = write(tmp_path, config())
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["sweep", "--config", path, "--lambda", "0.02,0.1,0.3", "--out", str(a)]) == 0
    assert main(["sweep", "--config", path, "--lambda", "0.02,0.1,0.3", "--out", str(b), "--jobs", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()
    _, rows = read_csv(a)
    assert list(dict.fromkeys(rows[:, 0])) == [0.02, 0.1, 0.3]


def test_bad_lambda_list(tmp_path):
    assert main(["sweep", "--config", write(tmp_path, config()), "--lambda", "a,b",
                 "--out", str(tmp_path / "x.csv")]) == 1


def test_converge_report(tmp_path, capsys):
    doc = config(time={"t_max": 30.0, "n_samples": 60})
    out = tmp_path / "conv.csv"
    assert main(["converge", "--config", write(tmp_path, doc), "--tol", "1e-3", "--out", str(out)]) == 0
    assert "converged: N=" in capsys.readouterr().out
    header, rows = read_csv(out)
    assert header == list(cli.CONVERGE_COLUMNS)
    assert rows[-1, 0] <= 4
    assert max(rows[-1, 2], rows[-1, 3]) < 1e-3


def test_auto_truncation(tmp_path):
    doc = config(truncation={"depth": "auto", "tolerance": 1e-3}, time={"t_max": 4.0, "n_samples": 8})
    cfg, _ = parse_config(doc)
    depth, dt, report = cli.resolve_truncation(cfg)
    assert depth == report.depth and depth <= 4
    assert dt <= cfg.dt
