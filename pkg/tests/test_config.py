from pathlib import Path

import pytest

from src.config import (
    DEFAULT_SIMPLEX_DIVISIONS,
    DEFAULT_SUPERVISED_GRID,
    ConfigError,
    ExperimentConfig,
    load_config_file,
    parse_range,
    resolve_config,
)


def test_parse_range():
    assert parse_range("0.25,0.75") == (0.25, 0.75)
    assert parse_range(" 0 , 1 ") == (0.0, 1.0)


@pytest.mark.parametrize("text", ["0.5", "a,b", "0.8,0.2", "0,1.5", "0,0.5,1"])
def test_parse_range_rejects(text):
    with pytest.raises(ConfigError):
        parse_range(text)


def test_defaults():
    cfg = resolve_config("solve")
    assert cfg.N == 100 and cfg.L == 1 and cfg.alpha == 0.1
    assert cfg.theta == cfg.phi_range == (0.0, 1.0)
    assert cfg.resolution == 1001
    assert cfg.out_dir == Path("results") / "solve"


def test_file_values_then_flags(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text(
        "# small run\n"
        "N = 40\n"
        "phi_range = 0,1\n"
        "theta_range = 0.25,0.75\n"
        "lambda = 0.5\n"
        "M = 51\n"
        "max-iters = 1000\n",
        encoding="utf-8",
    )
    values = load_config_file(path)
    assert values["lam"] == "0.5" and values["grid"] == "51" and values["max_iters"] == "1000"
    cfg = resolve_config("solve", values, {"N": 60, "epsilon": None})
    assert cfg.N == 60
    assert cfg.lam == 0.5
    assert cfg.grid == 51 and cfg.resolution == 51
    assert cfg.theta == (0.25, 0.75)
    assert cfg.epsilon is None


def test_unknown_key_is_rejected(tmp_path):
    path = tmp_path / "bad.conf"
    path.write_text("temperature = 3\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="unknown config key"):
        load_config_file(path)


def test_missing_file():
    with pytest.raises(ConfigError, match="not found"):
        load_config_file("/nonexistent/run.conf")


def test_bad_value_is_a_config_error():
    with pytest.raises(ConfigError, match="bad value"):
        resolve_config("solve", {"N": "many"})


@pytest.mark.parametrize(
    "mode,settings",
    [
        ("solve", {"theta_range": (0.1, 0.9), "phi_range": (0.2, 1.0)}),
        ("solve", {"N": 0}),
        ("solve", {"L": 0}),
        ("solve", {"alpha": 1.0}),
        ("solve", {"lam": 0.0}),
        ("solve", {"epsilon": 0.0}),
        ("solve", {"px": 1.5}),
        ("solve", {"family": "poisson"}),
        ("solve", {"family": "multinomial-4"}),
        ("sandwich", {"family": "multinomial-2"}),
        ("beta", {"N": 1}),
        ("solve", {"grid": 1}),
    ],
)
def test_validation(mode, settings):
    with pytest.raises(ConfigError):
        ExperimentConfig(mode=mode, **settings).validate()


def test_unknown_mode():
    with pytest.raises(ConfigError):
        ExperimentConfig(mode="plot").validate()


def test_resolution_defaults():
    assert ExperimentConfig(mode="solve", N=1000).resolution == 2001
    assert ExperimentConfig(mode="supervised").resolution == DEFAULT_SUPERVISED_GRID
    multi = ExperimentConfig(mode="solve", family="multinomial-2")
    assert multi.alphabet_size == 3
    assert multi.resolution == DEFAULT_SIMPLEX_DIVISIONS


def test_echo_is_json_friendly(tmp_path):
    cfg = ExperimentConfig(mode="capacity", out=tmp_path, theta_range=(0.2, 0.4)).validate()
    echo = cfg.echo()
    assert echo["out"] == str(tmp_path)
    assert echo["theta_range"] == [0.2, 0.4]
    assert echo["grid"] == 1001
    assert echo["mode"] == "capacity"
    assert echo["lam"] == 1.0
    assert echo["epsilon"] == pytest.approx(1e-5 / 200)


def test_reference_modes_default_to_scaled_step():
    table = ExperimentConfig(mode="table1")
    assert table.solver_settings(1000) == pytest.approx({"lam": 40.0, "epsilon": 5e-7})
    sandwich = ExperimentConfig(mode="sandwich", N=100)
    assert sandwich.solver_settings() == pytest.approx({"lam": 4.0, "epsilon": 5e-6})
    assert ExperimentConfig(mode="solve", N=100).solver_settings() == pytest.approx({"lam": 1.0, "epsilon": 5e-8})


def test_explicit_settings_override_mode_defaults():
    cfg = resolve_config("table1", {"lambda": "2.5"}, {"epsilon": 1e-4})
    assert cfg.solver_settings(1000) == {"lam": 2.5, "epsilon": 1e-4}
